// rhpt — command-line front end: dataset generation, within-sample
// matching, the benchmark harness, and the sensitivity/balance studies.
//
// Exit codes: 0 success, 2 invalid configuration or arguments, 3 I/O
// error, 4 degenerate data (e.g. a single-arm treatment vector or missing
// ground-truth columns).

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rhpt/rhpt.hpp"

namespace {

namespace fs = std::filesystem;

struct CliState {
  rhpt::ExperimentConfig config;
  std::string out_dir = ".";
  std::string data_path;  // optional input dataset for match/sensitivity/balance
  unsigned jobs = 1;
};

fs::path prepare_out_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) {
    throw rhpt::IoError("cannot create output directory '" + dir +
                        "': " + ec.message());
  }
  return p;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw rhpt::IoError("cannot open " + path.string() + " for writing");
  }
  return out;
}

// Dataset for the study commands: load when --data was given, otherwise
// draw one from the configured DGP with the master seed.
rhpt::CausalDataset obtain_dataset(const CliState& st) {
  if (!st.data_path.empty()) {
    return rhpt::load_csv(st.data_path);
  }
  rhpt::DgpConfig dgp = st.config.dgp;
  dgp.seed = st.config.master_seed;
  return rhpt::generate(dgp);
}

int cmd_generate(const CliState& st) {
  rhpt::DgpConfig dgp = st.config.dgp;
  dgp.seed = st.config.master_seed;
  dgp.validate();
  const rhpt::CausalDataset ds = rhpt::generate(dgp);

  const fs::path dir = prepare_out_dir(st.out_dir);
  const fs::path csv_path = dir / "dataset.csv";
  {
    auto out = open_out(csv_path);
    rhpt::save_csv(ds, out);
  }
  {
    auto out = open_out(dir / "manifest.json");
    nlohmann::json manifest = rhpt::manifest_json(dgp);
    manifest["files"] = {"dataset.csv"};
    out << manifest.dump(2) << '\n';
    if (!out) throw rhpt::IoError("write failed: manifest.json");
  }
  std::cout << "wrote " << csv_path.string() << " (" << ds.size()
            << " rows) and manifest.json\n";
  return 0;
}

int cmd_match(const CliState& st) {
  if (st.data_path.empty()) {
    throw std::invalid_argument("match: --data FILE is required");
  }
  const rhpt::CausalDataset ds = rhpt::load_csv(st.data_path);
  ds.t.validate();

  rhpt::TessellationParams params = st.config.tessellation;
  params.dim = static_cast<std::size_t>(ds.x.cols());
  if (params.lambda == 0.0) params.lambda = rhpt::default_lambda(ds.x);
  params.seed = st.config.master_seed;
  params.validate();

  const rhpt::RhptEmbedder embedder(params);
  const auto sketches = embedder.embed_batch(ds.x, st.jobs);
  const rhpt::MatchAssignment m = rhpt::match_within(
      rhpt::Representations::of_sketches(sketches), ds.t,
      rhpt::DistanceSpec{rhpt::DistanceKind::kHamming, 0}, st.jobs);
  const std::vector<double> ite = rhpt::transductive_ite(ds.y, ds.t, m);

  const fs::path dir = prepare_out_dir(st.out_dir);
  const fs::path path = dir / "matches.csv";
  {
    auto out = open_out(path);
    out << "i,match0,match1,dist0,dist1,ite\n";
    char buf[64];
    for (std::size_t i = 0; i < m.size(); ++i) {
      out << i << ',' << m.match0[i] << ',' << m.match1[i] << ',';
      std::snprintf(buf, sizeof buf, "%.17g", m.dist0[i]);
      out << buf << ',';
      std::snprintf(buf, sizeof buf, "%.17g", m.dist1[i]);
      out << buf << ',';
      std::snprintf(buf, sizeof buf, "%.17g", ite[i]);
      out << buf << '\n';
    }
    if (!out) throw rhpt::IoError("write failed: matches.csv");
  }
  std::cout << "wrote " << path.string() << " (" << m.size() << " rows), ate="
            << rhpt::ate(ite) << '\n';
  return 0;
}

int cmd_benchmark(const CliState& st) {
  st.config.validate();
  const auto rows = rhpt::run_benchmark(st.config, st.jobs);

  const fs::path dir = prepare_out_dir(st.out_dir);
  {
    auto out = open_out(dir / "results.csv");
    rhpt::write_results_csv(out, rows);
    if (!out) throw rhpt::IoError("write failed: results.csv");
  }
  {
    auto out = open_out(dir / "timings.csv");
    rhpt::write_timings_csv(out, rows);
    if (!out) throw rhpt::IoError("write failed: timings.csv");
  }
  {
    auto out = open_out(dir / "summary.json");
    out << rhpt::summary_json(rows).dump(2) << '\n';
    if (!out) throw rhpt::IoError("write failed: summary.json");
  }
  std::cout << "wrote results.csv, timings.csv, summary.json to "
            << dir.string() << '\n';
  return 0;
}

int cmd_sensitivity(const CliState& st) {
  st.config.validate();
  if (st.config.runs_per_beta < 2) {
    throw std::invalid_argument("sensitivity: runs_per_beta must be >= 2");
  }
  const rhpt::CausalDataset ds = obtain_dataset(st);
  const rhpt::DataSplit s =
      rhpt::split(ds, st.config.out_fraction,
                  rhpt::mix_seed(st.config.master_seed, 9));
  const auto results = rhpt::sensitivity_study(
      ds, s, st.config.beta_list, st.config.runs_per_beta,
      st.config.master_seed, st.jobs);

  const fs::path dir = prepare_out_dir(st.out_dir);
  const fs::path path = dir / "sensitivity.csv";
  {
    auto out = open_out(path);
    rhpt::write_sensitivity_csv(out, results);
    if (!out) throw rhpt::IoError("write failed: sensitivity.csv");
  }
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_balance(const CliState& st) {
  st.config.validate();
  const rhpt::CausalDataset ds = obtain_dataset(st);
  rhpt::LogisticOptions hyper = st.config.logistic;
  hyper.max_epochs = st.config.balance_epochs;
  hyper.standardize = false;
  const auto diags =
      rhpt::balance_study(ds, st.config.beta_list, st.config.runs_per_beta,
                          st.config.master_seed, hyper, st.jobs);

  const fs::path dir = prepare_out_dir(st.out_dir);
  const fs::path path = dir / "balance.csv";
  {
    auto out = open_out(path);
    rhpt::write_balance_csv(out, diags);
    if (!out) throw rhpt::IoError("write failed: balance.csv");
  }
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CliState st;

  CLI::App app{
      "rhpt: causal effect estimation via random hyperplane tessellations"};
  app.fallthrough();
  app.set_config("--config", "", "read options from a flat key=value file");
  app.require_subcommand(1);

  app.add_option("--seed", st.config.master_seed,
                 "master seed; every stream derives from it")
      ->capture_default_str();
  app.add_option("--jobs", st.jobs, "worker-thread bound")
      ->check(CLI::Range(1u, 256u))
      ->capture_default_str();
  app.add_option("--out", st.out_dir, "output directory")
      ->capture_default_str();
  app.add_option("--data", st.data_path,
                 "input dataset CSV (match requires it; sensitivity/balance "
                 "use it instead of a fresh draw)");

  app.add_option("--n", st.config.dgp.n, "DGP: sample count")
      ->capture_default_str();
  app.add_option("--dim", st.config.dgp.dim, "DGP: covariate dimension")
      ->capture_default_str();
  app.add_option("--latent-dim", st.config.dgp.latent_dim,
                 "DGP: latent dimension")
      ->capture_default_str();
  app.add_option("--propensity-sharpness",
                 st.config.dgp.propensity_sharpness,
                 "DGP: sigmoid sharpness alpha")
      ->capture_default_str();
  app.add_option("--positivity-clip", st.config.dgp.positivity_clip,
                 "DGP: propensity clip in (0, 0.5)")
      ->capture_default_str();
  app.add_option("--outcome-noise-sd", st.config.dgp.outcome_noise_sd,
                 "DGP: outcome noise sigma")
      ->capture_default_str();
  app.add_option("--effect-scale", st.config.dgp.effect_scale,
                 "DGP: treatment effect scale")
      ->capture_default_str();
  app.add_option("--hidden-confounding", st.config.dgp.hidden_confounding,
                 "DGP: hidden confounding factor (1 = none)")
      ->capture_default_str();

  app.add_option("--beta-angular", st.config.tessellation.beta_angular,
                 "tessellation: angular hyperplanes")
      ->capture_default_str();
  app.add_option("--beta-shifted", st.config.tessellation.beta_shifted,
                 "tessellation: shifted hyperplanes")
      ->capture_default_str();
  app.add_option("--lambda", st.config.tessellation.lambda,
                 "tessellation: shift range (0 = 3 * max row norm)")
      ->capture_default_str();

  app.add_option("--methods", st.config.methods,
                 "benchmark methods (rhpt raw pca jl propensity-raw "
                 "propensity-pca random)")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--replications", st.config.replications,
                 "benchmark replications")
      ->capture_default_str();
  app.add_option("--beta-list", st.config.beta_list,
                 "beta ladder for sensitivity/balance")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--runs-per-beta", st.config.runs_per_beta,
                 "tessellation redraws per beta")
      ->capture_default_str();
  app.add_option("--pca-components", st.config.pca_components,
                 "PCA components for the pca baselines")
      ->capture_default_str();
  app.add_option("--jl-dim", st.config.jl_dim, "JL projection dimension")
      ->capture_default_str();
  app.add_option("--logistic-lr", st.config.logistic.learning_rate,
                 "logistic: initial learning rate")
      ->capture_default_str();
  app.add_option("--logistic-l2", st.config.logistic.l2,
                 "logistic: L2 strength")
      ->capture_default_str();
  app.add_option("--logistic-max-epochs", st.config.logistic.max_epochs,
                 "logistic: epoch budget")
      ->capture_default_str();
  app.add_option("--logistic-tol", st.config.logistic.tol,
                 "logistic: gradient-norm tolerance")
      ->capture_default_str();
  app.add_option("--balance-epochs", st.config.balance_epochs,
                 "epoch budget for the balance-psi logistic fit")
      ->capture_default_str();
  app.add_option("--out-fraction", st.config.out_fraction,
                 "out-of-sample fraction")
      ->capture_default_str();

  auto* c_generate =
      app.add_subcommand("generate", "draw a dataset and write CSV + manifest");
  auto* c_match = app.add_subcommand(
      "match", "embed a dataset, match within-sample, write matches.csv");
  auto* c_benchmark = app.add_subcommand(
      "benchmark", "compare methods across replications");
  auto* c_sensitivity = app.add_subcommand(
      "sensitivity", "ATE spread across tessellation redraws per beta");
  auto* c_balance = app.add_subcommand(
      "balance", "psi balance diagnostic across the beta ladder");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    st.config.output_dir = st.out_dir;
    if (c_generate->parsed()) return cmd_generate(st);
    if (c_match->parsed()) return cmd_match(st);
    if (c_benchmark->parsed()) return cmd_benchmark(st);
    if (c_sensitivity->parsed()) return cmd_sensitivity(st);
    if (c_balance->parsed()) return cmd_balance(st);
    std::cerr << "error: no subcommand selected\n";
    return 2;
  } catch (const rhpt::DegenerateData& e) {
    std::cerr << "error (degenerate data): " << e.what() << '\n';
    return 4;
  } catch (const rhpt::IoError& e) {
    std::cerr << "error (io): " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error (invalid config): " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
