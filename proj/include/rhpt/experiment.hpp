#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rhpt/baselines.hpp"
#include "rhpt/error.hpp"
#include "rhpt/evaluation.hpp"
#include "rhpt/matching.hpp"
#include "rhpt/parallel.hpp"
#include "rhpt/random.hpp"
#include "rhpt/synthetic.hpp"
#include "rhpt/tessellation.hpp"
#include "rhpt/types.hpp"

namespace rhpt {

inline const std::vector<std::string>& allowed_methods() {
  static const std::vector<std::string> kMethods = {
      "rhpt", "raw",  "pca", "jl", "propensity-raw", "propensity-pca",
      "random"};
  return kMethods;
}

// Full experiment description consumed by the CLI commands.  The
// tessellation's dim is always taken from the DGP and its seed is derived
// per run; lambda = 0 means "derive 3 * max row norm from the within-sample
// covariates at run time".
struct ExperimentConfig {
  DgpConfig dgp;
  TessellationParams tessellation{/*dim=*/0, /*beta_angular=*/8192,
                                  /*beta_shifted=*/8192, /*lambda=*/0.0,
                                  /*seed=*/0};
  std::vector<std::string> methods = {"rhpt",           "raw",
                                      "pca",            "jl",
                                      "propensity-raw", "propensity-pca",
                                      "random"};
  int replications = 10;
  std::vector<std::size_t> beta_list = {128, 1024, 8192, 16384};
  int runs_per_beta = 20;
  std::size_t pca_components = 5;
  std::size_t jl_dim = 64;
  LogisticOptions logistic;   // propensity baselines
  int balance_epochs = 200;   // gradient-descent budget for the psi fit
  double out_fraction = 0.1;
  std::string output_dir = ".";
  std::uint64_t master_seed = 0;

  void validate() const {
    dgp.validate();
    if (tessellation.beta_total() == 0) {
      throw std::invalid_argument(
          "ExperimentConfig: tessellation bit budget must be positive");
    }
    if (!(tessellation.lambda >= 0.0) ||
        !std::isfinite(tessellation.lambda)) {
      throw std::invalid_argument(
          "ExperimentConfig: lambda must be >= 0 (0 = derive from data)");
    }
    if (methods.empty()) {
      throw std::invalid_argument("ExperimentConfig: methods list is empty");
    }
    const auto& allowed = allowed_methods();
    for (const auto& m : methods) {
      if (std::find(allowed.begin(), allowed.end(), m) == allowed.end()) {
        throw std::invalid_argument("ExperimentConfig: unknown method '" + m +
                                    "'");
      }
    }
    if (replications < 1) {
      throw std::invalid_argument(
          "ExperimentConfig: replications must be >= 1");
    }
    if (beta_list.empty()) {
      throw std::invalid_argument("ExperimentConfig: beta_list is empty");
    }
    for (std::size_t i = 0; i < beta_list.size(); ++i) {
      if (beta_list[i] == 0) {
        throw std::invalid_argument(
            "ExperimentConfig: beta_list entries must be positive");
      }
      if (i > 0 && beta_list[i] <= beta_list[i - 1]) {
        throw std::invalid_argument(
            "ExperimentConfig: beta_list must be strictly increasing");
      }
    }
    if (runs_per_beta < 1) {
      throw std::invalid_argument(
          "ExperimentConfig: runs_per_beta must be >= 1");
    }
    if (pca_components == 0) {
      throw std::invalid_argument(
          "ExperimentConfig: pca_components must be positive");
    }
    if (jl_dim == 0) {
      throw std::invalid_argument("ExperimentConfig: jl_dim must be positive");
    }
    if (balance_epochs < 1) {
      throw std::invalid_argument(
          "ExperimentConfig: balance_epochs must be >= 1");
    }
    if (!(out_fraction > 0.0) || !(out_fraction < 1.0)) {
      throw std::invalid_argument(
          "ExperimentConfig: out_fraction must lie in (0, 1)");
    }
  }
};

// One benchmark result.  wall_time_seconds is reported through the timing
// side-channel (timings.csv / summary.json), never through results.csv,
// which must be byte-identical across reruns of the same config.
struct MethodResultRow {
  std::string method;
  int replication = 0;
  double within_eps_ate = 0.0;
  double within_eps_ite = 0.0;
  double out_eps_ate = 0.0;
  double out_eps_pehe = 0.0;
  double wall_time_seconds = 0.0;
  std::string status = "ok";  // "ok" or a one-line failure description
};

namespace detail {

// Derived seed streams, all rooted at the replication's DGP seed
// (master_seed XOR replication).  generate() owns streams 1..7.
constexpr std::uint64_t kSplitStream = 9;
constexpr std::uint64_t kTessStream = 10;
constexpr std::uint64_t kJlStream = 11;
constexpr std::uint64_t kRandomWithinStream = 12;
constexpr std::uint64_t kRandomOutStream = 13;

struct MethodEstimates {
  std::vector<double> ite_within;  // transductive
  std::vector<double> ite_out;     // inductive
};

// Runs one method's full pipeline: build representations from the
// within-sample slice, match within, match the out-of-sample queries into
// the within pool, and form both ITE vectors from factual outcomes.
inline MethodEstimates run_method(const std::string& method,
                                  const ExperimentConfig& config,
                                  std::uint64_t dgp_seed,
                                  const CausalDataset& within,
                                  const CausalDataset& out, unsigned jobs) {
  MethodEstimates est;
  MatchAssignment m_within;
  MatchAssignment m_out;

  if (method == "rhpt") {
    TessellationParams params = config.tessellation;
    params.dim = static_cast<std::size_t>(within.x.cols());
    if (params.lambda == 0.0) params.lambda = default_lambda(within.x);
    params.seed = mix_seed(dgp_seed, kTessStream);
    const RhptEmbedder embedder(params);
    const auto s_within = embedder.embed_batch(within.x, jobs);
    const auto s_out = embedder.embed_batch(out.x, jobs);
    const DistanceSpec dist{DistanceKind::kHamming, 0};
    m_within = match_within(Representations::of_sketches(s_within), within.t,
                            dist, jobs);
    m_out = match_out_of_sample(Representations::of_sketches(s_out),
                                Representations::of_sketches(s_within),
                                within.t, dist, jobs);
  } else if (method == "raw") {
    const DistanceSpec dist{DistanceKind::kEuclidean, 0};
    m_within = match_within(Representations::of_vectors(within.x), within.t,
                            dist, jobs);
    m_out = match_out_of_sample(Representations::of_vectors(out.x),
                                Representations::of_vectors(within.x),
                                within.t, dist, jobs);
  } else if (method == "pca" || method == "propensity-pca") {
    const PcaModel pca = fit_pca(within.x, config.pca_components);
    const MatrixRM z_within = project(pca, within.x);
    const MatrixRM z_out = project(pca, out.x);
    if (method == "pca") {
      const DistanceSpec dist{DistanceKind::kEuclidean, 0};
      m_within = match_within(Representations::of_vectors(z_within), within.t,
                              dist, jobs);
      m_out = match_out_of_sample(Representations::of_vectors(z_out),
                                  Representations::of_vectors(z_within),
                                  within.t, dist, jobs);
    } else {
      const LogisticModel model =
          fit_logistic(z_within, within.t, config.logistic);
      const std::vector<double> e_within = predict_propensity(model, z_within);
      const std::vector<double> e_out = predict_propensity(model, z_out);
      const DistanceSpec dist{DistanceKind::kScalarAbsolute, 0};
      m_within = match_within(Representations::of_scalars(e_within), within.t,
                              dist, jobs);
      m_out = match_out_of_sample(Representations::of_scalars(e_out),
                                  Representations::of_scalars(e_within),
                                  within.t, dist, jobs);
    }
  } else if (method == "jl") {
    const JlProjection proj =
        make_jl(static_cast<std::size_t>(within.x.cols()), config.jl_dim,
                mix_seed(dgp_seed, kJlStream));
    const MatrixRM z_within = project(proj, within.x);
    const MatrixRM z_out = project(proj, out.x);
    const DistanceSpec dist{DistanceKind::kEuclidean, 0};
    m_within = match_within(Representations::of_vectors(z_within), within.t,
                            dist, jobs);
    m_out = match_out_of_sample(Representations::of_vectors(z_out),
                                Representations::of_vectors(z_within),
                                within.t, dist, jobs);
  } else if (method == "propensity-raw") {
    const LogisticModel model =
        fit_logistic(within.x, within.t, config.logistic);
    const std::vector<double> e_within = predict_propensity(model, within.x);
    const std::vector<double> e_out = predict_propensity(model, out.x);
    const DistanceSpec dist{DistanceKind::kScalarAbsolute, 0};
    m_within = match_within(Representations::of_scalars(e_within), within.t,
                            dist, jobs);
    m_out = match_out_of_sample(Representations::of_scalars(e_out),
                                Representations::of_scalars(e_within),
                                within.t, dist, jobs);
  } else if (method == "random") {
    m_within = random_match(within.t, mix_seed(dgp_seed, kRandomWithinStream));
    const std::vector<double> dummy_out(out.size(), 0.0);
    const std::vector<double> dummy_pool(within.size(), 0.0);
    m_out = match_out_of_sample(
        Representations::of_scalars(dummy_out),
        Representations::of_scalars(dummy_pool), within.t,
        DistanceSpec{DistanceKind::kRandom,
                     mix_seed(dgp_seed, kRandomOutStream)});
  } else {
    throw std::invalid_argument("run_method: unknown method '" + method + "'");
  }

  est.ite_within = transductive_ite(within.y, within.t, m_within);
  est.ite_out = inductive_ite(within.y, m_out);
  return est;
}

inline std::string sanitize_status(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

}  // namespace detail

// Runs the full benchmark: per replication, a fresh dataset draw (DGP seed
// = master_seed XOR replication), a 90/10 split, and every configured
// method trained within-sample and evaluated both in and out of sample.
// Replications run concurrently up to `jobs`; each writes only its own
// rows, so the result is independent of the job count.  A method failure
// becomes an error row (metrics NaN, status = message) and the run
// continues.
inline std::vector<MethodResultRow> run_benchmark(
    const ExperimentConfig& config, unsigned jobs = 1) {
  config.validate();
  const std::size_t n_methods = config.methods.size();
  const std::size_t reps = static_cast<std::size_t>(config.replications);
  std::vector<MethodResultRow> rows(n_methods * reps);

  parallel_chunks(reps, jobs, [&](std::size_t first, std::size_t last) {
    for (std::size_t rep = first; rep < last; ++rep) {
      const std::uint64_t dgp_seed =
          config.master_seed ^ static_cast<std::uint64_t>(rep);
      DgpConfig dgp = config.dgp;
      dgp.seed = dgp_seed;
      const CausalDataset ds = generate(dgp);
      const DataSplit s = split(ds, config.out_fraction,
                                mix_seed(dgp_seed, detail::kSplitStream));
      const CausalDataset within = take_rows(ds, s.within_idx);
      const CausalDataset out = take_rows(ds, s.out_idx);

      for (std::size_t mi = 0; mi < n_methods; ++mi) {
        MethodResultRow& row = rows[rep * n_methods + mi];
        row.method = config.methods[mi];
        row.replication = static_cast<int>(rep);
        try {
          auto [est, seconds] = time_section(row.method, [&] {
            return detail::run_method(row.method, config, dgp_seed, within,
                                      out, /*jobs=*/1);
          });
          row.within_eps_ate = eps_ate(est.ite_within, within.ite_true);
          row.within_eps_ite = eps_ite(est.ite_within, within.ite_true);
          row.out_eps_ate = eps_ate(est.ite_out, out.ite_true);
          row.out_eps_pehe = eps_pehe(est.ite_out, out.ite_true);
          row.wall_time_seconds = seconds;
        } catch (const std::exception& e) {
          const double nan = std::numeric_limits<double>::quiet_NaN();
          row.within_eps_ate = nan;
          row.within_eps_ite = nan;
          row.out_eps_ate = nan;
          row.out_eps_pehe = nan;
          row.status = detail::sanitize_status(e.what());
        }
      }
    }
  });
  return rows;
}

// Balance study: for each beta and each of `runs` tessellation seeds
// (mix_seed(mix_seed(base_seed, beta), run)), embed the full dataset and
// measure psi.  Requires ground-truth propensities.
inline std::vector<BalanceDiagnostic> balance_study(
    const CausalDataset& ds, std::span<const std::size_t> beta_list, int runs,
    std::uint64_t base_seed, LogisticOptions hyper, unsigned jobs = 1) {
  if (!ds.has_ground_truth) {
    throw DegenerateData(
        "balance_study: dataset lacks ground-truth propensities (column e)");
  }
  if (runs < 1) {
    throw std::invalid_argument("balance_study: runs must be >= 1");
  }
  if (beta_list.empty()) {
    throw std::invalid_argument("balance_study: beta_list is empty");
  }
  const double lambda = default_lambda(ds.x);
  std::vector<BalanceDiagnostic> diags;
  diags.reserve(beta_list.size() * static_cast<std::size_t>(runs));
  for (const std::size_t beta : beta_list) {
    for (int run = 0; run < runs; ++run) {
      const std::uint64_t seed =
          mix_seed(mix_seed(base_seed, beta), static_cast<std::uint64_t>(run));
      const TessellationParams params = even_split(
          static_cast<std::size_t>(ds.x.cols()), beta, lambda, seed);
      const RhptEmbedder embedder(params);
      const auto sketches = embedder.embed_batch(ds.x, jobs);
      diags.push_back(balance_psi(ds.e_true, sketches, ds.t, hyper, run));
    }
  }
  return diags;
}

// ---------------------------------------------------------------------------
// Report writers
// ---------------------------------------------------------------------------

namespace detail {

inline std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Aggregate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t count = 0;
};

inline Aggregate aggregate(std::span<const double> v) {
  Aggregate a;
  a.count = v.size();
  if (v.empty()) return a;
  a.mean = compensated_mean(v);
  if (v.size() >= 2) {
    double ss = 0.0;
    for (double x : v) {
      const double d = x - a.mean;
      ss += d * d;
    }
    a.stderr_ = std::sqrt(ss / static_cast<double>(v.size() - 1)) /
                std::sqrt(static_cast<double>(v.size()));
  }
  return a;
}

}  // namespace detail

// results.csv: deterministic per-(method, replication) error metrics.
inline void write_results_csv(std::ostream& out,
                              std::span<const MethodResultRow> rows) {
  out << "method,replication,within_eps_ate,within_eps_ite,out_eps_ate,"
         "out_eps_pehe,status\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.replication << ','
        << detail::g17(r.within_eps_ate) << ',' << detail::g17(r.within_eps_ite)
        << ',' << detail::g17(r.out_eps_ate) << ','
        << detail::g17(r.out_eps_pehe) << ',' << r.status << '\n';
  }
}

// timings.csv: wall time per (method, replication).  Kept out of
// results.csv so the latter is byte-stable across reruns.
inline void write_timings_csv(std::ostream& out,
                              std::span<const MethodResultRow> rows) {
  out << "method,replication,wall_time_seconds\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f", r.wall_time_seconds);
    out << r.method << ',' << r.replication << ',' << buf << '\n';
  }
}

// summary.json: per-method mean and standard error of each metric over
// successful replications, plus wall-time totals.  Standard errors are
// null when fewer than two successful replications exist.
inline nlohmann::json summary_json(std::span<const MethodResultRow> rows) {
  nlohmann::json j;
  std::vector<std::string> methods;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
  }
  for (const auto& method : methods) {
    std::vector<double> ate, ite, oate, pehe;
    double wall_total = 0.0;
    std::size_t n_ok = 0, n_error = 0;
    for (const auto& r : rows) {
      if (r.method != method) continue;
      wall_total += r.wall_time_seconds;
      if (r.status != "ok") {
        ++n_error;
        continue;
      }
      ++n_ok;
      ate.push_back(r.within_eps_ate);
      ite.push_back(r.within_eps_ite);
      oate.push_back(r.out_eps_ate);
      pehe.push_back(r.out_eps_pehe);
    }
    nlohmann::json m;
    const auto emit = [&](const char* name, std::span<const double> v) {
      const auto a = detail::aggregate(v);
      m[name]["mean"] = a.count ? nlohmann::json(a.mean) : nlohmann::json();
      m[name]["stderr"] =
          a.count >= 2 ? nlohmann::json(a.stderr_) : nlohmann::json();
    };
    emit("within_eps_ate", ate);
    emit("within_eps_ite", ite);
    emit("out_eps_ate", oate);
    emit("out_eps_pehe", pehe);
    m["wall_time_seconds_total"] = wall_total;
    m["replications_ok"] = n_ok;
    m["replications_error"] = n_error;
    j[method] = std::move(m);
  }
  return j;
}

// sensitivity.csv: per-run ATE rows (beta, run, ate) followed by one
// aggregate row per beta with the remaining columns filled.
inline void write_sensitivity_csv(std::ostream& out,
                                  std::span<const SensitivityResult> results) {
  out << "beta,run,ate,mean,std,ci95_low,ci95_high\n";
  for (const auto& r : results) {
    for (std::size_t run = 0; run < r.ate_estimates.size(); ++run) {
      out << r.beta << ',' << run << ',' << detail::g17(r.ate_estimates[run])
          << ",,,,\n";
    }
  }
  for (const auto& r : results) {
    out << r.beta << ",,," << detail::g17(r.mean) << ','
        << detail::g17(r.std_dev) << ',' << detail::g17(r.ci95_low) << ','
        << detail::g17(r.ci95_high) << '\n';
  }
}

// balance.csv: per-run psi rows followed by per-beta aggregates with a 95%
// normal-approximation CI over runs.
inline void write_balance_csv(std::ostream& out,
                              std::span<const BalanceDiagnostic> diags) {
  out << "beta,run,psi,mean,ci95_low,ci95_high\n";
  for (const auto& d : diags) {
    out << d.beta << ',' << d.run_id << ',' << detail::g17(d.psi) << ",,,\n";
  }
  std::vector<std::size_t> betas;
  for (const auto& d : diags) {
    if (std::find(betas.begin(), betas.end(), d.beta) == betas.end()) {
      betas.push_back(d.beta);
    }
  }
  for (const std::size_t beta : betas) {
    std::vector<double> psis;
    for (const auto& d : diags) {
      if (d.beta == beta) psis.push_back(d.psi);
    }
    const auto a = detail::aggregate(psis);
    const double half = 1.96 * a.stderr_;
    out << beta << ",,," << detail::g17(a.mean) << ','
        << detail::g17(a.mean - half) << ',' << detail::g17(a.mean + half)
        << '\n';
  }
}

// manifest.json: the exact configuration and seed a dataset was generated
// from.
inline nlohmann::json manifest_json(const DgpConfig& dgp) {
  nlohmann::json j;
  j["type"] = "dataset_manifest";
  j["version"] = 1;
  j["dgp"]["n"] = dgp.n;
  j["dgp"]["dim"] = dgp.dim;
  j["dgp"]["latent_dim"] = dgp.latent_dim;
  j["dgp"]["propensity_sharpness"] = dgp.propensity_sharpness;
  j["dgp"]["positivity_clip"] = dgp.positivity_clip;
  j["dgp"]["outcome_noise_sd"] = dgp.outcome_noise_sd;
  j["dgp"]["effect_scale"] = dgp.effect_scale;
  j["dgp"]["hidden_confounding"] = dgp.hidden_confounding;
  j["dgp"]["seed"] = dgp.seed;
  return j;
}

}  // namespace rhpt
