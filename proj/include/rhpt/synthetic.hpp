#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rhpt/error.hpp"
#include "rhpt/matching.hpp"
#include "rhpt/random.hpp"
#include "rhpt/types.hpp"

namespace rhpt {

// Latent-factor causal data-generating process: covariates are a random
// linear lift of a low-dimensional latent vector plus small isotropic
// noise, so the observed data is high-dimensional with low intrinsic
// dimension; treatment follows a smooth clipped-sigmoid propensity of the
// latent state; potential outcomes mix a linear trend, a bounded
// nonlinearity, and a heterogeneous quadratic effect.
struct DgpConfig {
  std::size_t n = 3000;
  std::size_t dim = 300;
  std::size_t latent_dim = 8;
  double propensity_sharpness = 2.0;  // alpha
  double positivity_clip = 0.05;      // e_true in [clip, 1-clip]
  double outcome_noise_sd = 1.0;      // sigma
  double effect_scale = 1.0;
  // 1.0 = ignorability holds; values above 1 add a latent driver that
  // shifts both the propensity and the outcomes but never appears in X.
  double hidden_confounding = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 2) {
      throw std::invalid_argument("DgpConfig: n must be at least 2");
    }
    if (dim == 0) {
      throw std::invalid_argument("DgpConfig: dim must be positive");
    }
    if (latent_dim == 0 || latent_dim > dim) {
      throw std::invalid_argument(
          "DgpConfig: latent_dim must be in [1, dim]");
    }
    if (!(propensity_sharpness > 0.0) ||
        !std::isfinite(propensity_sharpness)) {
      throw std::invalid_argument(
          "DgpConfig: propensity_sharpness must be a positive real");
    }
    if (!(positivity_clip > 0.0) || !(positivity_clip < 0.5)) {
      throw std::invalid_argument(
          "DgpConfig: positivity_clip must lie in (0, 0.5)");
    }
    if (!(outcome_noise_sd >= 0.0) || !std::isfinite(outcome_noise_sd)) {
      throw std::invalid_argument(
          "DgpConfig: outcome_noise_sd must be non-negative");
    }
    if (!std::isfinite(effect_scale)) {
      throw std::invalid_argument("DgpConfig: effect_scale must be finite");
    }
    if (!(hidden_confounding >= 1.0) || !std::isfinite(hidden_confounding)) {
      throw std::invalid_argument(
          "DgpConfig: hidden_confounding must be >= 1");
    }
  }
};

// A generated (or loaded) dataset.  Ground-truth fields mu0/mu1/e_true/
// ite_true are populated by the generator and optional on load — observed
// data has only covariates, treatment, and outcome.
struct CausalDataset {
  MatrixRM x;              // n x dim covariates
  TreatmentVector t;       // observed treatment
  std::vector<double> y;   // factual outcome
  std::vector<double> mu0;  // noiseless potential outcomes
  std::vector<double> mu1;
  std::vector<double> e_true;    // true propensities, clipped
  std::vector<double> ite_true;  // mu1 - mu0
  bool has_ground_truth = false;

  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
};

struct DataSplit {
  std::vector<std::size_t> within_idx;
  std::vector<std::size_t> out_idx;
};

namespace detail {

inline double sigmoid_clip(double z, double clip) {
  const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                            : std::exp(z) / (1.0 + std::exp(z));
  return std::clamp(p, clip, 1.0 - clip);
}

}  // namespace detail

// Draws one dataset.  All randomness comes from fixed substreams of
// config.seed (mix_seed stream ids in parentheses), in this order: lift
// matrix W (1); weight vectors w_e, w_y, w_s, w_tau, each latent_dim long
// (2); latent states z row-by-row (3); covariate noise row-by-row (4);
// treatment draws (5); outcome noise (6); hidden confounder u (7).
//
//   X_i  = W z_i + 0.1 eps_i
//   e_i  = clip(sigmoid(alpha (<w_e, z_i> + (hc-1) u_i) / sqrt(L)))
//   T_i  ~ Bernoulli(e_i)
//   mu_t = <w_y, z_i> + sin(<w_s, z_i>) + (hc-1) u_i
//            + t * effect_scale * (1 + <w_tau, z_i>^2 / L)
//   Y_i  = mu_{T_i} + N(0, sigma^2)
//
// The hidden-confounding term (hc - 1) u_i enters the propensity and both
// potential outcomes but never X, so hc > 1 breaks ignorability by an
// amount that grows with hc; at hc = 1 the terms vanish exactly.
inline CausalDataset generate(const DgpConfig& config) {
  config.validate();
  const std::size_t n = config.n;
  const std::size_t dim = config.dim;
  const std::size_t lat = config.latent_dim;
  const double inv_sqrt_lat = 1.0 / std::sqrt(static_cast<double>(lat));
  const double hc = config.hidden_confounding - 1.0;

  std::normal_distribution<double> gauss(0.0, 1.0);

  MatrixRM lift(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(lat));
  {
    auto engine = make_engine(mix_seed(config.seed, 1));
    for (Eigen::Index r = 0; r < lift.rows(); ++r) {
      for (Eigen::Index c = 0; c < lift.cols(); ++c) {
        lift(r, c) = gauss(engine);
      }
    }
  }

  Vector w_e(static_cast<Eigen::Index>(lat)), w_y(static_cast<Eigen::Index>(lat)),
      w_s(static_cast<Eigen::Index>(lat)), w_tau(static_cast<Eigen::Index>(lat));
  {
    auto engine = make_engine(mix_seed(config.seed, 2));
    for (Eigen::Index i = 0; i < w_e.size(); ++i) w_e(i) = gauss(engine);
    for (Eigen::Index i = 0; i < w_y.size(); ++i) w_y(i) = gauss(engine);
    for (Eigen::Index i = 0; i < w_s.size(); ++i) w_s(i) = gauss(engine);
    for (Eigen::Index i = 0; i < w_tau.size(); ++i) w_tau(i) = gauss(engine);
  }

  MatrixRM z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(lat));
  {
    auto engine = make_engine(mix_seed(config.seed, 3));
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = gauss(engine);
    }
  }

  CausalDataset ds;
  ds.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  {
    auto engine = make_engine(mix_seed(config.seed, 4));
    for (Eigen::Index r = 0; r < ds.x.rows(); ++r) {
      for (Eigen::Index c = 0; c < ds.x.cols(); ++c) {
        ds.x(r, c) = 0.1 * gauss(engine);
      }
    }
  }
  ds.x.noalias() += z * lift.transpose();

  std::vector<double> u(n);
  {
    auto engine = make_engine(mix_seed(config.seed, 7));
    for (double& v : u) v = gauss(engine);
  }

  ds.e_true.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double score =
        z.row(static_cast<Eigen::Index>(i)).dot(w_e) + hc * u[i];
    ds.e_true[i] = detail::sigmoid_clip(
        config.propensity_sharpness * score * inv_sqrt_lat,
        config.positivity_clip);
  }

  ds.t.t.resize(n);
  {
    auto engine = make_engine(mix_seed(config.seed, 5));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      ds.t.t[i] = unif(engine) < ds.e_true[i] ? 1 : 0;
    }
  }

  ds.mu0.resize(n);
  ds.mu1.resize(n);
  ds.ite_true.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto zi = z.row(static_cast<Eigen::Index>(i));
    const double base = zi.dot(w_y) + std::sin(zi.dot(w_s)) + hc * u[i];
    const double tau_score = zi.dot(w_tau);
    const double effect =
        config.effect_scale *
        (1.0 + tau_score * tau_score / static_cast<double>(lat));
    ds.mu0[i] = base;
    ds.mu1[i] = base + effect;
    ds.ite_true[i] = ds.mu1[i] - ds.mu0[i];
  }

  ds.y.resize(n);
  {
    auto engine = make_engine(mix_seed(config.seed, 6));
    for (std::size_t i = 0; i < n; ++i) {
      const double noise = config.outcome_noise_sd * gauss(engine);
      ds.y[i] = (ds.t.t[i] == 1 ? ds.mu1[i] : ds.mu0[i]) + noise;
    }
  }

  ds.has_ground_truth = true;
  return ds;
}

// Uniform random partition into within-sample and out-of-sample index
// lists; |out_idx| = round(out_fraction * n).  Both lists are sorted.
inline DataSplit split(const CausalDataset& ds, double out_fraction,
                       std::uint64_t seed) {
  const std::size_t n = ds.size();
  if (n < 10) {
    throw DegenerateData("split: need at least 10 samples");
  }
  if (!(out_fraction > 0.0) || !(out_fraction < 1.0)) {
    throw std::invalid_argument("split: out_fraction must lie in (0, 1)");
  }
  const std::size_t n_out = static_cast<std::size_t>(
      std::llround(out_fraction * static_cast<double>(n)));
  if (n_out == 0 || n_out >= n) {
    throw DegenerateData("split: fraction leaves an empty part");
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto engine = make_engine(seed);
  std::shuffle(idx.begin(), idx.end(), engine);

  DataSplit s;
  s.out_idx.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_out));
  s.within_idx.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_out), idx.end());
  std::sort(s.out_idx.begin(), s.out_idx.end());
  std::sort(s.within_idx.begin(), s.within_idx.end());
  return s;
}

inline DataSplit split(const CausalDataset& ds, std::uint64_t seed) {
  return split(ds, 0.1, seed);
}

// Row-subset of a dataset (ground truth carried along when present).
inline CausalDataset take_rows(const CausalDataset& ds,
                               std::span<const std::size_t> idx) {
  CausalDataset out;
  out.x.resize(static_cast<Eigen::Index>(idx.size()), ds.x.cols());
  out.t.t.resize(idx.size());
  out.y.resize(idx.size());
  out.has_ground_truth = ds.has_ground_truth;
  if (ds.has_ground_truth) {
    out.mu0.resize(idx.size());
    out.mu1.resize(idx.size());
    out.e_true.resize(idx.size());
    out.ite_true.resize(idx.size());
  }
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const std::size_t src = idx[i];
    if (src >= ds.size()) {
      throw std::out_of_range("take_rows: index exceeds dataset size");
    }
    out.x.row(static_cast<Eigen::Index>(i)) =
        ds.x.row(static_cast<Eigen::Index>(src));
    out.t.t[i] = ds.t.t[src];
    out.y[i] = ds.y[src];
    if (ds.has_ground_truth) {
      out.mu0[i] = ds.mu0[src];
      out.mu1[i] = ds.mu1[src];
      out.e_true[i] = ds.e_true[src];
      out.ite_true[i] = ds.ite_true[src];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV I/O
// ---------------------------------------------------------------------------
// Schema: header x0,...,x{d-1},t,y[,mu0,mu1,e]; one row per unit; doubles
// printed with 17 significant digits so a save/load round trip is
// bit-exact.  The three ground-truth columns appear together or not at all.

namespace detail {

inline void append_g17(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace detail

inline void save_csv(const CausalDataset& ds, std::ostream& out) {
  const std::size_t dim = static_cast<std::size_t>(ds.x.cols());
  std::string line;
  for (std::size_t j = 0; j < dim; ++j) {
    line += "x" + std::to_string(j) + ",";
  }
  line += "t,y";
  if (ds.has_ground_truth) line += ",mu0,mu1,e";
  line += "\n";
  out << line;

  for (std::size_t i = 0; i < ds.size(); ++i) {
    line.clear();
    for (std::size_t j = 0; j < dim; ++j) {
      detail::append_g17(line, ds.x(static_cast<Eigen::Index>(i),
                                    static_cast<Eigen::Index>(j)));
      line += ',';
    }
    line += std::to_string(ds.t.t[i]);
    line += ',';
    detail::append_g17(line, ds.y[i]);
    if (ds.has_ground_truth) {
      line += ',';
      detail::append_g17(line, ds.mu0[i]);
      line += ',';
      detail::append_g17(line, ds.mu1[i]);
      line += ',';
      detail::append_g17(line, ds.e_true[i]);
    }
    line += '\n';
    out << line;
  }
  if (!out) throw IoError("save_csv: write failed");
}

inline void save_csv(const CausalDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_csv: cannot open " + path + " for writing");
  save_csv(ds, out);
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline double parse_double_field(const std::string& field, std::size_t row,
                                 const std::string& column) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end == field.c_str() || *end != '\0') {
    throw IoError("load_csv: row " + std::to_string(row) + ", column " +
                  column + ": cannot parse '" + field + "' as a number");
  }
  return v;
}

}  // namespace detail

inline CausalDataset load_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) {
    throw IoError("load_csv: empty file (no header)");
  }
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const auto cols = detail::split_fields(header);

  // Leading x0..x{d-1} block.
  std::size_t dim = 0;
  while (dim < cols.size() && cols[dim] == "x" + std::to_string(dim)) ++dim;
  if (dim == 0) {
    throw IoError("load_csv: header must start with column x0, got '" +
                  (cols.empty() ? std::string() : cols[0]) + "'");
  }
  const std::size_t rest = cols.size() - dim;
  bool ground_truth = false;
  if (rest == 2) {
    ground_truth = false;
  } else if (rest == 5) {
    ground_truth = true;
  } else {
    throw IoError(
        "load_csv: expected columns t,y or t,y,mu0,mu1,e after the covariate "
        "block; found " +
        std::to_string(rest) + " trailing columns");
  }
  const char* expect[5] = {"t", "y", "mu0", "mu1", "e"};
  for (std::size_t j = 0; j < rest; ++j) {
    if (cols[dim + j] != expect[j]) {
      throw IoError("load_csv: expected header column '" +
                    std::string(expect[j]) + "', got '" + cols[dim + j] + "'");
    }
  }

  CausalDataset ds;
  ds.has_ground_truth = ground_truth;
  std::vector<double> xbuf;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto fields = detail::split_fields(line);
    if (fields.size() != cols.size()) {
      throw IoError("load_csv: row " + std::to_string(row) + ": expected " +
                    std::to_string(cols.size()) + " fields, got " +
                    std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < dim; ++j) {
      xbuf.push_back(
          detail::parse_double_field(fields[j], row, "x" + std::to_string(j)));
    }
    const std::string& tf = fields[dim];
    if (tf != "0" && tf != "1") {
      throw IoError("load_csv: row " + std::to_string(row) +
                    ", column t: expected 0 or 1, got '" + tf + "'");
    }
    ds.t.t.push_back(tf == "1" ? 1 : 0);
    ds.y.push_back(detail::parse_double_field(fields[dim + 1], row, "y"));
    if (ground_truth) {
      ds.mu0.push_back(detail::parse_double_field(fields[dim + 2], row, "mu0"));
      ds.mu1.push_back(detail::parse_double_field(fields[dim + 3], row, "mu1"));
      ds.e_true.push_back(detail::parse_double_field(fields[dim + 4], row, "e"));
      ds.ite_true.push_back(ds.mu1.back() - ds.mu0.back());
    }
  }
  if (row == 0) {
    throw IoError("load_csv: file has a header but no data rows");
  }

  ds.x.resize(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < row; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      ds.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          xbuf[i * dim + j];
    }
  }
  return ds;
}

inline CausalDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_csv: cannot open " + path);
  return load_csv(in);
}

}  // namespace rhpt
