#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "rhpt/baselines.hpp"
#include "rhpt/error.hpp"
#include "rhpt/matching.hpp"
#include "rhpt/synthetic.hpp"
#include "rhpt/tessellation.hpp"
#include "rhpt/types.hpp"

namespace rhpt {

// Per-(method, replication) error report.
struct EvaluationReport {
  std::string method_name;
  int replication_id = 0;
  double within_eps_ate = 0.0;
  double within_eps_ite = 0.0;
  double out_eps_ate = 0.0;
  double out_eps_pehe = 0.0;
  double wall_time_seconds = 0.0;
};

struct BalanceDiagnostic {
  std::size_t beta = 0;
  double psi = 0.0;
  int run_id = 0;
};

struct SensitivityResult {
  std::size_t beta = 0;
  std::vector<double> ate_estimates;
  double mean = 0.0;
  double std_dev = 0.0;  // sample standard deviation (n - 1)
  double ci95_low = 0.0;  // normal approximation: mean +/- 1.96 std/sqrt(R)
  double ci95_high = 0.0;
};

namespace detail {

inline void check_pair(std::span<const double> a, std::span<const double> b,
                       const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": length mismatch");
  }
  if (a.empty()) {
    throw std::invalid_argument(std::string(what) + ": empty input");
  }
}

inline double compensated_mean(std::span<const double> v) {
  double sum = 0.0, comp = 0.0;
  for (double x : v) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  return (sum + comp) / static_cast<double>(v.size());
}

}  // namespace detail

// |mean(ite_hat) - mean(ite_true)|.
inline double eps_ate(std::span<const double> ite_hat,
                      std::span<const double> ite_true) {
  detail::check_pair(ite_hat, ite_true, "eps_ate");
  return std::abs(detail::compensated_mean(ite_hat) -
                  detail::compensated_mean(ite_true));
}

// Root mean squared per-unit error.
inline double eps_ite(std::span<const double> ite_hat,
                      std::span<const double> ite_true) {
  detail::check_pair(ite_hat, ite_true, "eps_ite");
  std::vector<double> sq(ite_hat.size());
  for (std::size_t i = 0; i < ite_hat.size(); ++i) {
    const double d = ite_hat[i] - ite_true[i];
    sq[i] = d * d;
  }
  return std::sqrt(detail::compensated_mean(sq));
}

// Same formula as eps_ite; named separately because it applies to inductive
// out-of-sample estimates (precision in estimating heterogeneous effects).
inline double eps_pehe(std::span<const double> ite_hat_out,
                       std::span<const double> ite_true_out) {
  detail::check_pair(ite_hat_out, ite_true_out, "eps_pehe");
  return eps_ite(ite_hat_out, ite_true_out);
}

// Mean absolute gap between true and predicted propensities; the balance
// diagnostic's core, split out so tests can feed stub predictions.
inline double psi_mean_abs(std::span<const double> e_true,
                           std::span<const double> e_hat) {
  detail::check_pair(e_true, e_hat, "psi_mean_abs");
  std::vector<double> gaps(e_true.size());
  for (std::size_t i = 0; i < e_true.size(); ++i) {
    gaps[i] = std::abs(e_true[i] - e_hat[i]);
  }
  return detail::compensated_mean(gaps);
}

// Dense 0/1 feature matrix from packed sketches (one row per sketch).
inline MatrixRM sketch_feature_matrix(std::span<const BinarySketch> sketches) {
  if (sketches.empty()) {
    throw std::invalid_argument("sketch_feature_matrix: no sketches");
  }
  const std::size_t bits = sketches[0].size();
  MatrixRM f(static_cast<Eigen::Index>(sketches.size()),
             static_cast<Eigen::Index>(bits));
  for (std::size_t i = 0; i < sketches.size(); ++i) {
    if (sketches[i].size() != bits) {
      throw std::invalid_argument(
          "sketch_feature_matrix: sketches have mixed lengths");
    }
    for (std::size_t j = 0; j < bits; ++j) {
      f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          sketches[i].bit(j) ? 1.0 : 0.0;
    }
  }
  return f;
}

// How well a logistic model on the sketch bits recovers the true
// propensities: psi = (1/n) sum |e_i - e_hat(sketch_i)|.  Sketch features
// are left unstandardized regardless of hyper.standardize.
inline BalanceDiagnostic balance_psi(std::span<const double> e_true,
                                     std::span<const BinarySketch> sketches,
                                     const TreatmentVector& t,
                                     LogisticOptions hyper = {},
                                     int run_id = 0) {
  if (e_true.size() != sketches.size() || e_true.size() != t.size()) {
    throw std::invalid_argument("balance_psi: length mismatch");
  }
  t.validate();
  hyper.standardize = false;
  const MatrixRM f = sketch_feature_matrix(sketches);
  const LogisticModel model = fit_logistic(f, t, hyper);
  const std::vector<double> e_hat = predict_propensity(model, f);
  BalanceDiagnostic diag;
  diag.beta = sketches[0].size();
  diag.psi = psi_mean_abs(e_true, e_hat);
  diag.run_id = run_id;
  return diag;
}

// One pass of the RHPT ATE pipeline on a within-sample slice: embed with an
// evenly split tessellation (lambda = default_lambda of the slice), match
// in Hamming space, average the transductive ITEs.
inline double rhpt_ate_once(const MatrixRM& x, const TreatmentVector& t,
                            std::span<const double> y, std::size_t beta_total,
                            std::uint64_t tess_seed, unsigned jobs = 1) {
  const TessellationParams params =
      even_split(static_cast<std::size_t>(x.cols()), beta_total,
                 default_lambda(x), tess_seed);
  const RhptEmbedder embedder(params);
  const std::vector<BinarySketch> sketches = embedder.embed_batch(x, jobs);
  const MatchAssignment m =
      match_within(Representations::of_sketches(sketches), t,
                   DistanceSpec{DistanceKind::kHamming, 0}, jobs);
  return ate(transductive_ite(y, t, m));
}

// Tessellation-uncertainty study: the dataset and split stay fixed while
// the tessellation is redrawn R times per beta (run seeds
// mix_seed(mix_seed(base_seed, beta), run)).  Reports the spread of the
// resulting ATE estimates.
inline std::vector<SensitivityResult> sensitivity_study(
    const CausalDataset& ds, const DataSplit& data_split,
    std::span<const std::size_t> beta_list, int runs, std::uint64_t base_seed,
    unsigned jobs = 1) {
  if (runs < 2) {
    throw std::invalid_argument("sensitivity_study: need at least 2 runs");
  }
  if (beta_list.empty()) {
    throw std::invalid_argument("sensitivity_study: beta_list is empty");
  }
  const CausalDataset within = take_rows(ds, data_split.within_idx);

  std::vector<SensitivityResult> results;
  results.reserve(beta_list.size());
  for (const std::size_t beta : beta_list) {
    SensitivityResult res;
    res.beta = beta;
    res.ate_estimates.reserve(static_cast<std::size_t>(runs));
    for (int run = 0; run < runs; ++run) {
      const std::uint64_t seed =
          mix_seed(mix_seed(base_seed, beta), static_cast<std::uint64_t>(run));
      try {
        res.ate_estimates.push_back(
            rhpt_ate_once(within.x, within.t, within.y, beta, seed, jobs));
      } catch (const DegenerateData& e) {
        throw DegenerateData("sensitivity (beta=" + std::to_string(beta) +
                             ", run=" + std::to_string(run) + "): " + e.what());
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(
            "sensitivity (beta=" + std::to_string(beta) +
            ", run=" + std::to_string(run) + "): " + e.what());
      }
    }
    res.mean = detail::compensated_mean(res.ate_estimates);
    double ss = 0.0;
    for (double v : res.ate_estimates) {
      const double d = v - res.mean;
      ss += d * d;
    }
    res.std_dev = std::sqrt(ss / static_cast<double>(runs - 1));
    const double half = 1.96 * res.std_dev / std::sqrt(static_cast<double>(runs));
    res.ci95_low = res.mean - half;
    res.ci95_high = res.mean + half;
    results.push_back(std::move(res));
  }
  return results;
}

// Wall-clock timing of a thunk on the monotonic clock.  Returns
// (result, seconds) — or just seconds for a void thunk.
template <typename F>
auto time_section(std::string_view label, F&& thunk) {
  (void)label;
  const auto start = std::chrono::steady_clock::now();
  if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
    std::forward<F>(thunk)();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  } else {
    auto result = std::forward<F>(thunk)();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    return std::pair{std::move(result), seconds};
  }
}

}  // namespace rhpt
