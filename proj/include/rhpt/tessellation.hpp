#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rhpt/parallel.hpp"
#include "rhpt/random.hpp"
#include "rhpt/sketch.hpp"
#include "rhpt/types.hpp"

namespace rhpt {

// Parameters of a random hyperplane tessellation over R^dim.
//
// The embedding concatenates two blocks of sign bits:
//   * beta_angular hyperplanes through the origin (directions only), whose
//     Hamming distance tracks the angular distance between points;
//   * beta_shifted hyperplanes with offsets drawn uniformly from
//     [-lambda, lambda], whose Hamming distance tracks Euclidean distance
//     for points inside a ball of radius ~lambda.
struct TessellationParams {
  std::size_t dim = 0;
  std::size_t beta_angular = 0;
  std::size_t beta_shifted = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;

  std::size_t beta_total() const { return beta_angular + beta_shifted; }

  // Throws std::invalid_argument naming the offending field.  A lambda is
  // only required when shifted hyperplanes are requested.
  void validate() const {
    if (dim == 0) {
      throw std::invalid_argument("TessellationParams: dim must be positive");
    }
    if (beta_total() == 0) {
      throw std::invalid_argument(
          "TessellationParams: beta_angular + beta_shifted must be positive");
    }
    if (beta_shifted > 0 && !(lambda > 0.0)) {
      throw std::invalid_argument(
          "TessellationParams: lambda must be positive when beta_shifted > 0");
    }
    if (!std::isfinite(lambda)) {
      throw std::invalid_argument("TessellationParams: lambda must be finite");
    }
  }
};

// Splits a total bit budget half/half between the angular and shifted
// blocks, giving the odd bit (if any) to the angular block.
inline TessellationParams even_split(std::size_t dim, std::size_t beta_total,
                                     double lambda, std::uint64_t seed) {
  TessellationParams p;
  p.dim = dim;
  p.beta_shifted = beta_total / 2;
  p.beta_angular = beta_total - p.beta_shifted;
  p.lambda = lambda;
  p.seed = seed;
  return p;
}

// Default shift range: three times the largest row norm, so that every
// pairwise midpoint lies well inside the ball the shifted tessellation
// covers.  Returns 0 for an all-zero matrix; TessellationParams::validate
// rejects that downstream when shifted bits are requested.
inline double default_lambda(const MatrixRM& x) {
  double max_norm = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    max_norm = std::max(max_norm, x.row(i).norm());
  }
  return 3.0 * max_norm;
}

// Exact angular distance (1/pi) * arccos(<x,y> / (|x| |y|)) in [0, 1].
// Throws std::invalid_argument on a zero vector, where the angle is
// undefined.
inline double angular_distance_exact(std::span<const double> x,
                                     std::span<const double> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument(
        "angular_distance_exact: dimension mismatch");
  }
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * y[i];
    nx += x[i] * x[i];
    ny += y[i] * y[i];
  }
  if (nx == 0.0 || ny == 0.0) {
    throw std::invalid_argument(
        "angular_distance_exact: angle undefined for zero vector");
  }
  double c = dot / std::sqrt(nx * ny);
  c = std::min(1.0, std::max(-1.0, c));
  return std::acos(c) / std::numbers::pi;
}

namespace detail {

// Fixed-order dot product: eight independent accumulators over strides of
// eight, tails folded into the first accumulator, summed pairwise.  Both
// embed and embed_batch funnel through this one kernel so that the two
// paths produce bit-identical sketches; the unroll gives the compiler
// enough independent chains to keep FMA units busy without reassociating.
inline double dot_fixed(const double* a, const double* x, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  double s4 = 0.0, s5 = 0.0, s6 = 0.0, s7 = 0.0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 += a[i + 0] * x[i + 0];
    s1 += a[i + 1] * x[i + 1];
    s2 += a[i + 2] * x[i + 2];
    s3 += a[i + 3] * x[i + 3];
    s4 += a[i + 4] * x[i + 4];
    s5 += a[i + 5] * x[i + 5];
    s6 += a[i + 6] * x[i + 6];
    s7 += a[i + 7] * x[i + 7];
  }
  for (; i < n; ++i) s0 += a[i] * x[i];
  return ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
}

}  // namespace detail

// A materialized random hyperplane tessellation.  Rows 0..beta_angular-1 of
// the hyperplane matrix are the angular block, the remaining rows the
// shifted block; all entries are i.i.d. N(0,1).  Shift offsets apply only
// to the shifted block.
//
// Construction draws from a single engine seeded with
// mix_seed(params.seed, 0) in a fixed order: angular rows (row-major), then
// shifted rows (row-major), then raw shift offsets uniform on [-1, 1],
// scaled by lambda.  Two embedders with equal (dim, beta_angular,
// beta_shifted, seed) therefore share hyperplanes even if lambda differs.
class RhptEmbedder {
 public:
  explicit RhptEmbedder(const TessellationParams& params) : params_(params) {
    params_.validate();
    const std::size_t rows = params_.beta_total();
    hyperplanes_.resize(static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(params_.dim));
    auto engine = make_engine(mix_seed(params_.seed, 0));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index r = 0; r < hyperplanes_.rows(); ++r) {
      for (Eigen::Index c = 0; c < hyperplanes_.cols(); ++c) {
        hyperplanes_(r, c) = gauss(engine);
      }
    }
    shifts_.resize(params_.beta_shifted);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (double& s : shifts_) s = params_.lambda * unit(engine);
  }

  const TessellationParams& params() const { return params_; }
  const MatrixRM& hyperplanes() const { return hyperplanes_; }
  const std::vector<double>& shifts() const { return shifts_; }

  // Embeds one point: bit j is 1 iff <a_j, x> + gamma_j >= 0, with
  // gamma_j = 0 on the angular block.  The >= tie rule means the zero
  // vector lands on the positive side of every angular hyperplane.
  BinarySketch embed(std::span<const double> x) const {
    check_dim(x.size());
    BinarySketch sketch(params_.beta_total(), params_.beta_angular);
    embed_into(x.data(), sketch);
    return sketch;
  }

  // Embeds every row of x.  Equivalent to calling embed per row (the same
  // kernel runs in the same order per point); jobs > 1 splits rows across
  // threads without changing any output bit.
  std::vector<BinarySketch> embed_batch(const MatrixRM& x,
                                        unsigned jobs = 1) const {
    check_dim(static_cast<std::size_t>(x.cols()));
    const std::size_t n = static_cast<std::size_t>(x.rows());
    std::vector<BinarySketch> out(
        n, BinarySketch(params_.beta_total(), params_.beta_angular));
    parallel_chunks(n, jobs, [&](std::size_t first, std::size_t last) {
      for (std::size_t i = first; i < last; ++i) {
        embed_into(x.row(static_cast<Eigen::Index>(i)).data(), out[i]);
      }
    });
    return out;
  }

  // Estimated angular distance: Hamming distance over the angular block,
  // divided by beta_angular.
  double angular_estimate(const BinarySketch& a, const BinarySketch& b) const {
    if (params_.beta_angular == 0) {
      throw std::invalid_argument(
          "angular_estimate: tessellation has no angular block");
    }
    const std::size_t d_h = hamming_range(a, b, 0, params_.beta_angular);
    return static_cast<double>(d_h) /
           static_cast<double>(params_.beta_angular);
  }

  // Estimated Euclidean distance: sqrt(2*pi) * lambda / beta_shifted times
  // the Hamming distance over the shifted block.
  double euclidean_estimate(const BinarySketch& a,
                            const BinarySketch& b) const {
    if (params_.beta_shifted == 0) {
      throw std::invalid_argument(
          "euclidean_estimate: tessellation has no shifted block");
    }
    const std::size_t d_h =
        hamming_range(a, b, params_.beta_angular, params_.beta_total());
    return std::sqrt(2.0 * std::numbers::pi) * params_.lambda *
           static_cast<double>(d_h) / static_cast<double>(params_.beta_shifted);
  }

 private:
  void check_dim(std::size_t got) const {
    if (got != params_.dim) {
      throw std::invalid_argument(
          "RhptEmbedder: point has dimension " + std::to_string(got) +
          ", tessellation expects " + std::to_string(params_.dim));
    }
  }

  void embed_into(const double* x, BinarySketch& sketch) const {
    const std::size_t dim = params_.dim;
    const std::size_t beta_a = params_.beta_angular;
    const std::size_t rows = params_.beta_total();
    for (std::size_t j = 0; j < rows; ++j) {
      const double* a = hyperplanes_.row(static_cast<Eigen::Index>(j)).data();
      double z = detail::dot_fixed(a, x, dim);
      if (j >= beta_a) z += shifts_[j - beta_a];
      if (z >= 0.0) sketch.set_bit(j, true);
    }
  }

  TessellationParams params_;
  MatrixRM hyperplanes_;       // beta_total x dim, angular rows first
  std::vector<double> shifts_;  // one offset per shifted row
};

inline RhptEmbedder build_embedder(const TessellationParams& params) {
  return RhptEmbedder(params);
}

}  // namespace rhpt
