#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rhpt/error.hpp"
#include "rhpt/matching.hpp"
#include "rhpt/random.hpp"
#include "rhpt/types.hpp"

namespace rhpt {

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

struct PcaModel {
  Vector mean;            // training column means (dim)
  Vector feature_scale;   // per-column divisor; all ones unless standardized
  MatrixRM components;    // k x dim, orthonormal rows, descending variance
  Vector explained_variance;  // top-k covariance eigenvalues, descending
  std::size_t k = 0;
  // Set when the k-th eigenvalue is numerically zero: the data had rank
  // < k and trailing components span an arbitrary null-space basis.
  bool rank_deficient = false;
};

namespace detail {

// Orients each component so its largest-magnitude entry is positive (first
// such entry on magnitude ties), removing the eigenvector sign ambiguity.
inline void fix_component_signs(MatrixRM& components) {
  for (Eigen::Index r = 0; r < components.rows(); ++r) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index c = 0; c < components.cols(); ++c) {
      const double mag = std::abs(components(r, c));
      if (mag > best) {
        best = mag;
        arg = c;
      }
    }
    if (components(r, arg) < 0.0) components.row(r) = -components.row(r);
  }
}

// Top-k eigenpairs of the sample covariance without forming it, for wide
// data: block orthogonal iteration with QR re-orthonormalization, followed
// by a Rayleigh-Ritz rotation.  Applies Cov = Xc^T Xc / (n-1) as two thin
// products per sweep.
inline void top_eigenpairs_iterative(const MatrixRM& centered, std::size_t k,
                                     MatrixRM& components, Vector& values) {
  constexpr int kMaxIters = 1000;
  constexpr double kTol = 1e-9;
  const Eigen::Index dim = centered.cols();
  const double denom = static_cast<double>(centered.rows() - 1);

  auto engine = make_engine(mix_seed(0x70636121 /* fixed PCA stream */, 0));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd v(dim, static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) v(i, j) = gauss(engine);
  }
  v = Eigen::HouseholderQR<Eigen::MatrixXd>(v).householderQ() *
      Eigen::MatrixXd::Identity(dim, static_cast<Eigen::Index>(k));

  Vector prev = Vector::Zero(static_cast<Eigen::Index>(k));
  for (int iter = 0; iter < kMaxIters; ++iter) {
    Eigen::MatrixXd w = centered.transpose() * (centered * v) / denom;
    Vector rayleigh(static_cast<Eigen::Index>(k));
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      rayleigh(j) = v.col(j).dot(w.col(j));
    }
    v = Eigen::HouseholderQR<Eigen::MatrixXd>(w).householderQ() *
        Eigen::MatrixXd::Identity(dim, static_cast<Eigen::Index>(k));
    const double scale = std::max(1.0, rayleigh.cwiseAbs().maxCoeff());
    if ((rayleigh - prev).cwiseAbs().maxCoeff() <= kTol * scale) {
      prev = rayleigh;
      break;
    }
    prev = rayleigh;
  }

  // Rayleigh-Ritz: diagonalize the k x k restriction so the columns become
  // eigenvector estimates sorted by descending eigenvalue.
  Eigen::MatrixXd cv = centered.transpose() * (centered * v) / denom;
  Eigen::MatrixXd small = v.transpose() * cv;
  small = 0.5 * (small + small.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(small);
  Eigen::MatrixXd rotated = v * es.eigenvectors();

  components.resize(static_cast<Eigen::Index>(k), dim);
  values.resize(static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) {
    const Eigen::Index src = static_cast<Eigen::Index>(k - 1 - j);  // descending
    components.row(static_cast<Eigen::Index>(j)) = rotated.col(src).transpose();
    values(static_cast<Eigen::Index>(j)) = std::max(0.0, es.eigenvalues()(src));
  }
}

}  // namespace detail

// Top-k principal components of X.  Uses a dense eigendecomposition of the
// dim x dim covariance when dim <= 2000 and block orthogonal iteration
// (tolerance 1e-9, at most 1000 sweeps) on wider data.  By default the data
// is centered only; standardize additionally divides each column by its
// standard deviation (columns with ~zero spread are left unscaled), and the
// divisors are stored in the model so projection reuses them.
inline PcaModel fit_pca(const MatrixRM& x, std::size_t k = 5,
                        bool standardize = false) {
  const std::size_t n = static_cast<std::size_t>(x.rows());
  const std::size_t dim = static_cast<std::size_t>(x.cols());
  if (n < 2) {
    throw std::invalid_argument("fit_pca: need at least 2 samples");
  }
  if (k == 0 || k > std::min(n, dim)) {
    throw std::invalid_argument("fit_pca: k must be in [1, min(n, dim)]");
  }

  PcaModel model;
  model.k = k;
  model.mean = x.colwise().mean().transpose();
  model.feature_scale = Vector::Ones(static_cast<Eigen::Index>(dim));
  MatrixRM centered = x.rowwise() - model.mean.transpose();
  if (standardize) {
    for (Eigen::Index j = 0; j < centered.cols(); ++j) {
      const double sd = std::sqrt(centered.col(j).squaredNorm() /
                                  static_cast<double>(n));
      model.feature_scale(j) = sd > 1e-12 ? sd : 1.0;
      centered.col(j) /= model.feature_scale(j);
    }
  }

  if (dim <= 2000) {
    Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    model.components.resize(static_cast<Eigen::Index>(k),
                            static_cast<Eigen::Index>(dim));
    model.explained_variance.resize(static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < k; ++j) {
      const Eigen::Index src = static_cast<Eigen::Index>(dim - 1 - j);
      model.components.row(static_cast<Eigen::Index>(j)) =
          es.eigenvectors().col(src).transpose();
      model.explained_variance(static_cast<Eigen::Index>(j)) =
          std::max(0.0, es.eigenvalues()(src));
    }
  } else {
    detail::top_eigenpairs_iterative(centered, k, model.components,
                                     model.explained_variance);
  }

  detail::fix_component_signs(model.components);
  const double top = std::max(model.explained_variance(0), 1.0);
  model.rank_deficient =
      model.explained_variance(static_cast<Eigen::Index>(k - 1)) <=
      1e-12 * top;
  return model;
}

// Projects rows of X onto the principal subspace:
// ((X - mean) / feature_scale) * components^T.
inline MatrixRM project(const PcaModel& model, const MatrixRM& x) {
  if (x.cols() != model.components.cols()) {
    throw std::invalid_argument(
        "project: input width does not match PCA model");
  }
  MatrixRM centered = x.rowwise() - model.mean.transpose();
  for (Eigen::Index j = 0; j < centered.cols(); ++j) {
    centered.col(j) /= model.feature_scale(j);
  }
  return centered * model.components.transpose();
}

// ---------------------------------------------------------------------------
// Johnson-Lindenstrauss random projection
// ---------------------------------------------------------------------------

// k x dim matrix of i.i.d. N(0, 1/k) entries.  The 1/sqrt(k) scale is folded
// into the matrix so that ||Px - Py|| estimates ||x - y|| directly.
struct JlProjection {
  MatrixRM matrix;
  std::uint64_t seed = 0;
};

inline JlProjection make_jl(std::size_t dim, std::size_t k,
                            std::uint64_t seed) {
  if (dim == 0 || k == 0) {
    throw std::invalid_argument("make_jl: dim and k must be positive");
  }
  JlProjection p;
  p.seed = seed;
  p.matrix.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(dim));
  auto engine = make_engine(mix_seed(seed, 0));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(k));
  for (Eigen::Index r = 0; r < p.matrix.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.matrix.cols(); ++c) {
      p.matrix(r, c) = scale * gauss(engine);
    }
  }
  return p;
}

// Projects rows of X: X * matrix^T (no centering).
inline MatrixRM project(const JlProjection& proj, const MatrixRM& x) {
  if (x.cols() != proj.matrix.cols()) {
    throw std::invalid_argument(
        "project: input width does not match JL projection");
  }
  return x * proj.matrix.transpose();
}

// ---------------------------------------------------------------------------
// Logistic regression (propensity models)
// ---------------------------------------------------------------------------

struct LogisticOptions {
  double learning_rate = 0.1;  // initial step; backtracking halves it
  double l2 = 1e-4;            // ridge strength on weights (not bias)
  int max_epochs = 5000;
  double tol = 1e-6;  // gradient-norm stopping threshold
  // Z-score features using training statistics (stored in the model).
  // Disable for binary sketch features, which are already in {0,1}.
  bool standardize = true;
};

struct LogisticModel {
  Vector weights;       // in standardized feature space when standardize=true
  double bias = 0.0;
  Vector feature_mean;   // identity transform when standardize=false
  Vector feature_scale;
  LogisticOptions hyper;
  bool converged = false;
  double final_grad_norm = 0.0;
  int epochs_run = 0;
  std::vector<double> loss_history;  // loss after each accepted step
};

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Mean negative log-likelihood plus the ridge term, computed in the
// overflow-safe form log(1 + e^{-|z|}) + max(z, 0) - t*z.
inline double logistic_loss(const Eigen::VectorXd& z,
                            const std::vector<int>& t, const Vector& w,
                            double l2) {
  double nll = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double zi = z(i);
    nll += std::log1p(std::exp(-std::abs(zi))) + std::max(zi, 0.0) -
           static_cast<double>(t[static_cast<std::size_t>(i)]) * zi;
  }
  nll /= static_cast<double>(z.size());
  return nll + 0.5 * l2 * w.squaredNorm();
}

}  // namespace detail

// Full-batch gradient descent on the L2-regularized logistic loss with
// backtracking: a step that does not decrease the loss is rejected and the
// step size halved, so the recorded loss history is non-increasing.  After
// an accepted step the step size recovers by 10% up to its initial value.
// Stops when the gradient norm falls below hyper.tol; otherwise runs out of
// epochs and reports converged=false with the final gradient norm (the
// fitted model is still returned and usable).
inline LogisticModel fit_logistic(const MatrixRM& f, const TreatmentVector& t,
                                  const LogisticOptions& hyper = {}) {
  const std::size_t n = static_cast<std::size_t>(f.rows());
  const Eigen::Index p = f.cols();
  if (n < 2) {
    throw std::invalid_argument("fit_logistic: need at least 2 samples");
  }
  if (t.size() != n) {
    throw std::invalid_argument(
        "fit_logistic: feature and label lengths differ");
  }
  t.validate();  // both classes present

  LogisticModel model;
  model.hyper = hyper;
  model.feature_mean = Vector::Zero(p);
  model.feature_scale = Vector::Ones(p);
  if (hyper.standardize) {
    model.feature_mean = f.colwise().mean().transpose();
    for (Eigen::Index j = 0; j < p; ++j) {
      const double var =
          (f.col(j).array() - model.feature_mean(j)).square().sum() /
          static_cast<double>(n);
      const double sd = std::sqrt(var);
      model.feature_scale(j) = sd > 1e-12 ? sd : 1.0;
    }
  }
  MatrixRM fs = f.rowwise() - model.feature_mean.transpose();
  for (Eigen::Index j = 0; j < p; ++j) fs.col(j) /= model.feature_scale(j);

  Vector w = Vector::Zero(p);
  double b = 0.0;
  Eigen::VectorXd target(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    target(static_cast<Eigen::Index>(i)) = static_cast<double>(t.t[i]);
  }

  Eigen::VectorXd z = fs * w;
  z.array() += b;
  double loss = detail::logistic_loss(z, t.t, w, hyper.l2);
  model.loss_history.push_back(loss);

  double lr = hyper.learning_rate;
  double grad_norm = std::numeric_limits<double>::infinity();
  int epoch = 0;
  for (; epoch < hyper.max_epochs; ++epoch) {
    Eigen::VectorXd residual(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < residual.size(); ++i) {
      residual(i) = detail::sigmoid(z(i)) - target(i);
    }
    Vector grad_w =
        fs.transpose() * residual / static_cast<double>(n) + hyper.l2 * w;
    const double grad_b = residual.mean();
    grad_norm = std::sqrt(grad_w.squaredNorm() + grad_b * grad_b);
    if (grad_norm <= hyper.tol) {
      model.converged = true;
      break;
    }

    // Backtracking: halve until the loss stops increasing or the step
    // degenerates.
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving) {
      Vector w_try = w - lr * grad_w;
      const double b_try = b - lr * grad_b;
      Eigen::VectorXd z_try = fs * w_try;
      z_try.array() += b_try;
      const double loss_try = detail::logistic_loss(z_try, t.t, w_try, hyper.l2);
      if (loss_try <= loss) {
        w = std::move(w_try);
        b = b_try;
        z = std::move(z_try);
        loss = loss_try;
        model.loss_history.push_back(loss);
        lr = std::min(hyper.learning_rate, lr * 1.1);
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) break;  // step underflowed; gradient norm reported as-is
  }

  model.weights = std::move(w);
  model.bias = b;
  model.final_grad_norm = grad_norm;
  model.epochs_run = epoch;
  return model;
}

// sigmoid(F*w + b) with the model's stored standardization applied.
// Clamped to [1e-12, 1 - 1e-12] so downstream code can rely on
// probabilities strictly inside (0, 1) even for extreme scores.
inline std::vector<double> predict_propensity(const LogisticModel& model,
                                              const MatrixRM& f) {
  if (f.cols() != model.weights.size()) {
    throw std::invalid_argument(
        "predict_propensity: input width does not match model");
  }
  std::vector<double> out(static_cast<std::size_t>(f.rows()));
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    double z = model.bias;
    for (Eigen::Index j = 0; j < f.cols(); ++j) {
      z += model.weights(j) * (f(i, j) - model.feature_mean(j)) /
           model.feature_scale(j);
    }
    out[static_cast<std::size_t>(i)] =
        std::clamp(detail::sigmoid(z), 1e-12, 1.0 - 1e-12);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random matching
// ---------------------------------------------------------------------------

// Uniform within-sample assignment: match1[i] drawn uniformly from the
// treated indices and match0[i] from the controls, independently across
// units (engine seeds mix_seed(seed, 2i + arm)).  Distances are NaN.
inline MatchAssignment random_match(const TreatmentVector& t,
                                    std::uint64_t seed) {
  const std::vector<double> dummy(t.size(), 0.0);
  return match_within(Representations::of_scalars(dummy), t,
                      DistanceSpec{DistanceKind::kRandom, seed});
}

// ---------------------------------------------------------------------------
// Model serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const PcaModel& m) {
  nlohmann::json j;
  j["type"] = "pca";
  j["version"] = 1;
  j["k"] = m.k;
  j["mean"] = std::vector<double>(m.mean.data(), m.mean.data() + m.mean.size());
  j["feature_scale"] = std::vector<double>(
      m.feature_scale.data(), m.feature_scale.data() + m.feature_scale.size());
  j["explained_variance"] = std::vector<double>(
      m.explained_variance.data(),
      m.explained_variance.data() + m.explained_variance.size());
  j["rank_deficient"] = m.rank_deficient;
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.components.rows(); ++r) {
    rows.push_back(std::vector<double>(
        m.components.row(r).data(),
        m.components.row(r).data() + m.components.cols()));
  }
  j["components"] = std::move(rows);
  return j;
}

inline PcaModel pca_from_json(const nlohmann::json& j) {
  if (j.at("type") != "pca" || j.at("version") != 1) {
    throw IoError("pca_from_json: unsupported document type/version");
  }
  PcaModel m;
  m.k = j.at("k").get<std::size_t>();
  const auto mean = j.at("mean").get<std::vector<double>>();
  m.mean = Eigen::Map<const Vector>(mean.data(),
                                    static_cast<Eigen::Index>(mean.size()));
  const auto scale = j.at("feature_scale").get<std::vector<double>>();
  m.feature_scale = Eigen::Map<const Vector>(
      scale.data(), static_cast<Eigen::Index>(scale.size()));
  const auto ev = j.at("explained_variance").get<std::vector<double>>();
  m.explained_variance =
      Eigen::Map<const Vector>(ev.data(), static_cast<Eigen::Index>(ev.size()));
  m.rank_deficient = j.at("rank_deficient").get<bool>();
  const auto& rows = j.at("components");
  if (rows.empty()) throw IoError("pca_from_json: empty components");
  m.components.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto row = rows[r].get<std::vector<double>>();
    if (row.size() != static_cast<std::size_t>(m.components.cols())) {
      throw IoError("pca_from_json: ragged components");
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      m.components(static_cast<Eigen::Index>(r),
                   static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  return m;
}

inline nlohmann::json to_json(const JlProjection& m) {
  nlohmann::json j;
  j["type"] = "jl";
  j["version"] = 1;
  j["seed"] = m.seed;
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.matrix.rows(); ++r) {
    rows.push_back(std::vector<double>(
        m.matrix.row(r).data(), m.matrix.row(r).data() + m.matrix.cols()));
  }
  j["matrix"] = std::move(rows);
  return j;
}

inline JlProjection jl_from_json(const nlohmann::json& j) {
  if (j.at("type") != "jl" || j.at("version") != 1) {
    throw IoError("jl_from_json: unsupported document type/version");
  }
  JlProjection m;
  m.seed = j.at("seed").get<std::uint64_t>();
  const auto& rows = j.at("matrix");
  if (rows.empty()) throw IoError("jl_from_json: empty matrix");
  m.matrix.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto row = rows[r].get<std::vector<double>>();
    if (row.size() != static_cast<std::size_t>(m.matrix.cols())) {
      throw IoError("jl_from_json: ragged matrix");
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      m.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          row[c];
    }
  }
  return m;
}

inline nlohmann::json to_json(const LogisticModel& m) {
  nlohmann::json j;
  j["type"] = "logistic";
  j["version"] = 1;
  j["weights"] = std::vector<double>(m.weights.data(),
                                     m.weights.data() + m.weights.size());
  j["bias"] = m.bias;
  j["feature_mean"] = std::vector<double>(
      m.feature_mean.data(), m.feature_mean.data() + m.feature_mean.size());
  j["feature_scale"] = std::vector<double>(
      m.feature_scale.data(), m.feature_scale.data() + m.feature_scale.size());
  j["converged"] = m.converged;
  j["final_grad_norm"] = m.final_grad_norm;
  j["epochs_run"] = m.epochs_run;
  return j;
}

inline LogisticModel logistic_from_json(const nlohmann::json& j) {
  if (j.at("type") != "logistic" || j.at("version") != 1) {
    throw IoError("logistic_from_json: unsupported document type/version");
  }
  LogisticModel m;
  const auto w = j.at("weights").get<std::vector<double>>();
  m.weights =
      Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
  m.bias = j.at("bias").get<double>();
  const auto mu = j.at("feature_mean").get<std::vector<double>>();
  m.feature_mean =
      Eigen::Map<const Vector>(mu.data(), static_cast<Eigen::Index>(mu.size()));
  const auto sc = j.at("feature_scale").get<std::vector<double>>();
  m.feature_scale =
      Eigen::Map<const Vector>(sc.data(), static_cast<Eigen::Index>(sc.size()));
  m.converged = j.at("converged").get<bool>();
  m.final_grad_norm = j.at("final_grad_norm").get<double>();
  m.epochs_run = j.at("epochs_run").get<int>();
  return m;
}

}  // namespace rhpt
