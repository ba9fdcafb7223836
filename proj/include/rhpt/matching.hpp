#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rhpt/error.hpp"
#include "rhpt/parallel.hpp"
#include "rhpt/random.hpp"
#include "rhpt/sketch.hpp"
#include "rhpt/tessellation.hpp"
#include "rhpt/types.hpp"

namespace rhpt {

// Binary treatment indicators, one per unit.
struct TreatmentVector {
  std::vector<int> t;

  std::size_t size() const { return t.size(); }

  // Cross-group matching needs a candidate in each arm.
  void validate() const {
    bool has0 = false, has1 = false;
    for (int v : t) {
      if (v == 0) {
        has0 = true;
      } else if (v == 1) {
        has1 = true;
      } else {
        throw std::invalid_argument(
            "TreatmentVector: entries must be 0 or 1, got " +
            std::to_string(v));
      }
    }
    if (!has0 || !has1) {
      throw DegenerateData(
          "TreatmentVector: both treatment arms must be non-empty");
    }
  }
};

enum class DistanceKind {
  kHamming,         // packed sketches
  kEuclidean,       // real vectors, L2
  kAngular,         // real vectors, arccos similarity / pi
  kScalarAbsolute,  // scalars, |a - b|
  kRandom,          // ignores geometry; uniform draw from the group
};

struct DistanceSpec {
  DistanceKind kind = DistanceKind::kHamming;
  std::uint64_t seed = 0;  // consumed only by kRandom
};

inline const char* distance_kind_name(DistanceKind k) {
  switch (k) {
    case DistanceKind::kHamming: return "hamming";
    case DistanceKind::kEuclidean: return "euclidean";
    case DistanceKind::kAngular: return "angular";
    case DistanceKind::kScalarAbsolute: return "scalar-absolute";
    case DistanceKind::kRandom: return "random";
  }
  return "?";
}

// Non-owning view over one of the three representation storages that the
// distance kinds operate on.  The caller keeps the storage alive for the
// lifetime of the view.
class Representations {
 public:
  enum class Kind { kSketches, kVectors, kScalars };

  static Representations of_sketches(std::span<const BinarySketch> s) {
    Representations r;
    r.kind_ = Kind::kSketches;
    r.sketches_ = s;
    r.n_ = s.size();
    return r;
  }
  static Representations of_vectors(const MatrixRM& m) {
    Representations r;
    r.kind_ = Kind::kVectors;
    r.vectors_ = &m;
    r.n_ = static_cast<std::size_t>(m.rows());
    return r;
  }
  static Representations of_scalars(std::span<const double> v) {
    Representations r;
    r.kind_ = Kind::kScalars;
    r.scalars_ = v;
    r.n_ = v.size();
    return r;
  }

  std::size_t size() const { return n_; }
  bool has_sketches() const { return kind_ == Kind::kSketches; }
  bool has_vectors() const { return kind_ == Kind::kVectors; }
  bool has_scalars() const { return kind_ == Kind::kScalars; }

  std::span<const BinarySketch> sketches() const { return sketches_; }
  const MatrixRM& vectors() const { return *vectors_; }
  std::span<const double> scalars() const { return scalars_; }

 private:
  Kind kind_ = Kind::kScalars;
  std::span<const BinarySketch> sketches_;
  const MatrixRM* vectors_ = nullptr;
  std::span<const double> scalars_;
  std::size_t n_ = 0;
};

// 1-NN assignment for n query units against a pool of pool_size units:
// match0[i]/match1[i] index the nearest control/treated pool element, with
// replacement (indices may repeat).  dist0/dist1 record the distance to the
// chosen match (NaN under random matching, where no metric exists).
struct MatchAssignment {
  std::vector<std::size_t> match0;
  std::vector<std::size_t> match1;
  std::vector<double> dist0;
  std::vector<double> dist1;
  std::size_t pool_size = 0;

  std::size_t size() const { return match0.size(); }
};

namespace detail {

// XOR-popcount that may stop early once the running count exceeds `bound`
// (the return value is then only guaranteed to be > bound).
inline std::size_t hamming_bounded(const BinarySketch& a,
                                   const BinarySketch& b, std::size_t bound) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("hamming: sketch lengths differ");
  }
  const std::uint64_t* wa = a.word_data();
  const std::uint64_t* wb = b.word_data();
  const std::size_t n_words = a.words().size();
  std::size_t acc = 0;
  std::size_t i = 0;
  while (i < n_words) {
    const std::size_t stop = std::min(n_words, i + 16);
    for (; i < stop; ++i) {
      acc += static_cast<std::size_t>(std::popcount(wa[i] ^ wb[i]));
    }
    if (acc > bound) return acc;
  }
  return acc;
}

// Plain single-accumulator kernels.  Matching compares these values with
// operator< and breaks ties by smallest index; keeping the summation order
// fixed and unfancy makes the scan reproducible against a naive oracle.
inline double euclidean_pair(const double* a, const double* b,
                             std::size_t dim) {
  double acc = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace detail

// Distance between element i of `a` and element j of `b` under `kind`.
// This is the exact quantity matching compares, exposed so that oracle
// scans in tests share it.  kRandom has no distance and throws.
inline double representation_distance(const Representations& a, std::size_t i,
                                      const Representations& b, std::size_t j,
                                      DistanceKind kind) {
  switch (kind) {
    case DistanceKind::kHamming:
      if (!a.has_sketches() || !b.has_sketches()) {
        throw std::invalid_argument(
            "representation_distance: hamming requires sketches");
      }
      return static_cast<double>(hamming(a.sketches()[i], b.sketches()[j]));
    case DistanceKind::kEuclidean: {
      if (!a.has_vectors() || !b.has_vectors()) {
        throw std::invalid_argument(
            "representation_distance: euclidean requires real vectors");
      }
      const MatrixRM& ma = a.vectors();
      const MatrixRM& mb = b.vectors();
      if (ma.cols() != mb.cols()) {
        throw std::invalid_argument(
            "representation_distance: vector widths differ");
      }
      return detail::euclidean_pair(ma.row(static_cast<Eigen::Index>(i)).data(),
                                    mb.row(static_cast<Eigen::Index>(j)).data(),
                                    static_cast<std::size_t>(ma.cols()));
    }
    case DistanceKind::kAngular: {
      if (!a.has_vectors() || !b.has_vectors()) {
        throw std::invalid_argument(
            "representation_distance: angular requires real vectors");
      }
      const MatrixRM& ma = a.vectors();
      const MatrixRM& mb = b.vectors();
      if (ma.cols() != mb.cols()) {
        throw std::invalid_argument(
            "representation_distance: vector widths differ");
      }
      const auto ra = ma.row(static_cast<Eigen::Index>(i));
      const auto rb = mb.row(static_cast<Eigen::Index>(j));
      return angular_distance_exact(
          std::span<const double>(ra.data(), static_cast<std::size_t>(ma.cols())),
          std::span<const double>(rb.data(), static_cast<std::size_t>(mb.cols())));
    }
    case DistanceKind::kScalarAbsolute:
      if (!a.has_scalars() || !b.has_scalars()) {
        throw std::invalid_argument(
            "representation_distance: scalar-absolute requires scalars");
      }
      return std::abs(a.scalars()[i] - b.scalars()[j]);
    case DistanceKind::kRandom:
      throw std::invalid_argument(
          "representation_distance: random matching has no distance");
  }
  throw std::invalid_argument("representation_distance: unknown kind");
}

namespace detail {

constexpr std::size_t kNoExclude = std::numeric_limits<std::size_t>::max();

// Exhaustive argmin over the masked pool, smallest index on ties.
// `out_dist` receives the winning distance.
inline std::size_t scan_nearest(const Representations& queries, std::size_t q,
                                const Representations& pool,
                                std::span<const std::uint8_t> mask,
                                DistanceKind kind, std::size_t exclude,
                                double& out_dist) {
  const std::size_t n = pool.size();
  std::size_t best = kNoExclude;
  double best_d = std::numeric_limits<double>::infinity();

  if (kind == DistanceKind::kHamming) {
    // Fast path: integer distances allow abandoning a candidate as soon as
    // its partial count exceeds the incumbent.  Equality never displaces
    // the incumbent, so the ascending scan keeps the smallest index.
    const auto qs = queries.sketches()[q];
    std::size_t best_h = std::numeric_limits<std::size_t>::max();
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask[j] || j == exclude) continue;
      if (best == kNoExclude) {
        best = j;
        best_h = hamming(qs, pool.sketches()[j]);
        continue;
      }
      const std::size_t h =
          hamming_bounded(qs, pool.sketches()[j], best_h - 1);
      if (h < best_h) {
        best_h = h;
        best = j;
      }
      if (best_h == 0) break;  // cannot improve; smaller index already won
    }
    out_dist = (best == kNoExclude)
                   ? std::numeric_limits<double>::quiet_NaN()
                   : static_cast<double>(best_h);
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask[j] || j == exclude) continue;
      const double d = representation_distance(queries, q, pool, j, kind);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    out_dist = best_d;
  }

  if (best == kNoExclude) {
    throw DegenerateData("nearest_in_group: masked group is empty");
  }
  return best;
}

// Uniform draw from the masked pool (minus `exclude`).  The engine seed is
// derived by the caller; the draw itself walks the mask in index order so
// the mapping from random value to index is stable.
inline std::size_t draw_uniform(const Representations& pool,
                                std::span<const std::uint8_t> mask,
                                std::size_t exclude, std::uint64_t seed,
                                double& out_dist) {
  std::size_t count = 0;
  for (std::size_t j = 0; j < pool.size(); ++j) {
    if (mask[j] && j != exclude) ++count;
  }
  if (count == 0) {
    throw DegenerateData("nearest_in_group: masked group is empty");
  }
  auto engine = make_engine(seed);
  std::uniform_int_distribution<std::size_t> pick(0, count - 1);
  std::size_t target = pick(engine);
  for (std::size_t j = 0; j < pool.size(); ++j) {
    if (!mask[j] || j == exclude) continue;
    if (target == 0) {
      out_dist = std::numeric_limits<double>::quiet_NaN();
      return j;
    }
    --target;
  }
  throw std::logic_error("draw_uniform: unreachable");
}

}  // namespace detail

// Index of the pool element nearest to query q within the masked group,
// ties broken by smallest index.  For DistanceKind::kRandom the result is
// instead a uniform draw from the masked group seeded by dist.seed.  The
// group never includes `exclude` (pass the query's own pool index for
// same-group searches; defaults to "exclude nothing").
inline std::size_t nearest_in_group(
    const Representations& queries, std::size_t q, const Representations& pool,
    std::span<const std::uint8_t> group_mask, const DistanceSpec& dist,
    std::size_t exclude = detail::kNoExclude,
    double* out_dist = nullptr) {
  if (group_mask.size() != pool.size()) {
    throw std::invalid_argument(
        "nearest_in_group: mask length does not match pool size");
  }
  double d = 0.0;
  std::size_t idx =
      dist.kind == DistanceKind::kRandom
          ? detail::draw_uniform(pool, group_mask, exclude, dist.seed, d)
          : detail::scan_nearest(queries, q, pool, group_mask, dist.kind,
                                 exclude, d);
  if (out_dist) *out_dist = d;
  return idx;
}

namespace detail {

// Shared by match_within and match_out_of_sample.  self_indexed marks that
// query i is pool element i, enabling same-group self-exclusion under the
// nearest-neighbor kinds.  Random matching draws from the full group: it is
// not a nearest-neighbor rule, and the estimators only consume the
// opposite-arm match, which can never be the unit itself.
//
// Random draws use engine seeds mix_seed(dist.seed, 2*i + arm) so that the
// assignment is a pure function of (inputs, seed) no matter how the loop is
// chunked across threads.
inline MatchAssignment match_impl(const Representations& queries,
                                  const Representations& pool,
                                  const TreatmentVector& pool_t,
                                  const DistanceSpec& dist, bool self_indexed,
                                  unsigned jobs) {
  if (pool_t.size() != pool.size()) {
    throw std::invalid_argument(
        "matching: treatment length does not match pool size");
  }
  pool_t.validate();

  const std::size_t n_pool = pool.size();
  std::vector<std::uint8_t> mask0(n_pool), mask1(n_pool);
  std::size_t count0 = 0, count1 = 0;
  for (std::size_t j = 0; j < n_pool; ++j) {
    mask0[j] = pool_t.t[j] == 0;
    mask1[j] = pool_t.t[j] == 1;
    count0 += mask0[j];
    count1 += mask1[j];
  }

  const std::size_t n = queries.size();
  MatchAssignment m;
  m.match0.resize(n);
  m.match1.resize(n);
  m.dist0.resize(n);
  m.dist1.resize(n);
  m.pool_size = n_pool;

  // Same-group nearest neighbor excludes the query itself — unless the
  // query is its group's only member, in which case the group invariant
  // (t[match0[i]] = 0, t[match1[i]] = 1) leaves self-match at distance
  // zero as the only assignment.  Estimators never read that entry: they
  // consume only the opposite-group match.
  auto scan_arm = [&](std::size_t i, std::span<const std::uint8_t> mask,
                      std::size_t group_count, std::size_t self,
                      double& out_dist) -> std::size_t {
    if (self != kNoExclude && mask[self] && group_count == 1) {
      out_dist = 0.0;
      return self;
    }
    return scan_nearest(queries, i, pool, mask, dist.kind, self, out_dist);
  };

  parallel_chunks(n, jobs, [&](std::size_t first, std::size_t last) {
    for (std::size_t i = first; i < last; ++i) {
      const std::size_t self = self_indexed ? i : kNoExclude;
      if (dist.kind == DistanceKind::kRandom) {
        m.match0[i] = draw_uniform(pool, mask0, kNoExclude,
                                   mix_seed(dist.seed, 2 * i + 0), m.dist0[i]);
        m.match1[i] = draw_uniform(pool, mask1, kNoExclude,
                                   mix_seed(dist.seed, 2 * i + 1), m.dist1[i]);
      } else {
        m.match0[i] = scan_arm(i, mask0, count0, self, m.dist0[i]);
        m.match1[i] = scan_arm(i, mask1, count1, self, m.dist1[i]);
      }
    }
  });
  return m;
}

}  // namespace detail

// Within-sample matching: every unit is both query and pool member.  The
// same-group nearest neighbor excludes the unit itself; the opposite-group
// match — the only one the estimators use — cannot be the unit anyway.
inline MatchAssignment match_within(const Representations& reps,
                                    const TreatmentVector& t,
                                    const DistanceSpec& dist,
                                    unsigned jobs = 1) {
  if (reps.size() != t.size()) {
    throw std::invalid_argument(
        "match_within: representation and treatment lengths differ");
  }
  return detail::match_impl(reps, reps, t, dist, /*self_indexed=*/true, jobs);
}

// Out-of-sample matching: queries are matched into the within-sample pool
// only; a query is never a pool member, so no exclusion applies.
inline MatchAssignment match_out_of_sample(const Representations& queries,
                                           const Representations& pool,
                                           const TreatmentVector& pool_t,
                                           const DistanceSpec& dist,
                                           unsigned jobs = 1) {
  return detail::match_impl(queries, pool, pool_t, dist,
                            /*self_indexed=*/false, jobs);
}

// Transductive ITE: the unit's own factual outcome plus a matched
// counterfactual.  Element i is y_i - y[match0[i]] for treated units and
// y[match1[i]] - y_i for controls.
inline std::vector<double> transductive_ite(std::span<const double> y,
                                            const TreatmentVector& t,
                                            const MatchAssignment& m) {
  if (y.size() != t.size() || y.size() != m.size()) {
    throw std::invalid_argument("transductive_ite: length mismatch");
  }
  std::vector<double> ite(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    ite[i] = t.t[i] == 1 ? y[i] - y[m.match0[i]] : y[m.match1[i]] - y[i];
  }
  return ite;
}

// Inductive ITE: both potential outcomes imputed from pool matches,
// y_pool[match1[i]] - y_pool[match0[i]].
inline std::vector<double> inductive_ite(std::span<const double> y_pool,
                                         const MatchAssignment& m) {
  std::vector<double> ite(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.match0[i] >= y_pool.size() || m.match1[i] >= y_pool.size()) {
      throw std::out_of_range("inductive_ite: match index exceeds pool");
    }
    ite[i] = y_pool[m.match1[i]] - y_pool[m.match0[i]];
  }
  return ite;
}

// Arithmetic mean of the ITE vector.  Neumaier-compensated so the result is
// stable against cancellation on long vectors.
inline double ate(std::span<const double> ite) {
  if (ite.empty()) {
    throw std::invalid_argument("ate: empty input");
  }
  double sum = 0.0, comp = 0.0;
  for (double v : ite) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }
  return (sum + comp) / static_cast<double>(ite.size());
}

// CSV serialization: one row per query with the chosen matches and their
// distances (17 significant digits; NaN under random matching).
inline void write_matches_csv(std::ostream& out, const MatchAssignment& m) {
  out << "i,match0,match1,dist0,dist1\n";
  char buf0[64], buf1[64];
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::snprintf(buf0, sizeof buf0, "%.17g", m.dist0[i]);
    std::snprintf(buf1, sizeof buf1, "%.17g", m.dist1[i]);
    out << i << ',' << m.match0[i] << ',' << m.match1[i] << ',' << buf0 << ','
        << buf1 << '\n';
  }
}

}  // namespace rhpt
