#include "rhpt/synthetic.hpp"

#include <gtest/gtest.h>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rhpt/error.hpp"
#include "rhpt/random.hpp"
#include "rhpt/types.hpp"

namespace rhpt {
namespace {

template <typename Exc, typename Fn>
void expect_throw_containing(Fn&& fn, const std::string& fragment) {
  try {
    fn();
    FAIL() << "expected an exception mentioning '" << fragment << "'";
  } catch (const Exc& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos)
        << "actual message: " << e.what();
  }
}

// Bitwise equality of every stored field.  vector<double> comparison is
// exact, which is the point: generation and CSV round-trips both promise
// reproducible bytes, not approximate values.
void expect_datasets_identical(const CausalDataset& a, const CausalDataset& b) {
  ASSERT_EQ(a.size(), b.size());
  ASSERT_EQ(a.x.cols(), b.x.cols());
  EXPECT_TRUE((a.x.array() == b.x.array()).all());
  EXPECT_EQ(a.t.t, b.t.t);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.has_ground_truth, b.has_ground_truth);
  EXPECT_EQ(a.mu0, b.mu0);
  EXPECT_EQ(a.mu1, b.mu1);
  EXPECT_EQ(a.e_true, b.e_true);
  EXPECT_EQ(a.ite_true, b.ite_true);
}

DgpConfig small_config() {
  DgpConfig c;
  c.n = 80;
  c.dim = 12;
  c.latent_dim = 4;
  c.seed = 7;
  return c;
}

TEST(DgpConfig, DefaultsAreValid) {
  DgpConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.n, 3000u);
  EXPECT_EQ(c.dim, 300u);
  EXPECT_EQ(c.latent_dim, 8u);
  EXPECT_DOUBLE_EQ(c.propensity_sharpness, 2.0);
  EXPECT_DOUBLE_EQ(c.positivity_clip, 0.05);
  EXPECT_DOUBLE_EQ(c.outcome_noise_sd, 1.0);
  EXPECT_DOUBLE_EQ(c.effect_scale, 1.0);
  EXPECT_DOUBLE_EQ(c.hidden_confounding, 1.0);
}

TEST(DgpConfig, ValidationNamesTheOffendingField) {
  const double inf = std::numeric_limits<double>::infinity();

  DgpConfig c = small_config();
  c.n = 1;
  expect_throw_containing<std::invalid_argument>([&] { c.validate(); }, "n");

  c = small_config();
  c.dim = 0;
  expect_throw_containing<std::invalid_argument>([&] { c.validate(); }, "dim");

  c = small_config();
  c.latent_dim = 0;
  expect_throw_containing<std::invalid_argument>([&] { c.validate(); },
                                                 "latent_dim");
  c.latent_dim = c.dim + 1;
  expect_throw_containing<std::invalid_argument>([&] { c.validate(); },
                                                 "latent_dim");

  c = small_config();
  c.propensity_sharpness = 0.0;
  expect_throw_containing<std::invalid_argument>([&] { c.validate(); },
                                                 "propensity_sharpness");
  c.propensity_sharpness = inf;
  expect_throw_containing<std::invalid_argument>([&] { c.validate(); },
                                                 "propensity_sharpness");

  c = small_config();
  c.positivity_clip = 0.0;
  expect_throw_containing<std::invalid_argument>([&] { c.validate(); },
                                                 "positivity_clip");
  c.positivity_clip = 0.5;
  expect_throw_containing<std::invalid_argument>([&] { c.validate(); },
                                                 "positivity_clip");

  c = small_config();
  c.outcome_noise_sd = -1.0;
  expect_throw_containing<std::invalid_argument>([&] { c.validate(); },
                                                 "outcome_noise_sd");

  c = small_config();
  c.effect_scale = inf;
  expect_throw_containing<std::invalid_argument>([&] { c.validate(); },
                                                 "effect_scale");

  c = small_config();
  c.hidden_confounding = 0.99;
  expect_throw_containing<std::invalid_argument>([&] { c.validate(); },
                                                 "hidden_confounding");

  // generate() runs the same validation up front.
  c = small_config();
  c.n = 1;
  EXPECT_THROW(generate(c), std::invalid_argument);
}

TEST(Generate, ShapesAndGroundTruthFlag) {
  DgpConfig c = small_config();
  const CausalDataset ds = generate(c);
  EXPECT_EQ(ds.size(), c.n);
  EXPECT_EQ(static_cast<std::size_t>(ds.x.cols()), c.dim);
  EXPECT_EQ(ds.t.t.size(), c.n);
  EXPECT_EQ(ds.y.size(), c.n);
  EXPECT_EQ(ds.mu0.size(), c.n);
  EXPECT_EQ(ds.mu1.size(), c.n);
  EXPECT_EQ(ds.e_true.size(), c.n);
  EXPECT_EQ(ds.ite_true.size(), c.n);
  EXPECT_TRUE(ds.has_ground_truth);
  for (int ti : ds.t.t) EXPECT_TRUE(ti == 0 || ti == 1);

  // The smallest legal configuration still works.
  DgpConfig tiny;
  tiny.n = 2;
  tiny.dim = 1;
  tiny.latent_dim = 1;
  tiny.seed = 3;
  const CausalDataset mini = generate(tiny);
  EXPECT_EQ(mini.size(), 2u);
}

TEST(Generate, ZeroNoiseMakesOutcomesEqualPotentials) {
  DgpConfig c = small_config();
  c.n = 400;
  c.outcome_noise_sd = 0.0;
  const CausalDataset ds = generate(c);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double mu = ds.t.t[i] == 1 ? ds.mu1[i] : ds.mu0[i];
    EXPECT_EQ(ds.y[i], mu) << "unit " << i;
  }

  // With sigma > 0 the factual outcome is almost surely off the surface.
  c.outcome_noise_sd = 1.0;
  const CausalDataset noisy = generate(c);
  std::size_t moved = 0;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    const double mu = noisy.t.t[i] == 1 ? noisy.mu1[i] : noisy.mu0[i];
    if (noisy.y[i] != mu) ++moved;
  }
  EXPECT_EQ(moved, noisy.size());
}

TEST(Generate, ZeroEffectScaleGivesIdenticallyZeroIte) {
  DgpConfig c = small_config();
  c.n = 300;
  c.effect_scale = 0.0;
  const CausalDataset ds = generate(c);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(ds.ite_true[i], 0.0);
    EXPECT_EQ(ds.mu0[i], ds.mu1[i]);
  }
}

TEST(Generate, IteIsMu1MinusMu0AndBoundedByEffectScale) {
  DgpConfig c = small_config();
  c.n = 500;
  const CausalDataset ds = generate(c);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(ds.ite_true[i], ds.mu1[i] - ds.mu0[i]);
    // effect = s * (1 + q^2 / L) with q real, so |ite| >= |s| and the
    // sign of every ite matches the sign of the scale.
    EXPECT_GE(ds.ite_true[i], c.effect_scale);
  }

  c.effect_scale = -0.5;
  const CausalDataset neg = generate(c);
  for (std::size_t i = 0; i < neg.size(); ++i) {
    EXPECT_LE(neg.ite_true[i], -0.5);
  }
}

TEST(Generate, PropensitiesRespectThePositivityClip) {
  struct Case {
    double sharpness;
    double clip;
    std::size_t latent;
  };
  const Case cases[] = {{2.0, 0.05, 8}, {50.0, 0.2, 2}, {1.0, 0.01, 4}};
  for (const Case& k : cases) {
    DgpConfig c = small_config();
    c.n = 500;
    c.propensity_sharpness = k.sharpness;
    c.positivity_clip = k.clip;
    c.latent_dim = k.latent;
    const CausalDataset ds = generate(c);
    for (double e : ds.e_true) {
      EXPECT_GE(e, k.clip);
      EXPECT_LE(e, 1.0 - k.clip);
    }
  }

  // A very sharp propensity saturates: the clip is attained exactly on
  // both sides, not merely approached.
  DgpConfig sharp = small_config();
  sharp.n = 500;
  sharp.propensity_sharpness = 50.0;
  sharp.positivity_clip = 0.2;
  sharp.latent_dim = 2;
  const CausalDataset ds = generate(sharp);
  const auto [lo, hi] = std::minmax_element(ds.e_true.begin(), ds.e_true.end());
  EXPECT_DOUBLE_EQ(*lo, 0.2);
  EXPECT_DOUBLE_EQ(*hi, 0.8);
}

TEST(Generate, DeterministicInSeedAndSensitiveToIt) {
  DgpConfig c = small_config();
  const CausalDataset a = generate(c);
  const CausalDataset b = generate(c);
  expect_datasets_identical(a, b);

  c.seed += 1;
  const CausalDataset other = generate(c);
  EXPECT_FALSE((a.x.array() == other.x.array()).all());
  EXPECT_NE(a.y, other.y);
}

TEST(Generate, HiddenConfoundingShiftsPropensityButNeverCovariates) {
  DgpConfig base = small_config();
  base.n = 200;
  DgpConfig confounded = base;
  confounded.hidden_confounding = 3.0;

  const CausalDataset a = generate(base);
  const CausalDataset b = generate(confounded);

  // The hidden driver u enters e and mu but is never expressed in X, so
  // the covariate matrix is bit-identical across the two settings.
  EXPECT_TRUE((a.x.array() == b.x.array()).all());

  std::size_t e_changed = 0;
  std::size_t mu_changed = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.e_true[i] != b.e_true[i]) ++e_changed;
    if (a.mu0[i] != b.mu0[i]) ++mu_changed;
  }
  // u_i = 0 has probability zero; every unit's propensity and baseline
  // outcome move once hc > 1 (up to clip saturation on e).
  EXPECT_GT(e_changed, a.size() / 2);
  EXPECT_EQ(mu_changed, a.size());
}

TEST(Generate, TreatmentTracksThePropensity) {
  DgpConfig c;
  c.n = 6000;
  c.dim = 20;
  c.latent_dim = 8;
  c.seed = 11;
  const CausalDataset ds = generate(c);

  double mean_t = 0.0;
  for (int ti : ds.t.t) mean_t += ti;
  mean_t /= static_cast<double>(ds.size());
  EXPECT_GT(mean_t, 0.35);
  EXPECT_LT(mean_t, 0.65);

  double e_treated = 0.0, e_control = 0.0;
  std::size_t n1 = 0, n0 = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.t.t[i] == 1) {
      e_treated += ds.e_true[i];
      ++n1;
    } else {
      e_control += ds.e_true[i];
      ++n0;
    }
  }
  ASSERT_GT(n1, 0u);
  ASSERT_GT(n0, 0u);
  // Units that ended up treated must, on average, have had a visibly
  // higher treatment probability.
  EXPECT_GT(e_treated / n1, e_control / n0 + 0.05);
}

TEST(Generate, CovariatesHaveLowIntrinsicDimension) {
  DgpConfig c;
  c.n = 300;
  c.dim = 40;
  c.latent_dim = 4;
  c.seed = 5;
  const CausalDataset ds = generate(c);

  MatrixRM centered = ds.x;
  const Vector mean = centered.colwise().mean();
  centered.rowwise() -= mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered);
  const auto& sv = svd.singularValues();
  ASSERT_GE(sv.size(), 5);
  // Four factor directions carry the signal; everything after them is the
  // 0.1-scale isotropic residual, an order of magnitude smaller.
  EXPECT_LT(sv(4), 0.1 * sv(3));
}

// Monte Carlo check of the effect term.  Conditional on the weight draw,
// <w_tau, z> ~ N(0, ||w_tau||^2), so E[ite] = s * (1 + ||w_tau||^2 / L).
// The weight vectors are documented as substream 2 of the seed, drawn as
// w_e, w_y, w_s, w_tau back to back, which lets the test recover w_tau
// without touching the generator internals.
TEST(Generate, SampleMeanOfIteMatchesAnalyticValue) {
  for (std::uint64_t seed : {11u, 12u, 13u, 14u, 15u}) {
    DgpConfig c;
    c.n = 100000;
    c.dim = 10;  // dim * latent_dim kept even: substream draws stay aligned
    c.latent_dim = 8;
    c.seed = seed;
    const CausalDataset ds = generate(c);

    auto engine = make_engine(mix_seed(c.seed, 2));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < 3 * c.latent_dim; ++i) gauss(engine);
    double w_tau_sq = 0.0;
    for (std::size_t i = 0; i < c.latent_dim; ++i) {
      const double w = gauss(engine);
      w_tau_sq += w * w;
    }
    const double analytic =
        c.effect_scale * (1.0 + w_tau_sq / static_cast<double>(c.latent_dim));

    double mean = 0.0;
    for (double v : ds.ite_true) mean += v;
    mean /= static_cast<double>(ds.size());
    double var = 0.0;
    for (double v : ds.ite_true) var += (v - mean) * (v - mean);
    var /= static_cast<double>(ds.size() - 1);
    const double half_width =
        2.0 * std::sqrt(var / static_cast<double>(ds.size()));

    EXPECT_NEAR(mean, analytic, half_width) << "seed " << seed;
  }
}

// Smoothness of e as a function of x: over pairs closer than a tenth of
// the median pairwise distance, the difference quotient |e_i - e_j| /
// ||x_i - x_j|| stays below a small constant, seed after seed.
TEST(Generate, PropensityIsLipschitzOnClosePairs) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    DgpConfig c;
    c.n = 500;
    c.dim = 20;
    c.latent_dim = 2;
    c.seed = seed;
    const CausalDataset ds = generate(c);
    const std::size_t n = ds.size();

    std::vector<double> dists;
    dists.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        dists.push_back((ds.x.row(static_cast<Eigen::Index>(i)) -
                         ds.x.row(static_cast<Eigen::Index>(j)))
                            .norm());
      }
    }
    std::vector<double> sorted = dists;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                     sorted.end());
    const double median = sorted[sorted.size() / 2];
    const double close = 0.1 * median;

    std::size_t close_pairs = 0;
    double worst_ratio = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j, ++k) {
        if (dists[k] > close || dists[k] == 0.0) continue;
        ++close_pairs;
        worst_ratio = std::max(
            worst_ratio, std::abs(ds.e_true[i] - ds.e_true[j]) / dists[k]);
      }
    }
    ASSERT_GT(close_pairs, 20u) << "seed " << seed;
    EXPECT_LT(worst_ratio, 1.5) << "seed " << seed;
  }
}

TEST(Split, TenPercentSortedDisjointExhaustive) {
  DgpConfig c = small_config();
  c.n = 100;
  const CausalDataset ds = generate(c);

  const DataSplit s = split(ds, 0.1, 21);
  EXPECT_EQ(s.out_idx.size(), 10u);
  EXPECT_EQ(s.within_idx.size(), 90u);
  EXPECT_TRUE(std::is_sorted(s.out_idx.begin(), s.out_idx.end()));
  EXPECT_TRUE(std::is_sorted(s.within_idx.begin(), s.within_idx.end()));

  std::vector<std::uint8_t> seen(ds.size(), 0);
  for (std::size_t i : s.out_idx) seen[i] += 1;
  for (std::size_t i : s.within_idx) seen[i] += 1;
  for (std::size_t i = 0; i < seen.size(); ++i) {
    EXPECT_EQ(seen[i], 1) << "index " << i;
  }

  // The two-argument overload is the 10% default.
  const DataSplit d = split(ds, 21);
  EXPECT_EQ(d.out_idx, s.out_idx);
  EXPECT_EQ(d.within_idx, s.within_idx);
}

TEST(Split, RoundingAndDegenerateCases) {
  DgpConfig c = small_config();
  c.n = 10;
  const CausalDataset ten = generate(c);
  const DataSplit s10 = split(ten, 0.1, 4);
  EXPECT_EQ(s10.out_idx.size(), 1u);
  EXPECT_EQ(s10.within_idx.size(), 9u);

  c.n = 15;
  const CausalDataset fifteen = generate(c);
  // round(1.5) rounds half away from zero.
  EXPECT_EQ(split(fifteen, 0.1, 4).out_idx.size(), 2u);

  c.n = 9;
  const CausalDataset nine = generate(c);
  EXPECT_THROW(split(nine, 0.1, 4), DegenerateData);

  expect_throw_containing<std::invalid_argument>(
      [&] { split(ten, 0.0, 4); }, "out_fraction");
  expect_throw_containing<std::invalid_argument>(
      [&] { split(ten, 1.0, 4); }, "out_fraction");
  expect_throw_containing<std::invalid_argument>(
      [&] { split(ten, -0.2, 4); }, "out_fraction");

  // Fractions that round to an empty part are rejected even when legal.
  EXPECT_THROW(split(ten, 0.04, 4), DegenerateData);
  EXPECT_THROW(split(ten, 0.96, 4), DegenerateData);
}

TEST(Split, DeterministicGivenSeed) {
  DgpConfig c = small_config();
  c.n = 100;
  const CausalDataset ds = generate(c);
  const DataSplit a = split(ds, 0.1, 77);
  const DataSplit b = split(ds, 0.1, 77);
  EXPECT_EQ(a.out_idx, b.out_idx);
  EXPECT_EQ(a.within_idx, b.within_idx);

  const DataSplit other = split(ds, 0.1, 78);
  EXPECT_NE(a.out_idx, other.out_idx);
}

TEST(TakeRows, CopiesSelectedRowsWithGroundTruth) {
  DgpConfig c = small_config();
  c.n = 30;
  const CausalDataset ds = generate(c);
  const std::vector<std::size_t> idx = {5, 0, 17, 17, 2};
  const CausalDataset sub = take_rows(ds, idx);

  ASSERT_EQ(sub.size(), idx.size());
  EXPECT_TRUE(sub.has_ground_truth);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto src = static_cast<Eigen::Index>(idx[i]);
    EXPECT_TRUE((sub.x.row(static_cast<Eigen::Index>(i)).array() ==
                 ds.x.row(src).array())
                    .all());
    EXPECT_EQ(sub.t.t[i], ds.t.t[idx[i]]);
    EXPECT_EQ(sub.y[i], ds.y[idx[i]]);
    EXPECT_EQ(sub.mu0[i], ds.mu0[idx[i]]);
    EXPECT_EQ(sub.mu1[i], ds.mu1[idx[i]]);
    EXPECT_EQ(sub.e_true[i], ds.e_true[idx[i]]);
    EXPECT_EQ(sub.ite_true[i], ds.ite_true[idx[i]]);
  }

  const std::vector<std::size_t> bad = {0, 30};
  EXPECT_THROW(take_rows(ds, bad), std::out_of_range);
}

TEST(TakeRows, RespectsMissingGroundTruth) {
  DgpConfig c = small_config();
  c.n = 20;
  CausalDataset ds = generate(c);
  ds.has_ground_truth = false;
  ds.mu0.clear();
  ds.mu1.clear();
  ds.e_true.clear();
  ds.ite_true.clear();

  const std::vector<std::size_t> idx = {3, 1};
  const CausalDataset sub = take_rows(ds, idx);
  EXPECT_FALSE(sub.has_ground_truth);
  EXPECT_TRUE(sub.mu0.empty());
  EXPECT_TRUE(sub.mu1.empty());
  EXPECT_TRUE(sub.e_true.empty());
  EXPECT_TRUE(sub.ite_true.empty());
  EXPECT_EQ(sub.y[0], ds.y[3]);
  EXPECT_EQ(sub.y[1], ds.y[1]);
}

TEST(TakeRows, SplitPartsReassembleTheDataset) {
  DgpConfig c = small_config();
  c.n = 40;
  const CausalDataset ds = generate(c);
  const DataSplit s = split(ds, 0.1, 9);
  const CausalDataset within = take_rows(ds, s.within_idx);
  const CausalDataset out = take_rows(ds, s.out_idx);
  EXPECT_EQ(within.size() + out.size(), ds.size());
  for (std::size_t i = 0; i < s.out_idx.size(); ++i) {
    EXPECT_EQ(out.y[i], ds.y[s.out_idx[i]]);
  }
  for (std::size_t i = 0; i < s.within_idx.size(); ++i) {
    EXPECT_EQ(within.y[i], ds.y[s.within_idx[i]]);
  }
}

TEST(CsvRoundTrip, BitExactWithGroundTruth) {
  DgpConfig c = small_config();
  c.n = 25;
  c.dim = 7;
  const CausalDataset ds = generate(c);

  std::ostringstream out;
  save_csv(ds, out);
  const std::string first = out.str();

  const std::string header = first.substr(0, first.find('\n'));
  EXPECT_EQ(header, "x0,x1,x2,x3,x4,x5,x6,t,y,mu0,mu1,e");

  std::istringstream in(first);
  const CausalDataset back = load_csv(in);
  expect_datasets_identical(ds, back);

  // Saving the loaded dataset reproduces the file byte for byte.
  std::ostringstream again;
  save_csv(back, again);
  EXPECT_EQ(again.str(), first);
}

TEST(CsvRoundTrip, ObservationalFileHasNoGroundTruth) {
  DgpConfig c = small_config();
  c.n = 12;
  c.dim = 3;
  c.latent_dim = 2;
  CausalDataset ds = generate(c);
  ds.has_ground_truth = false;

  std::ostringstream out;
  save_csv(ds, out);
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "x0,x1,x2,t,y");
  EXPECT_EQ(text.find("mu0"), std::string::npos);

  std::istringstream in(text);
  const CausalDataset back = load_csv(in);
  EXPECT_FALSE(back.has_ground_truth);
  EXPECT_TRUE(back.mu0.empty());
  EXPECT_TRUE(back.mu1.empty());
  EXPECT_TRUE(back.e_true.empty());
  EXPECT_TRUE(back.ite_true.empty());
  EXPECT_TRUE((back.x.array() == ds.x.array()).all());
  EXPECT_EQ(back.t.t, ds.t.t);
  EXPECT_EQ(back.y, ds.y);
}

TEST(CsvRoundTrip, FilePathOverloads) {
  DgpConfig c = small_config();
  c.n = 15;
  c.dim = 4;
  const CausalDataset ds = generate(c);

  const std::string path = ::testing::TempDir() + "rhpt_synthetic_rt.csv";
  save_csv(ds, path);
  const CausalDataset back = load_csv(path);
  expect_datasets_identical(ds, back);
  std::remove(path.c_str());

  EXPECT_THROW(save_csv(ds, "/no_such_dir_rhpt/x.csv"), IoError);
  expect_throw_containing<IoError>(
      [] { load_csv(std::string("/no_such_dir_rhpt/x.csv")); }, "cannot open");
}

TEST(LoadCsv, HeaderDiagnostics) {
  expect_throw_containing<IoError>(
      [] {
        std::istringstream in("a0,t,y\n1,0,2\n");
        load_csv(in);
      },
      "x0");

  // Covariate block ends at the first non-consecutive name; the leftover
  // column count is then wrong.
  expect_throw_containing<IoError>(
      [] {
        std::istringstream in("x0,x2,t,y\n1,2,0,3\n");
        load_csv(in);
      },
      "3 trailing columns");

  expect_throw_containing<IoError>(
      [] {
        std::istringstream in("x0,x1,y\n1,2,3\n");
        load_csv(in);
      },
      "trailing columns");

  expect_throw_containing<IoError>(
      [] {
        std::istringstream in("x0,q,y\n1,2,3\n");
        load_csv(in);
      },
      "'t', got 'q'");

  expect_throw_containing<IoError>(
      [] {
        std::istringstream in("x0,t,y,mu0,mu1,eps\n1,0,2,3,4,0.5\n");
        load_csv(in);
      },
      "'e', got 'eps'");
}

TEST(LoadCsv, RowDiagnostics) {
  expect_throw_containing<IoError>(
      [] {
        std::istringstream in("x0,x1,t,y\n1,2,0\n");
        load_csv(in);
      },
      "row 1: expected 4 fields, got 3");

  expect_throw_containing<IoError>(
      [] {
        std::istringstream in("x0,x1,t,y\n1,2,0,3\n1,abc,1,4\n");
        load_csv(in);
      },
      "row 2, column x1: cannot parse 'abc'");

  expect_throw_containing<IoError>(
      [] {
        std::istringstream in("x0,t,y\n1,2,3\n");
        load_csv(in);
      },
      "column t: expected 0 or 1, got '2'");

  expect_throw_containing<IoError>(
      [] {
        std::istringstream in("x0,t,y\n1,1.0,3\n");
        load_csv(in);
      },
      "expected 0 or 1");

  expect_throw_containing<IoError>(
      [] {
        std::istringstream in("x0,t,y\n1,0,\n");
        load_csv(in);
      },
      "column y: cannot parse ''");

  expect_throw_containing<IoError>(
      [] {
        std::istringstream in("");
        load_csv(in);
      },
      "empty file");

  expect_throw_containing<IoError>(
      [] {
        std::istringstream in("x0,t,y\n");
        load_csv(in);
      },
      "no data rows");
}

TEST(LoadCsv, ToleratesCrlfAndBlankLines) {
  const std::string text =
      "x0,x1,t,y\r\n"
      "1.5,-2,1,0.25\r\n"
      "\r\n"
      "0.125,3,0,-7\r\n"
      "\n";
  std::istringstream in(text);
  const CausalDataset ds = load_csv(in);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_FALSE(ds.has_ground_truth);
  EXPECT_DOUBLE_EQ(ds.x(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(ds.x(0, 1), -2.0);
  EXPECT_DOUBLE_EQ(ds.x(1, 0), 0.125);
  EXPECT_DOUBLE_EQ(ds.x(1, 1), 3.0);
  EXPECT_EQ(ds.t.t[0], 1);
  EXPECT_EQ(ds.t.t[1], 0);
  EXPECT_DOUBLE_EQ(ds.y[0], 0.25);
  EXPECT_DOUBLE_EQ(ds.y[1], -7.0);
}

TEST(LoadCsv, RecomputesIteFromPotentials) {
  const std::string text =
      "x0,t,y,mu0,mu1,e\n"
      "0,0,1,1.25,4,0.5\n"
      "1,1,3,-2,0.5,0.25\n";
  std::istringstream in(text);
  const CausalDataset ds = load_csv(in);
  ASSERT_TRUE(ds.has_ground_truth);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_DOUBLE_EQ(ds.ite_true[0], 2.75);
  EXPECT_DOUBLE_EQ(ds.ite_true[1], 2.5);
  EXPECT_DOUBLE_EQ(ds.e_true[0], 0.5);
  EXPECT_DOUBLE_EQ(ds.e_true[1], 0.25);
}

}  // namespace
}  // namespace rhpt
