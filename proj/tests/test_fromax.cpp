#include <gtest/gtest.h>

#include <cmath>

#include "risce/channel_model.hpp"
#include "risce/fromax.hpp"
#include "test_util.hpp"

namespace risce {
namespace {

using test::max_abs_diff;
using test::random_matrix;
using test::scaled_distance;

RealVector vec2(double a, double b) { return (RealVector(2) << a, b).finished(); }

TEST(Waterfill, TwoChannelExample) {
  const RealVector p = waterfill(vec2(2.0, 1.0), 2.0, 1.0);
  EXPECT_NEAR(p[0], 1.375, 1e-12);
  EXPECT_NEAR(p[1], 0.625, 1e-12);
}

TEST(Waterfill, EqualGainsSplitEvenly) {
  const RealVector p = waterfill(RealVector::Constant(4, 0.7), 3.0, 0.5);
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(p[i], 0.75, 1e-12);
}

TEST(Waterfill, WeakChannelGetsNothing) {
  const RealVector p = waterfill(vec2(10.0, 0.1), 0.1, 1.0);
  EXPECT_NEAR(p[0], 0.1, 1e-12);
  EXPECT_EQ(p[1], 0.0);
}

TEST(Waterfill, ZeroGainIsSkipped) {
  const RealVector p = waterfill(vec2(1.0, 0.0), 1.0, 1.0);
  EXPECT_NEAR(p[0], 1.0, 1e-12);
  EXPECT_EQ(p[1], 0.0);
}

TEST(Waterfill, BeatsRandomAllocations) {
  Rng rng(40);
  for (int inst = 0; inst < 5; ++inst) {
    RealVector a(4);
    for (Index i = 0; i < 4; ++i) a[i] = rng.uniform(0.05, 2.0);
    const double p_max = rng.uniform(0.1, 5.0), sigma2 = rng.uniform(0.1, 2.0);
    const RealVector p = waterfill(a, p_max, sigma2);
    EXPECT_NEAR(p.sum(), p_max, 1e-12 * p_max);
    EXPECT_GE(p.minCoeff(), 0.0);
    const double best = spectral_efficiency_sum(a, p, sigma2);
    for (int k = 0; k < 20000; ++k) {
      RealVector q(4);
      for (Index i = 0; i < 4; ++i) q[i] = -std::log(1.0 - rng.uniform());
      q *= p_max / q.sum();
      ASSERT_LE(spectral_efficiency_sum(a, q, sigma2), best + 1e-12);
    }
  }
}

TEST(Waterfill, InvalidInput) {
  EXPECT_THROW(waterfill(RealVector::Zero(3), 1.0, 1.0), NumericalError);
  EXPECT_THROW(waterfill(vec2(1.0, 1.0), 1.0, 0.0), ConfigError);
  EXPECT_THROW(waterfill(vec2(1.0, 1.0), -1.0, 1.0), ConfigError);
}

TEST(SpectralEfficiency, SingleStreamFormula) {
  Rng rng(41);
  const ComplexMatrix h = random_matrix(rng, 4, 6);
  const BeamformingSolution s = beamformers_for_channel(h, 1, 2.0, 0.3);
  const double a1 = s.alphas[0];
  EXPECT_NEAR(s.se_bits_per_hz, std::log2(1.0 + a1 * a1 * 2.0 / 0.3), 1e-12);
}

TEST(SpectralEfficiency, LogDetMatchesSum) {
  Rng rng(42);
  for (int i = 0; i < 50; ++i) {
    const ComplexMatrix h = random_matrix(rng, 5, 7);
    const Index n_s = 1 + i % 5;
    const double sigma2 = rng.uniform(0.01, 3.0);
    const BeamformingSolution s = beamformers_for_channel(h, n_s, 1.5, sigma2);
    EXPECT_NEAR(spectral_efficiency_logdet(h, s.q, s.p, sigma2), s.se_bits_per_hz, 1e-10);
    EXPECT_LT(max_abs_diff(s.q.adjoint() * s.q, ComplexMatrix::Identity(n_s, n_s)), 1e-12);
    EXPECT_LE(s.p.squaredNorm(), 1.5 * (1 + 1e-12));
  }
}

TEST(SpectralEfficiency, TooManyStreamsThrows) {
  Rng rng(43);
  const ComplexMatrix h = random_matrix(rng, 4, 1) * random_matrix(rng, 1, 6);
  EXPECT_THROW(beamformers_for_channel(h, 2, 1.0, 1.0), ConfigError);
}

struct Pair {
  ComplexMatrix h_r, h_t;
};

Pair model_pair(std::uint64_t seed, Index l = 2) {
  const ArrayConfig cfg;
  const auto ch = draw_channels(cfg, l, l, seed);
  return {ch.h_r, ch.h_t};
}

Pair gaussian_pair(std::uint64_t seed) {
  Rng rng(seed);
  return {random_matrix(rng, 4, 12), random_matrix(rng, 12, 6)};
}

TEST(FroMax1, GramFormMatchesFrobeniusNorm) {
  const Pair c = gaussian_pair(44);
  const ComplexMatrix g = fromax1_gram(c.h_r, c.h_t);
  Rng rng(44);
  for (int i = 0; i < 10; ++i) {
    const ComplexVector w = random_matrix(rng, 12, 1);
    const double direct = effective_channel(c.h_r, c.h_t, w).squaredNorm();
    EXPECT_NEAR((w.adjoint() * g * w)(0, 0).real(), direct, 1e-10 * direct);
  }
}

TEST(FroMax1, RelaxedSolutionBeatsRandomUnitVectors) {
  for (std::uint64_t seed : {45u, 46u}) {
    const Pair c = seed == 45u ? model_pair(seed) : gaussian_pair(seed);
    const ComplexMatrix g = fromax1_gram(c.h_r, c.h_t);
    const ComplexVector w = fromax1_relaxed(c.h_r, c.h_t);
    EXPECT_NEAR(w.norm(), 1.0, 1e-12);
    const double best = effective_channel(c.h_r, c.h_t, w).squaredNorm();
    Rng rng(seed);
    for (int k = 0; k < 10000; ++k) {
      ComplexVector u = random_matrix(rng, g.rows(), 1);
      u /= u.norm();
      ASSERT_LE((u.adjoint() * g * u)(0, 0).real(), best * (1 + 1e-10));
    }
  }
}

TEST(FroMax1, AgreesWithGramEigenvector) {
  for (std::uint64_t seed : {47u, 48u}) {
    const Pair c = seed == 47u ? model_pair(seed) : gaussian_pair(seed);
    const Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(fromax1_gram(c.h_r, c.h_t));
    const ComplexVector top = es.eigenvectors().rightCols(1);
    EXPECT_LT(scaled_distance(fromax1_relaxed(c.h_r, c.h_t), top), 1e-8);
  }
}

TEST(FroMax1, ConstantModulusAndScaleInvariance) {
  const Pair c = model_pair(49);
  const ComplexVector w = fromax1(c.h_r, c.h_t);
  const double mod = 1.0 / std::sqrt(static_cast<double>(w.size()));
  for (Index m = 0; m < w.size(); ++m) EXPECT_NEAR(std::abs(w[m]), mod, 1e-12);
  const ComplexVector w2 = fromax1(std::polar(3.0, 1.1) * c.h_r, 0.25 * c.h_t);
  EXPECT_LT(scaled_distance(w2, w), 1e-9);
}

TEST(FroMax2, DMatrixRowsMatchLoop) {
  const Pair c = gaussian_pair(50);
  const ComplexMatrix u = svd(c.h_r).u.leftCols(2), v = svd(c.h_t).v.leftCols(2);
  const ComplexMatrix d = fromax2_dmatrix(c.h_r, c.h_t, u, v);
  ASSERT_EQ(d.rows(), 2);
  ASSERT_EQ(d.cols(), 12);
  Rng rng(50);
  const ComplexVector w = random_matrix(rng, 12, 1);
  for (Index i = 0; i < 2; ++i) {
    for (Index m = 0; m < 12; ++m) {
      cplx left = 0, right = 0;
      for (Index r = 0; r < c.h_r.rows(); ++r) left += std::conj(u(r, i)) * c.h_r(r, m);
      for (Index t = 0; t < c.h_t.cols(); ++t) right += c.h_t(m, t) * v(t, i);
      EXPECT_LT(std::abs(d(i, m) - left * right), 1e-12);
    }
    const cplx direct = (u.col(i).adjoint() * effective_channel(c.h_r, c.h_t, w) * v.col(i))(0, 0);
    EXPECT_LT(std::abs((d.row(i) * w)(0, 0) - direct), 1e-10);
  }
}

TEST(FroMax2, SingleStreamCoPhasesTheGain) {
  const Pair c = model_pair(51);
  const ComplexVector u = svd(c.h_r).u.col(0), v = svd(c.h_t).v.col(0);
  const ComplexMatrix d = fromax2_dmatrix(c.h_r, c.h_t, u, v);
  const ComplexVector w = fromax2(c.h_r, c.h_t, 1);
  const double mod = 1.0 / std::sqrt(static_cast<double>(w.size()));
  for (Index m = 0; m < w.size(); ++m) EXPECT_NEAR(std::abs(w[m]), mod, 1e-12);
  EXPECT_NEAR(std::abs((d * w)(0, 0)), d.cwiseAbs().sum() * mod, 1e-9 * d.cwiseAbs().sum());
}

TEST(FroMax2, MultiStreamAndRefresh) {
  const Pair c = model_pair(52, 3);
  const ComplexVector w0 = fromax2(c.h_r, c.h_t, 2);
  const ComplexVector w1 = fromax2(c.h_r, c.h_t, 2, 0);
  EXPECT_EQ(max_abs_diff(w0, w1), 0.0);
  const ComplexVector w2 = fromax2(c.h_r, c.h_t, 2, 2);
  const double mod = 1.0 / std::sqrt(static_cast<double>(w2.size()));
  for (Index m = 0; m < w2.size(); ++m) EXPECT_NEAR(std::abs(w2[m]), mod, 1e-12);
  EXPECT_THROW(fromax2(c.h_r, c.h_t, 0), ConfigError);
  EXPECT_THROW(fromax2(c.h_r, c.h_t, 17), ConfigError);
}

TEST(FroMax2, ZeroChannelThrows) {
  const Pair c = gaussian_pair(53);
  EXPECT_THROW(fromax2(ComplexMatrix::Zero(4, 12), c.h_t, 1), NumericalError);
}

TEST(RandomReflection, ModulusAndDeterminism) {
  const ComplexVector a = random_reflection(256, 7), b = random_reflection(256, 7), c = random_reflection(256, 8);
  for (Index m = 0; m < 256; ++m) EXPECT_NEAR(std::abs(a[m]), 1.0 / 16.0, 1e-15);
  EXPECT_EQ(max_abs_diff(a, b), 0.0);
  EXPECT_GT(max_abs_diff(a, c), 0.0);
  EXPECT_THROW(random_reflection(0, 1), ConfigError);
}

TEST(Algorithm2, SeMatchesIndependentLogDet) {
  const Pair c = model_pair(54);
  for (ReflectionDesign d : {ReflectionDesign::FroMax1, ReflectionDesign::FroMax2, ReflectionDesign::Random}) {
    for (Index n_s : {1, 2}) {
      const BeamformingSolution s = run_algorithm2(c.h_t, c.h_r, 1.0, 0.01, n_s, d, {0, 9});
      const ComplexMatrix h_e = c.h_r * s.omega.asDiagonal() * c.h_t;
      EXPECT_NEAR(spectral_efficiency_logdet(h_e, s.q, s.p, 0.01), s.se_bits_per_hz, 1e-9) << to_string(d);
      EXPECT_LE(s.p.squaredNorm(), 1.0 + 1e-12);
      EXPECT_LT(max_abs_diff(s.q.adjoint() * s.q, ComplexMatrix::Identity(n_s, n_s)), 1e-12);
    }
  }
}

TEST(Algorithm2, UnitModulusColumnScalingLeavesSeUnchanged) {
  const Pair c = model_pair(56);
  Rng rng(56);
  ComplexVector lambda(c.h_r.cols());
  for (Index m = 0; m < lambda.size(); ++m) lambda[m] = rng.unit_phase();
  const ComplexMatrix h_r2 = c.h_r * lambda.asDiagonal();
  const ComplexMatrix h_t2 = lambda.conjugate().asDiagonal() * c.h_t;
  for (ReflectionDesign d : {ReflectionDesign::FroMax1, ReflectionDesign::FroMax2, ReflectionDesign::Random}) {
    const BeamformingSolution a = run_algorithm2(c.h_t, c.h_r, 1.0, 0.01, 2, d, {0, 3});
    const BeamformingSolution b = run_algorithm2(h_t2, h_r2, 1.0, 0.01, 2, d, {0, 3});
    EXPECT_NEAR(a.se_bits_per_hz, b.se_bits_per_hz, 1e-10) << to_string(d);
    EXPECT_LT(max_abs_diff(b.alphas, a.alphas), 1e-10 * a.alphas[0]);
  }
}

TEST(Algorithm2, StreamsBeyondRankThrow) {
  const Pair c = model_pair(55, 1);
  EXPECT_THROW(run_algorithm2(c.h_t, c.h_r, 1.0, 1.0, 2, ReflectionDesign::FroMax1), ConfigError);
}

TEST(Algorithm2, DesignNames) {
  for (ReflectionDesign d : {ReflectionDesign::FroMax1, ReflectionDesign::FroMax2, ReflectionDesign::Random})
    EXPECT_EQ(parse_reflection_design(to_string(d)), d);
  EXPECT_THROW(parse_reflection_design("fromax3"), ConfigError);
}

}  // namespace
}  // namespace risce
