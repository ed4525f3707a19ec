#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

#include "risce/metrics.hpp"
#include "risce/tenrice.hpp"
#include "test_util.hpp"

namespace risce {
namespace {

using test::max_abs_diff;
using test::random_matrix;

struct Instance {
  ArrayConfig cfg;
  ChannelRealization ch;
  TrainingSetup tr;
  Tensor4 y;
};

Instance make_instance(Index l_t, Index l_r, std::uint64_t seed, double snr_db = kNoiselessSnr,
                       TrainingBudgets budgets = {}) {
  Instance in;
  in.ch = draw_channels(in.cfg, l_t, l_r, derive_seed(seed, 1));
  in.tr = gen_training(in.cfg, budgets, derive_seed(seed, 2));
  in.y = add_noise(measure_tensor_route(in.ch, in.tr, in.cfg), in.tr.w, snr_db, derive_seed(seed, 3)).y;
  return in;
}

// Largest principal angle between the column spans of a and b.
double subspace_angle(const ComplexMatrix& a, const ComplexMatrix& b) {
  const ComplexMatrix qa = svd(a).u, qb = svd(b).u;
  const RealVector c = svd(qa.adjoint() * qb).s;
  return std::acos(std::min(1.0, c.minCoeff()));
}

TEST(Identifiability, ViolationsThrow) {
  EXPECT_THROW(check_identifiability({1, 1, 1, 1}, 2, 2), ConfigError);
  EXPECT_THROW(check_identifiability({8, 8, 8, 8}, 0, 2), ConfigError);
  EXPECT_NO_THROW(check_identifiability({8, 8, 8, 8}, 2, 2));
  Tensor4 y({1, 1, 1, 1});
  EXPECT_THROW(als_run(y, 2, 2, {}, 1), ConfigError);
}

TEST(Als, RankOneConvergesQuickly) {
  const Instance in = make_instance(1, 1, 10);
  const FactorEstimates est = als_run(in.y, 1, 1, {}, 1);
  EXPECT_LE(est.iterations, 3);
  EXPECT_LT(est.final_fit(), 1e-10);
}

TEST(Als, NoiselessTwoByTwoRecoversFactorSpaces) {
  const Instance in = make_instance(2, 2, 11);
  const FactorEstimates est = als_run(in.y, 2, 2, {}, 1);
  EXPECT_LT(est.final_fit(), 1e-8);
  const ArrayConfig& cfg = in.cfg;
  EXPECT_LT(subspace_angle(est.a_r_bar, in.tr.w.adjoint() * in.ch.a_r), 1e-4);
  EXPECT_LT(subspace_angle(est.a_t_bar, in.tr.f.transpose() * in.ch.a_t), 1e-4);
  EXPECT_LT(subspace_angle(est.b_h_bar, in.tr.phi_h.transpose() * steering_matrix(in.ch.mu_h, cfg.m_s_h)), 1e-4);
  EXPECT_LT(subspace_angle(est.b_v_bar, in.tr.phi_v.transpose() * steering_matrix(in.ch.mu_v, cfg.m_s_v)), 1e-4);
}

TEST(Als, FitHistoryIsMonotoneOnNoisyData) {
  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    const double snr = rng.uniform(0.0, 30.0);
    const Instance in = make_instance(2, 2, derive_seed(12, 0, i), snr);
    const FactorEstimates est = als_run(in.y, 2, 2, {}, derive_seed(12, 1, i));
    for (std::size_t k = 1; k < est.fit_history.size(); ++k)
      ASSERT_LE(est.fit_history[k], est.fit_history[k - 1] + 1e-9) << "instance " << i << " step " << k;
  }
}

TEST(Als, FitHistoryIsMonotoneWithoutLineSearch) {
  AlsOptions opt;
  opt.line_search = false;
  for (int i = 0; i < 10; ++i) {
    const Instance in = make_instance(2, 2, derive_seed(13, 0, i), 5.0);
    const FactorEstimates est = als_run(in.y, 2, 2, opt, 1);
    for (std::size_t k = 1; k < est.fit_history.size(); ++k)
      ASSERT_LE(est.fit_history[k], est.fit_history[k - 1] + 1e-9);
  }
}

TEST(Als, ZeroTensorReportsRankCollapse) {
  Tensor4 y({4, 4, 4, 4});
  try {
    als_run(y, 1, 1, {}, 1);
    FAIL() << "expected RankCollapseError";
  } catch (const RankCollapseError& e) {
    EXPECT_GE(e.iteration(), 1);
  }
}

TEST(RecoverFrequency, SelfConsistency) {
  Rng rng(14);
  const ComplexMatrix proj = random_matrix(rng, 8, 16);
  for (int i = 0; i < 20; ++i) {
    const double psi0 = rng.uniform(0.0, kTwoPi);
    const ComplexVector col = proj * steering_1d(psi0, 16);
    FrequencySearch search{256, 4};
    const double psi = recover_frequency(col, proj, search);
    EXPECT_LE(wrapped_distance(psi, psi0), kTwoPi / (256 * 1e4));
  }
}

TEST(RecoverFrequency, ScaleInvariant) {
  Rng rng(15);
  const ComplexMatrix proj = random_matrix(rng, 8, 16);
  const ComplexVector col = proj * steering_1d(1.234, 16) + 0.05 * random_matrix(rng, 8, 1);
  const double a = recover_frequency(col, proj, {});
  const double b = recover_frequency(col * std::polar(3.7, 0.9), proj, {});
  EXPECT_NEAR(a, b, 1e-9);
}

TEST(RecoverFrequency, BoundedInterval) {
  Rng rng(16);
  const ComplexMatrix proj = random_matrix(rng, 8, 16);
  const ComplexVector col = proj * steering_1d(2.0, 16);
  const double psi = recover_frequency(col, proj, {}, Interval{0.0, std::numbers::pi});
  EXPECT_NEAR(psi, 2.0, 1e-6);
  EXPECT_THROW(recover_frequency(ComplexVector::Zero(8), proj, {}), NumericalError);
}

TEST(RecoverAllParams, SinglePathNoiseless) {
  const Instance in = make_instance(1, 1, 17);
  const FactorEstimates est = als_run(in.y, 1, 1, {}, 1);
  const RecoveredParams p = recover_all_params(est, in.tr);
  EXPECT_LT(wrapped_distance(p.psi_r[0], in.ch.params.psi_r[0]), 1e-6);
  EXPECT_LT(wrapped_distance(p.psi_t[0], in.ch.params.psi_t[0]), 1e-6);
  EXPECT_LT(wrapped_distance(p.mu_h[0], in.ch.mu_h[0]), 1e-6);
  EXPECT_LT(wrapped_distance(p.mu_v[0], in.ch.mu_v[0]), 1e-6);
}

TEST(RecoverAllParams, ColumnPermutationGivesSameMultiset) {
  const Instance in = make_instance(2, 2, 18);
  FactorEstimates est = als_run(in.y, 2, 2, {}, 1);
  const RecoveredParams a = recover_all_params(est, in.tr);
  est.b_h_bar = est.b_h_bar(Eigen::all, std::vector<Index>{2, 0, 3, 1}).eval();
  est.b_v_bar = est.b_v_bar(Eigen::all, std::vector<Index>{2, 0, 3, 1}).eval();
  const RecoveredParams b = recover_all_params(est, in.tr);
  std::vector<double> ha(a.mu_h.begin(), a.mu_h.end()), hb(b.mu_h.begin(), b.mu_h.end());
  std::sort(ha.begin(), ha.end());
  std::sort(hb.begin(), hb.end());
  for (std::size_t i = 0; i < ha.size(); ++i) EXPECT_DOUBLE_EQ(ha[i], hb[i]);
}

TEST(RecoverAllParams, CombinedFrequenciesMatchSums) {
  const Instance in = make_instance(2, 2, 19);
  const RecoveredParams p = recover_all_params(als_run(in.y, 2, 2, {}, 1), in.tr);
  const PairError e = aligned_pair_error(in.ch.mu_v, in.ch.mu_h, p.mu_v, p.mu_h);
  EXPECT_LT(std::sqrt(e.v + e.h), 1e-6);
  EXPECT_LT(aligned_squared_error(in.ch.params.psi_t, p.psi_t), 1e-12);
  EXPECT_LT(aligned_squared_error(in.ch.params.psi_r, p.psi_r), 1e-12);
}

RecoveredParams true_params(const ChannelRealization& ch) {
  RecoveredParams p;
  p.psi_r = ch.params.psi_r;
  p.psi_t = ch.params.psi_t;
  p.mu_h = ch.mu_h;
  p.mu_v = ch.mu_v;
  return p;
}

TEST(EstimateGains, ExactFrequenciesRecoverTrueGains) {
  const Instance in = make_instance(2, 2, 20);
  const ComplexVector g = estimate_gains(in.y.data(), true_params(in.ch), in.tr, in.cfg);
  EXPECT_LT(max_abs_diff(g, in.ch.g), 1e-8);
}

TEST(EstimateGains, ZeroMeasurementAndLinearity) {
  const Instance in = make_instance(2, 2, 21, 10.0);
  const RecoveredParams p = true_params(in.ch);
  EXPECT_EQ(estimate_gains(ComplexVector::Zero(in.y.size()), p, in.tr, in.cfg).norm(), 0.0);
  const cplx c(2.0, -1.5);
  const ComplexVector g1 = estimate_gains(in.y.data(), p, in.tr, in.cfg);
  const ComplexVector g2 = estimate_gains(c * in.y.data(), p, in.tr, in.cfg);
  EXPECT_LT(max_abs_diff(g2, c * g1), 1e-10 * g1.norm());
}

TEST(EstimateGains, RankDeficientDictionaryThrows) {
  const Instance in = make_instance(2, 2, 22);
  RecoveredParams p = true_params(in.ch);
  // Identical RX directions and identical RIS pairs make dictionary columns coincide.
  p.psi_r[1] = p.psi_r[0];
  p.mu_h[1] = p.mu_h[0];
  p.mu_v[1] = p.mu_v[0];
  p.mu_h[3] = p.mu_h[2];
  p.mu_v[3] = p.mu_v[2];
  EXPECT_THROW(estimate_gains(in.y.data(), p, in.tr, in.cfg), NumericalError);
}

TEST(ReconstructCascaded, ExactParamsReproduceChannel) {
  const Instance in = make_instance(2, 3, 23, kNoiselessSnr, {8, 8, 8, 8});
  RecoveredParams p = true_params(in.ch);
  p.g_hat = in.ch.g;
  const ComplexMatrix h_c = cascaded_channel(in.ch);
  EXPECT_LT((reconstruct_cascaded(p, in.cfg) - h_c).squaredNorm() / h_c.squaredNorm(), 1e-12);
}

TEST(ReconstructCascaded, ZeroGainsAndSinglePath) {
  const Instance in = make_instance(1, 1, 24);
  RecoveredParams p = true_params(in.ch);
  p.g_hat = ComplexVector::Zero(1);
  EXPECT_EQ(reconstruct_cascaded(p, in.cfg).norm(), 0.0);
  p.g_hat = in.ch.g;
  EXPECT_EQ(numerical_rank(reconstruct_cascaded(p, in.cfg), 1e-10), 1);
}

TEST(Lskrf, RecoversOuterProductsAndColumnsUpToScale) {
  const ArrayConfig cfg;
  const auto ch = draw_channels(cfg, 2, 2, 25);
  const ComplexMatrix h_c = cascaded_channel(ch);
  const SeparatedChannels s = lskrf_split(h_c, cfg);
  for (Index m = 0; m < cfg.m_s(); ++m) {
    const ComplexMatrix outer = s.h_r_hat.col(m) * s.h_t_hat.row(m);
    EXPECT_LT(max_abs_diff(outer, ch.h_r.col(m) * ch.h_t.row(m)), 1e-10 * outer.norm());
    EXPECT_LT(test::scaled_distance(s.h_r_hat.col(m), ch.h_r.col(m)), 1e-10);
  }
  EXPECT_LT(relative_error(khatri_rao(s.h_t_hat.transpose(), s.h_r_hat), h_c), 1e-10);
}

TEST(Lskrf, EffectiveChannelMatchesProperty5) {
  const ArrayConfig cfg;
  const auto ch = draw_channels(cfg, 2, 2, 26);
  const ComplexMatrix h_c = cascaded_channel(ch);
  const SeparatedChannels s = lskrf_split(h_c, cfg);
  Rng rng(26);
  for (int i = 0; i < 10; ++i) {
    ComplexVector w(cfg.m_s());
    for (Index m = 0; m < w.size(); ++m) w[m] = rng.unit_phase() / 16.0;
    const ComplexMatrix direct = s.h_r_hat * w.asDiagonal() * s.h_t_hat;
    EXPECT_LT(relative_error(direct, unvec(h_c * w, cfg.m_r, cfg.m_t)), 1e-10);
  }
}

TEST(Lskrf, ScalingAmbiguityLeavesEffectiveChannelUnchanged) {
  const ArrayConfig cfg;
  const auto ch = draw_channels(cfg, 2, 2, 27);
  const SeparatedChannels s = lskrf_split(cascaded_channel(ch), cfg);
  Rng rng(27);
  ComplexVector lambda(cfg.m_s());
  for (Index m = 0; m < lambda.size(); ++m) lambda[m] = rng.complex_normal() + 0.5;
  const ComplexMatrix h_r2 = s.h_r_hat * lambda.asDiagonal();
  const ComplexMatrix h_t2 = lambda.cwiseInverse().asDiagonal() * s.h_t_hat;
  for (int i = 0; i < 5; ++i) {
    ComplexVector w(cfg.m_s());
    for (Index m = 0; m < w.size(); ++m) w[m] = rng.complex_normal();
    const ComplexMatrix a = s.h_r_hat * w.asDiagonal() * s.h_t_hat;
    EXPECT_LT(relative_error(h_r2 * w.asDiagonal() * h_t2, a), 1e-12);
  }
}

TEST(Lskrf, RankOneColumnsHaveNoSecondSingularValue) {
  const ArrayConfig cfg{8, 4, 4, 4};
  const auto ch = draw_channels(cfg, 2, 2, 28);
  const ComplexMatrix h_c = cascaded_channel(ch);
  for (Index m = 0; m < cfg.m_s(); ++m) {
    const RealVector sv = svd(unvec(h_c.col(m), cfg.m_r, cfg.m_t)).s;
    EXPECT_LT(sv[1], 1e-10 * sv[0]);
  }
  EXPECT_THROW(lskrf_split(h_c.topRows(10), cfg), ConfigError);
}

TEST(EstimateChannels, NoiselessPipelineIsExact) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Instance in = make_instance(2, 2, derive_seed(29, 0, s));
    const ChannelEstimate est = estimate_channels(in.y, in.tr, in.cfg, 2, 2, {}, s);
    const ComplexMatrix h_c = cascaded_channel(in.ch);
    EXPECT_LT((est.channels.h_c_hat - h_c).squaredNorm() / h_c.squaredNorm(), 1e-6);
  }
}

TEST(EstimateChannels, UnequalPathCounts) {
  const Instance in = make_instance(3, 2, 30);
  const ChannelEstimate est = estimate_channels(in.y, in.tr, in.cfg, 3, 2, {}, 1);
  const ComplexMatrix h_c = cascaded_channel(in.ch);
  EXPECT_LT((est.channels.h_c_hat - h_c).squaredNorm() / h_c.squaredNorm(), 1e-6);
}

}  // namespace
}  // namespace risce
