#pragma once

//! @file selftest.hpp
//! Fast oracle checks used by `risce selftest`. Every check compares a
//! library routine against an independent, deliberately naive computation.

#include <array>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "risce/channel_model.hpp"
#include "risce/experiments.hpp"
#include "risce/fromax.hpp"
#include "risce/tenrice.hpp"
#include "risce/tensor_core.hpp"
#include "risce/training.hpp"

namespace risce {

struct SelftestResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace selftest {

inline ComplexMatrix random_matrix(Rng& rng, Index rows, Index cols) {
  ComplexMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.complex_normal();
  return m;
}

inline std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

inline SelftestResult kronecker_loop() {
  Rng rng(11);
  const ComplexMatrix a = random_matrix(rng, 3, 2), b = random_matrix(rng, 2, 4);
  const ComplexMatrix k = kronecker(a, b);
  double worst = 0.0;
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 2; ++j)
      for (Index p = 0; p < 2; ++p)
        for (Index q = 0; q < 4; ++q) worst = std::max(worst, std::abs(k(i * 2 + p, j * 4 + q) - a(i, j) * b(p, q)));
  return {"kronecker vs quadruple loop", worst < 1e-14, "max diff " + fmt(worst)};
}

inline SelftestResult unfolding_elementwise() {
  Rng rng(12);
  const Tensor4::Dims dims{2, 3, 2, 2};
  std::array<ComplexMatrix, 4> f;
  for (int n = 0; n < 4; ++n) f[static_cast<std::size_t>(n)] = random_matrix(rng, dims[static_cast<std::size_t>(n)], 2);
  Tensor4 t(dims);
  for (Index i1 = 0; i1 < dims[0]; ++i1)
    for (Index i2 = 0; i2 < dims[1]; ++i2)
      for (Index i3 = 0; i3 < dims[2]; ++i3)
        for (Index i4 = 0; i4 < dims[3]; ++i4) {
          cplx s = 0;
          for (Index l = 0; l < 2; ++l) s += f[0](i1, l) * f[1](i2, l) * f[2](i3, l) * f[3](i4, l);
          t(i1, i2, i3, i4) = s;
        }
  const ComplexMatrix want[4] = {
      f[0] * khatri_rao(f[3], khatri_rao(f[2], f[1])).transpose(),
      f[1] * khatri_rao(f[3], khatri_rao(f[2], f[0])).transpose(),
      f[2] * khatri_rao(f[3], khatri_rao(f[1], f[0])).transpose(),
      f[3] * khatri_rao(f[2], khatri_rao(f[1], f[0])).transpose()};
  double worst = 0.0;
  for (int n = 1; n <= 4; ++n) worst = std::max(worst, (mode_n_unfold(t, n) - want[n - 1]).cwiseAbs().maxCoeff());
  return {"unfoldings vs element-wise CP sum", worst < 1e-12, "max diff " + fmt(worst)};
}

inline SelftestResult dual_route(int instances) {
  const ArrayConfig cfg;
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const auto ch = draw_channels(cfg, 2, 2, derive_seed(13, 0, static_cast<std::uint64_t>(i)));
    const auto tr = gen_training(cfg, {}, derive_seed(13, 1, static_cast<std::uint64_t>(i)));
    const ComplexMatrix y = measure_matrix_route(ch, tr);
    const Tensor4 t = measure_tensor_route(ch, tr, cfg);
    worst = std::max(worst, relative_error(unvec(t.data(), y.rows(), y.cols()), y));
  }
  return {"matrix route vs tensor route", worst < 1e-10, "max rel err " + fmt(worst)};
}

inline SelftestResult waterfill_grid() {
  const RealVector alphas = (RealVector(2) << 2.0, 1.0).finished();
  const RealVector p = waterfill(alphas, 2.0, 1.0);
  double best = -1.0;
  for (int k = 0; k <= 10000; ++k) {
    const double p1 = 2.0 * k / 10000.0;
    best = std::max(best, std::log2(1 + 4 * p1) + std::log2(1 + (2.0 - p1)));
  }
  const double got = spectral_efficiency_sum(alphas, p, 1.0);
  const bool ok = std::abs(p[0] - 1.375) < 1e-12 && std::abs(p[1] - 0.625) < 1e-12 && got >= best - 1e-12;
  return {"waterfilling vs power grid", ok, "p=(" + fmt(p[0]) + "," + fmt(p[1]) + ")"};
}

inline SelftestResult logdet_vs_sum(int instances) {
  Rng rng(14);
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const ComplexMatrix h = random_matrix(rng, 6, 8);
    const double sigma2 = 0.1 + rng.uniform();
    const BeamformingSolution t = beamformers_for_channel(h, 1 + i % 4, 1.0, sigma2);
    worst = std::max(worst, std::abs(spectral_efficiency_logdet(h, t.q, t.p, sigma2) - t.se_bits_per_hz));
  }
  return {"log-det SE vs sum SE", worst < 1e-10, "max diff " + fmt(worst)};
}

inline SelftestResult lskrf_property5(int instances) {
  const ArrayConfig cfg{8, 4, 4, 4};
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const auto ch = draw_channels(cfg, 2, 2, derive_seed(15, 0, static_cast<std::uint64_t>(i)));
    const ComplexMatrix h_c = cascaded_channel(ch);
    const SeparatedChannels sep = lskrf_split(h_c, cfg);
    const ComplexVector w = random_reflection(cfg.m_s(), derive_seed(15, 1, static_cast<std::uint64_t>(i)));
    const ComplexMatrix via_hc = unvec(h_c * w, cfg.m_r, cfg.m_t);
    worst = std::max(worst, relative_error(effective_channel(sep.h_r_hat, sep.h_t_hat, w), via_hc));
  }
  return {"LSKRF effective channel vs H_c w", worst < 1e-10, "max rel err " + fmt(worst)};
}

inline SelftestResult noiseless_pipeline(int trials) {
  ExperimentConfig cfg;
  cfg.snr_db = {kNoiselessSnr};
  cfg.trials = trials;
  cfg.seed = 16;
  const auto rec = run_ce_sweep(cfg);
  int good = 0;
  for (const auto& t : rec[0].per_trial)
    if (!t.failed && t.errors.nmse() < 1e-6 && t.errors.max_frequency_error() < 1e-5) ++good;
  return {"noiseless estimation is exact", good == trials, fmt(good) + "/" + fmt(trials) + " exact"};
}

}  // namespace selftest

inline std::vector<SelftestResult> run_selftest() {
  std::vector<std::function<SelftestResult()>> checks{
      selftest::kronecker_loop,
      selftest::unfolding_elementwise,
      [] { return selftest::dual_route(20); },
      selftest::waterfill_grid,
      [] { return selftest::logdet_vs_sum(200); },
      [] { return selftest::lskrf_property5(20); },
      [] { return selftest::noiseless_pipeline(5); },
  };
  std::vector<SelftestResult> out;
  for (auto& c : checks) {
    try {
      out.push_back(c());
    } catch (const std::exception& e) {
      out.push_back({"(exception)", false, e.what()});
    }
  }
  return out;
}

}  // namespace risce
