#pragma once

//! @file training.hpp
//! Channel-estimation phase: random training matrices, the noiseless
//! measurement built two independent ways, and calibrated receiver noise.

#include <cmath>
#include <cstdint>
#include <limits>

#include "risce/channel_model.hpp"
#include "risce/rng.hpp"
#include "risce/tensor_core.hpp"

namespace risce {

//! Number of receive beams, transmit beams and RIS training patterns.
struct TrainingBudgets {
  Index k_r = 8;
  Index k_t = 8;
  Index k_s_h = 8;
  Index k_s_v = 8;

  Index k_s() const { return k_s_h * k_s_v; }

  void validate() const {
    if (k_r < 1 || k_t < 1 || k_s_h < 1 || k_s_v < 1)
      throw ConfigError("TrainingBudgets: all budgets must be >= 1");
  }
};

//! Training matrices. Pilot symbols are folded into F; the RIS training
//! matrix is Phi = Phi_v (x) Phi_h.
struct TrainingSetup {
  TrainingBudgets budgets;
  ComplexMatrix w;      //!< M_R x K_R, entries e^{j phi} / sqrt(M_R)
  ComplexMatrix f;      //!< M_T x K_T, entries e^{j phi} / sqrt(M_T)
  ComplexMatrix phi_h;  //!< M_S^h x K_S^h, entries e^{j phi} / sqrt(M_S^h)
  ComplexMatrix phi_v;  //!< M_S^v x K_S^v, entries e^{j phi} / sqrt(M_S^v)

  ComplexMatrix phi() const { return kronecker(phi_v, phi_h); }
};

namespace detail {

inline ComplexMatrix random_phase_matrix(Rng& rng, Index rows, Index cols) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
  ComplexMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = scale * rng.unit_phase();
  return m;
}

}  // namespace detail

inline TrainingSetup gen_training(const ArrayConfig& cfg, const TrainingBudgets& budgets,
                                  std::uint64_t seed) {
  cfg.validate();
  budgets.validate();
  Rng rng(seed);
  TrainingSetup tr;
  tr.budgets = budgets;
  tr.w = detail::random_phase_matrix(rng, cfg.m_r, budgets.k_r);
  tr.f = detail::random_phase_matrix(rng, cfg.m_t, budgets.k_t);
  tr.phi_h = detail::random_phase_matrix(rng, cfg.m_s_h, budgets.k_s_h);
  tr.phi_v = detail::random_phase_matrix(rng, cfg.m_s_v, budgets.k_s_v);
  return tr;
}

namespace detail {

inline void check_training_dims(const ChannelRealization& ch, const TrainingSetup& tr) {
  if (tr.w.rows() != ch.h_r.rows() || tr.f.rows() != ch.h_t.cols() ||
      tr.phi_h.rows() * tr.phi_v.rows() != ch.h_t.rows() ||
      tr.w.cols() != tr.budgets.k_r || tr.f.cols() != tr.budgets.k_t ||
      tr.phi_h.cols() != tr.budgets.k_s_h || tr.phi_v.cols() != tr.budgets.k_s_v)
    throw ConfigError("training matrices do not match the channel dimensions");
}

}  // namespace detail

//! Y = (F^T (x) W^H) H_c Phi, size (K_R K_T) x K_S, noiseless.
inline ComplexMatrix measure_matrix_route(const ChannelRealization& ch, const TrainingSetup& tr) {
  detail::check_training_dims(ch, tr);
  return kronecker(tr.f.transpose(), tr.w.adjoint()) * cascaded_channel(ch) * tr.phi();
}

//! CP tensor of size K_R x K_T x K_S^h x K_S^v with factors
//! W^H A_R Omega_R, F^T A_T Omega_T, Phi_h^T B_h and Phi_v^T B_v G.
inline Tensor4 measure_tensor_route(const ChannelRealization& ch, const TrainingSetup& tr,
                                    const ArrayConfig& cfg) {
  detail::check_training_dims(ch, tr);
  const Index l_t = ch.params.l_t;
  const Index l_r = ch.params.l_r;
  const ComplexMatrix a_r_bar = tr.w.adjoint() * ch.a_r;
  const ComplexMatrix a_t_bar = tr.f.transpose() * ch.a_t;
  const ComplexMatrix b_h_bar = tr.phi_h.transpose() * steering_matrix(ch.mu_h, cfg.m_s_h);
  const ComplexMatrix b_v_bar =
      tr.phi_v.transpose() * steering_matrix(ch.mu_v, cfg.m_s_v) * ch.g.asDiagonal();
  return cp_build(tile_columns(a_r_bar, l_t), repeat_columns(a_t_bar, l_r), b_h_bar, b_v_bar);
}

//! Signal-to-noise ratio that disables noise entirely.
inline constexpr double kNoiselessSnr = std::numeric_limits<double>::infinity();

struct MeasurementTensor {
  Tensor4 y;
  Tensor4 noiseless;
  double noise_var = 0.0;  //!< per-antenna sigma^2 before the combiner
  double snr_db = kNoiselessSnr;
};

//! Adds receiver noise W^H z_{s,t}, z ~ CN(0, sigma^2 I_{M_R}), to every
//! subframe. sigma^2 is set from the realized signal energy so that
//! ||signal||^2 / E||noise||^2 equals the target, using
//! E||W^H z||^2 = sigma^2 ||W||_F^2.
inline MeasurementTensor add_noise(const Tensor4& noiseless, const ComplexMatrix& w, double snr_db,
                                   std::uint64_t seed) {
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
    throw ConfigError("add_noise: SNR must be finite or +inf");
  if (!noiseless.data().allFinite()) throw ConfigError("add_noise: non-finite measurement");
  const Index k_r = noiseless.dim(1);
  if (w.cols() != k_r) throw ConfigError("add_noise: combiner does not match mode-1 size");

  MeasurementTensor out{noiseless, noiseless, 0.0, snr_db};
  if (std::isinf(snr_db)) return out;

  const Index blocks = noiseless.size() / k_r;
  const double signal = noiseless.data().squaredNorm();
  const double snr = std::pow(10.0, snr_db / 10.0);
  out.noise_var = signal / (snr * static_cast<double>(blocks) * w.squaredNorm());

  Rng rng(seed);
  const ComplexMatrix wh = w.adjoint();
  ComplexVector z(w.rows());
  for (Index b = 0; b < blocks; ++b) {
    for (Index i = 0; i < z.size(); ++i) z[i] = rng.complex_normal(out.noise_var);
    out.y.data().segment(b * k_r, k_r) += wh * z;
  }
  return out;
}

}  // namespace risce
