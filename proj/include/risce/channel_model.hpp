#pragma once

//! @file channel_model.hpp
//! Geometric mmWave channels for a ULA transmitter, a ULA receiver and a
//! rectangular RIS: H_T = B_T G_T A_T^T (RIS x TX) and H_R = A_R G_R B_R^T
//! (RX x RIS), plus the cascaded channel H_c = H_T^T kr H_R.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "risce/rng.hpp"
#include "risce/tensor_core.hpp"

namespace risce {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

//! Distance between two angles on the circle, in [0, pi].
inline double wrapped_distance(double a, double b) {
  return std::abs(std::remainder(a - b, kTwoPi));
}

//! Maps an angle to [0, 2*pi).
inline double wrap_to_two_pi(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0) r += kTwoPi;
  return r >= kTwoPi ? 0.0 : r;
}

struct ArrayConfig {
  Index m_t = 64;    //!< TX antennas
  Index m_r = 16;    //!< RX antennas
  Index m_s_v = 16;  //!< RIS rows (vertical)
  Index m_s_h = 16;  //!< RIS columns (horizontal)

  Index m_s() const { return m_s_v * m_s_h; }

  void validate() const {
    if (m_t < 1 || m_r < 1 || m_s_v < 1 || m_s_h < 1)
      throw ConfigError("ArrayConfig: all antenna counts must be >= 1");
  }
};

//! Path gains and spatial frequencies of one realization. Index l runs over
//! TX-side paths (l_t), index k over RX-side paths (l_r).
struct PathParams {
  Index l_t = 1;
  Index l_r = 1;
  ComplexVector gains_t;  //!< g_{T,l}
  ComplexVector gains_r;  //!< g_{R,k}
  RealVector psi_t;       //!< TX departure, [0, 2pi]
  RealVector psi_r;       //!< RX arrival, [0, 2pi]
  RealVector mu_v_t;      //!< RIS vertical arrival, [0, pi]
  RealVector mu_h_t;      //!< RIS horizontal arrival, [0, 2pi]
  RealVector mu_v_r;      //!< RIS vertical departure, [0, pi]
  RealVector mu_h_r;      //!< RIS horizontal departure, [0, 2pi]
};

struct ChannelRealization {
  PathParams params;
  ComplexMatrix h_t;  //!< M_S x M_T
  ComplexMatrix h_r;  //!< M_R x M_S
  ComplexMatrix a_t, a_r, b_t, b_r;
  ComplexMatrix g_t, g_r;  //!< diagonal, scaled by 1/sqrt(L_X)
  //! Combined RIS frequencies and gains, n = l * L_R + k (0-based).
  RealVector mu_v;
  RealVector mu_h;
  ComplexVector g;
};

//! [1, e^{j nu}, ..., e^{j (m-1) nu}]^T
inline ComplexVector steering_1d(double nu, Index m) {
  if (m < 1) throw ConfigError("steering_1d: m must be >= 1");
  ComplexVector v(m);
  for (Index k = 0; k < m; ++k) v[k] = std::polar(1.0, static_cast<double>(k) * nu);
  return v;
}

//! v_1D(nu_v) kr v_1D(nu_h); the vertical index is the slow one.
inline ComplexVector steering_2d(double nu_v, double nu_h, Index m_v, Index m_h) {
  return khatri_rao(steering_1d(nu_v, m_v), steering_1d(nu_h, m_h));
}

//! Columns v_1D(freqs[i]).
inline ComplexMatrix steering_matrix(const RealVector& freqs, Index m) {
  ComplexMatrix a(m, freqs.size());
  for (Index i = 0; i < freqs.size(); ++i) a.col(i) = steering_1d(freqs[i], m);
  return a;
}

//! Assembles H_T, H_R and all factored forms from explicit path parameters.
inline ChannelRealization build_channels(const ArrayConfig& cfg, const PathParams& p) {
  cfg.validate();
  const Index l_t = p.l_t;
  const Index l_r = p.l_r;
  if (l_t < 1 || l_r < 1) throw ConfigError("build_channels: path counts must be >= 1");
  auto check = [](Index n, Index want, const char* what) {
    if (n != want) throw ConfigError(std::string("build_channels: wrong length for ") + what);
  };
  check(p.gains_t.size(), l_t, "gains_t");
  check(p.psi_t.size(), l_t, "psi_t");
  check(p.mu_v_t.size(), l_t, "mu_v_t");
  check(p.mu_h_t.size(), l_t, "mu_h_t");
  check(p.gains_r.size(), l_r, "gains_r");
  check(p.psi_r.size(), l_r, "psi_r");
  check(p.mu_v_r.size(), l_r, "mu_v_r");
  check(p.mu_h_r.size(), l_r, "mu_h_r");

  ChannelRealization ch;
  ch.params = p;
  ch.a_t = steering_matrix(p.psi_t, cfg.m_t);
  ch.a_r = steering_matrix(p.psi_r, cfg.m_r);
  ch.b_t = khatri_rao(steering_matrix(p.mu_v_t, cfg.m_s_v), steering_matrix(p.mu_h_t, cfg.m_s_h));
  ch.b_r = khatri_rao(steering_matrix(p.mu_v_r, cfg.m_s_v), steering_matrix(p.mu_h_r, cfg.m_s_h));
  ch.g_t = (p.gains_t / std::sqrt(static_cast<double>(l_t))).asDiagonal();
  ch.g_r = (p.gains_r / std::sqrt(static_cast<double>(l_r))).asDiagonal();
  ch.h_t = ch.b_t * ch.g_t * ch.a_t.transpose();
  ch.h_r = ch.a_r * ch.g_r * ch.b_r.transpose();

  const Index l = l_t * l_r;
  ch.mu_v.resize(l);
  ch.mu_h.resize(l);
  ch.g.resize(l);
  for (Index lt = 0; lt < l_t; ++lt)
    for (Index k = 0; k < l_r; ++k) {
      const Index n = lt * l_r + k;
      ch.mu_v[n] = p.mu_v_t[lt] + p.mu_v_r[k];
      ch.mu_h[n] = p.mu_h_t[lt] + p.mu_h_r[k];
      ch.g[n] = ch.g_t(lt, lt) * ch.g_r(k, k);
    }
  return ch;
}

//! Minimum pairwise spacing enforced between drawn spatial frequencies.
inline double min_frequency_separation(const ArrayConfig& cfg) {
  const Index m = std::max({cfg.m_t, cfg.m_r, cfg.m_s_v, cfg.m_s_h});
  return kTwoPi / (4.0 * static_cast<double>(m));
}

namespace detail {

inline bool well_separated(const RealVector& f, double min_sep) {
  for (Index i = 0; i < f.size(); ++i)
    for (Index j = i + 1; j < f.size(); ++j)
      if (wrapped_distance(f[i], f[j]) < min_sep) return false;
  return true;
}

inline RealVector draw_separated(Rng& rng, Index n, double lo, double hi, double min_sep) {
  constexpr int kMaxAttempts = 10000;
  RealVector f(n);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    for (Index i = 0; i < n; ++i) f[i] = rng.uniform(lo, hi);
    if (well_separated(f, min_sep)) return f;
  }
  throw ConfigError("draw_channels: cannot place frequencies with the required separation");
}

// Distinct combined RIS columns must differ in at least one dimension.
inline bool combined_separated(const ChannelRealization& ch, double min_sep) {
  for (Index i = 0; i < ch.mu_v.size(); ++i)
    for (Index j = i + 1; j < ch.mu_v.size(); ++j)
      if (std::max(wrapped_distance(ch.mu_v[i], ch.mu_v[j]),
                   wrapped_distance(ch.mu_h[i], ch.mu_h[j])) < min_sep)
        return false;
  return true;
}

}  // namespace detail

//! Random geometric channel: CN(0,1) gains, psi and mu^h uniform on
//! [0, 2pi], mu^v uniform on [0, pi], pairwise separation enforced by
//! rejection. Deterministic in `seed`.
inline ChannelRealization draw_channels(const ArrayConfig& cfg, Index l_t, Index l_r,
                                        std::uint64_t seed) {
  cfg.validate();
  if (l_t < 1 || l_r < 1) throw ConfigError("draw_channels: path counts must be >= 1");
  Rng rng(seed);
  const double sep = min_frequency_separation(cfg);
  constexpr double pi = std::numbers::pi;
  constexpr int kMaxAttempts = 10000;

  PathParams p;
  p.l_t = l_t;
  p.l_r = l_r;
  p.gains_t.resize(l_t);
  p.gains_r.resize(l_r);
  for (Index i = 0; i < l_t; ++i) p.gains_t[i] = rng.complex_normal();
  for (Index i = 0; i < l_r; ++i) p.gains_r[i] = rng.complex_normal();
  p.psi_t = detail::draw_separated(rng, l_t, 0.0, kTwoPi, sep);
  p.psi_r = detail::draw_separated(rng, l_r, 0.0, kTwoPi, sep);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    p.mu_v_t = detail::draw_separated(rng, l_t, 0.0, pi, sep);
    p.mu_h_t = detail::draw_separated(rng, l_t, 0.0, kTwoPi, sep);
    p.mu_v_r = detail::draw_separated(rng, l_r, 0.0, pi, sep);
    p.mu_h_r = detail::draw_separated(rng, l_r, 0.0, kTwoPi, sep);
    ChannelRealization ch = build_channels(cfg, p);
    if (detail::combined_separated(ch, sep)) return ch;
  }
  throw ConfigError("draw_channels: cannot separate combined RIS frequencies");
}

//! H_c = H_T^T kr H_R, size (M_T M_R) x M_S.
inline ComplexMatrix cascaded_channel(const ChannelRealization& ch) {
  return khatri_rao(ch.h_t.transpose(), ch.h_r);
}

//! H_c = (A_T (x) A_R) G (B_v kr B_h)^T with G = G_T (x) G_R.
inline ComplexMatrix cascaded_channel_factored(const ChannelRealization& ch, const ArrayConfig& cfg) {
  const ComplexMatrix b_v = steering_matrix(ch.mu_v, cfg.m_s_v);
  const ComplexMatrix b_h = steering_matrix(ch.mu_h, cfg.m_s_h);
  return kronecker(ch.a_t, ch.a_r) * kronecker(ch.g_t, ch.g_r) * khatri_rao(b_v, b_h).transpose();
}

}  // namespace risce
