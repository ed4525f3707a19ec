#pragma once

//! @file fromax.hpp
//! Data-transmission design: SVD beamformers with waterfilling, the FroMax-1
//! and FroMax-2 RIS reflection vectors, a random baseline and SE evaluation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "risce/errors.hpp"
#include "risce/rng.hpp"
#include "risce/tensor_core.hpp"

namespace risce {

struct BeamformingSolution {
  ComplexMatrix q;          //!< M_R x N_s combiner
  ComplexMatrix p;          //!< M_T x N_s precoder
  ComplexVector omega;      //!< M_S reflection vector (empty for a synthetic channel)
  RealVector power_alloc;   //!< N_s
  RealVector alphas;        //!< all singular values of H_e, descending
  double se_bits_per_hz = 0.0;
};

//! Optimal powers p_i = max(0, mu - sigma2 / alpha_i^2) with sum p_i = p_max.
//! The water level is found exactly by scanning sorted breakpoints.
inline RealVector waterfill(const RealVector& alphas, double p_max, double sigma2) {
  if (!(p_max >= 0.0) || !(sigma2 > 0.0)) throw ConfigError("waterfill: need p_max >= 0 and sigma2 > 0");
  const Index n = alphas.size();
  std::vector<Index> active;
  for (Index i = 0; i < n; ++i) {
    if (!(alphas[i] >= 0.0) || !std::isfinite(alphas[i])) throw ConfigError("waterfill: invalid alpha");
    if (alphas[i] > 0.0) active.push_back(i);
  }
  if (active.empty()) throw NumericalError("waterfill: all alphas are zero");

  std::vector<double> floor_level(static_cast<std::size_t>(n), 0.0);
  for (Index i : active) floor_level[static_cast<std::size_t>(i)] = sigma2 / (alphas[i] * alphas[i]);
  std::sort(active.begin(), active.end(), [&](Index a, Index b) {
    return floor_level[static_cast<std::size_t>(a)] < floor_level[static_cast<std::size_t>(b)];
  });

  double prefix = 0.0;
  for (Index i : active) prefix += floor_level[static_cast<std::size_t>(i)];
  double mu = 0.0;
  for (std::size_t k = active.size(); k >= 1; --k) {
    mu = (p_max + prefix) / static_cast<double>(k);
    if (mu > floor_level[static_cast<std::size_t>(active[k - 1])] || k == 1) break;
    prefix -= floor_level[static_cast<std::size_t>(active[k - 1])];
  }
  RealVector p = RealVector::Zero(n);
  for (Index i : active) p[i] = std::max(0.0, mu - floor_level[static_cast<std::size_t>(i)]);
  return p;
}

//! sum_i log2(1 + alpha_i^2 p_i / sigma2)
inline double spectral_efficiency_sum(const RealVector& alphas, const RealVector& powers, double sigma2) {
  if (alphas.size() != powers.size()) throw ConfigError("spectral_efficiency_sum: length mismatch");
  double se = 0.0;
  for (Index i = 0; i < alphas.size(); ++i) se += std::log2(1.0 + alphas[i] * alphas[i] * powers[i] / sigma2);
  return se;
}

//! log2 det(I + R^{-1} Q^H H_e P P^H H_e^H Q) with R = sigma2 Q^H Q.
inline double spectral_efficiency_logdet(const ComplexMatrix& h_e, const ComplexMatrix& q,
                                         const ComplexMatrix& p, double sigma2) {
  if (q.rows() != h_e.rows() || p.rows() != h_e.cols() || q.cols() != p.cols())
    throw ConfigError("spectral_efficiency_logdet: dimension mismatch");
  const Index n_s = q.cols();
  const ComplexMatrix g = q.adjoint() * h_e * p;
  const ComplexMatrix r = sigma2 * (q.adjoint() * q);
  const ComplexMatrix m = ComplexMatrix::Identity(n_s, n_s) + r.partialPivLu().solve(g * g.adjoint());
  const Eigen::PartialPivLU<ComplexMatrix> lu(m);
  double log_det = 0.0;
  for (Index i = 0; i < n_s; ++i) log_det += std::log2(std::abs(lu.matrixLU()(i, i)));
  return log_det;
}

//! H_e = H_R diag(omega) H_T
inline ComplexMatrix effective_channel(const ComplexMatrix& h_r, const ComplexMatrix& h_t,
                                       const ComplexVector& omega) {
  if (h_r.cols() != omega.size() || h_t.rows() != omega.size())
    throw ConfigError("effective_channel: RIS dimension mismatch");
  return h_r * omega.asDiagonal() * h_t;
}

//! Q = U_s, P = V_s diag(sqrt(p)) with waterfilled p, for a given H_e.
inline BeamformingSolution beamformers_for_channel(const ComplexMatrix& h_e, Index n_s, double p_max,
                                                   double sigma2) {
  if (n_s < 1 || n_s > std::min(h_e.rows(), h_e.cols()))
    throw ConfigError("beamformers: N_s must be in [1, min(M_R, M_T)]");
  const SvdResult s = svd(h_e);
  if (numerical_rank(s, rank_cutoff(s, h_e.rows(), h_e.cols())) < n_s)
    throw ConfigError("beamformers: N_s exceeds the rank of the effective channel");

  BeamformingSolution out;
  out.alphas = s.s;
  out.q = s.u.leftCols(n_s);
  out.power_alloc = waterfill(s.s.head(n_s), p_max, sigma2);
  out.p = s.v.leftCols(n_s) * out.power_alloc.cwiseSqrt().asDiagonal();
  out.se_bits_per_hz = spectral_efficiency_sum(s.s.head(n_s), out.power_alloc, sigma2);
  return out;
}

inline BeamformingSolution beamformers_for_omega(const ComplexMatrix& h_r, const ComplexMatrix& h_t,
                                                 const ComplexVector& omega, Index n_s, double p_max,
                                                 double sigma2) {
  BeamformingSolution out = beamformers_for_channel(effective_channel(h_r, h_t, omega), n_s, p_max, sigma2);
  out.omega = omega;
  return out;
}

//! omega_m = x_m / (|x_m| sqrt(M_S)); a zero entry maps to 1 / sqrt(M_S).
inline ComplexVector project_constant_modulus(const ComplexVector& x) {
  const double mod = 1.0 / std::sqrt(static_cast<double>(x.size()));
  ComplexVector out(x.size());
  for (Index m = 0; m < x.size(); ++m) {
    const double a = std::abs(x[m]);
    out[m] = a > 0.0 ? mod * (x[m] / a) : cplx(mod, 0.0);
  }
  return out;
}

//! Gram matrix K^H K of K = H_T^T kr H_R, formed without building K.
inline ComplexMatrix fromax1_gram(const ComplexMatrix& h_r, const ComplexMatrix& h_t) {
  if (h_r.cols() != h_t.rows()) throw ConfigError("fromax1: RIS dimension mismatch");
  const ComplexMatrix tt = (h_t * h_t.adjoint()).conjugate();
  const ComplexMatrix rr = h_r.adjoint() * h_r;
  return tt.cwiseProduct(rr);
}

namespace detail {

// Leading singular pairs above the numerical-rank cutoff.
inline SvdResult truncated_svd(const ComplexMatrix& a) {
  SvdResult s = svd(a);
  const Index r = std::max<Index>(1, numerical_rank(s, rank_cutoff(s, a.rows(), a.cols())));
  return {s.u.leftCols(r), s.s.head(r), s.v.leftCols(r)};
}

}  // namespace detail

//! Relaxed maximizer of ||K w|| over unit vectors: the top right singular
//! vector of K. With H_T = U_T S_T V_T^H and H_R = U_R S_R V_R^H,
//! K = (conj(V_T) (x) U_R) [(S_T U_T^T) kr (S_R V_R^H)], and the bracketed
//! factor has the same right singular vectors but only rank(H_T) rank(H_R) rows.
inline ComplexVector fromax1_relaxed(const ComplexMatrix& h_r, const ComplexMatrix& h_t) {
  if (h_r.cols() != h_t.rows()) throw ConfigError("fromax1: RIS dimension mismatch");
  const SvdResult t = detail::truncated_svd(h_t);
  const SvdResult r = detail::truncated_svd(h_r);
  const ComplexMatrix core = khatri_rao(t.s.asDiagonal() * t.u.transpose(), r.s.asDiagonal() * r.v.adjoint());
  return top_singular_triplet(core).v;
}

inline ComplexVector fromax1(const ComplexMatrix& h_r, const ComplexMatrix& h_t) {
  return project_constant_modulus(fromax1_relaxed(h_r, h_t));
}

//! Rows d_i = (H_T v_i)^T .* (u_i^H H_R), so that D w stacks u_i^H H_R diag(w) H_T v_i.
inline ComplexMatrix fromax2_dmatrix(const ComplexMatrix& h_r, const ComplexMatrix& h_t,
                                     const ComplexMatrix& u_s, const ComplexMatrix& v_s) {
  if (h_r.cols() != h_t.rows()) throw ConfigError("fromax2: RIS dimension mismatch");
  if (u_s.cols() != v_s.cols() || u_s.rows() != h_r.rows() || v_s.rows() != h_t.cols())
    throw ConfigError("fromax2: singular-vector dimensions do not match the channels");
  const ComplexMatrix left = u_s.adjoint() * h_r;                 // N_s x M_S
  const ComplexMatrix right = (h_t * v_s).transpose();            // N_s x M_S
  return left.cwiseProduct(right);
}

//! FroMax-2. U_s and V_s start from the leading singular vectors of H_R and
//! H_T; `refresh_passes` > 0 re-derives them from the achieved H_e and
//! repeats the design that many more times.
inline ComplexVector fromax2(const ComplexMatrix& h_r, const ComplexMatrix& h_t, Index n_s,
                             int refresh_passes = 0) {
  if (n_s < 1 || n_s > std::min({h_r.rows(), h_t.cols(), h_r.cols()}))
    throw ConfigError("fromax2: N_s must not exceed the channel dimensions");
  ComplexMatrix u_s = svd(h_r).u.leftCols(n_s);
  ComplexMatrix v_s = svd(h_t).v.leftCols(n_s);
  ComplexVector omega;
  for (int pass = 0; pass <= refresh_passes; ++pass) {
    const ComplexMatrix d = fromax2_dmatrix(h_r, h_t, u_s, v_s);
    for (Index i = 0; i < n_s; ++i)
      if (d.row(i).squaredNorm() == 0.0)
        throw NumericalError("fromax2: D has an all-zero row " + std::to_string(i));
    const SvdResult s = svd(d);
    const ComplexVector sum = s.v.leftCols(n_s).rowwise().sum();
    const double norm = sum.norm();
    if (norm == 0.0) throw NumericalError("fromax2: singular vectors cancel");
    omega = project_constant_modulus(sum / norm);
    if (pass < refresh_passes) {
      const SvdResult e = svd(effective_channel(h_r, h_t, omega));
      u_s = e.u.leftCols(n_s);
      v_s = e.v.leftCols(n_s);
    }
  }
  return omega;
}

//! omega_m = e^{j theta_m} / sqrt(M_S), theta uniform on [0, 2pi).
inline ComplexVector random_reflection(Index m_s, std::uint64_t seed) {
  if (m_s < 1) throw ConfigError("random_reflection: M_S must be >= 1");
  Rng rng(seed);
  const double mod = 1.0 / std::sqrt(static_cast<double>(m_s));
  ComplexVector omega(m_s);
  for (Index m = 0; m < m_s; ++m) omega[m] = mod * rng.unit_phase();
  return omega;
}

enum class ReflectionDesign { FroMax1, FroMax2, Random };

inline const char* to_string(ReflectionDesign d) {
  switch (d) {
    case ReflectionDesign::FroMax1: return "fromax1";
    case ReflectionDesign::FroMax2: return "fromax2";
    case ReflectionDesign::Random: return "random";
  }
  return "?";
}

inline ReflectionDesign parse_reflection_design(const std::string& s) {
  if (s == "fromax1") return ReflectionDesign::FroMax1;
  if (s == "fromax2") return ReflectionDesign::FroMax2;
  if (s == "random") return ReflectionDesign::Random;
  throw ConfigError("unknown reflection design '" + s + "' (fromax1, fromax2, random)");
}

struct Algorithm2Options {
  int fromax2_refresh_passes = 0;
  std::uint64_t random_seed = 0;  //!< used by the Random design only
};

//! Reflection vector for the chosen design, then SVD beamformers on the
//! resulting effective channel.
inline BeamformingSolution run_algorithm2(const ComplexMatrix& h_t_hat, const ComplexMatrix& h_r_hat,
                                          double p_max, double sigma2, Index n_s, ReflectionDesign design,
                                          const Algorithm2Options& opt = {}) {
  ComplexVector omega;
  switch (design) {
    case ReflectionDesign::FroMax1: omega = fromax1(h_r_hat, h_t_hat); break;
    case ReflectionDesign::FroMax2: omega = fromax2(h_r_hat, h_t_hat, n_s, opt.fromax2_refresh_passes); break;
    case ReflectionDesign::Random: omega = random_reflection(h_r_hat.cols(), opt.random_seed); break;
  }
  return beamformers_for_omega(h_r_hat, h_t_hat, omega, n_s, p_max, sigma2);
}

}  // namespace risce
