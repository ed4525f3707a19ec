#pragma once

//! @file tenrice.hpp
//! Tensor-based channel estimation for an RIS-aided link.
//!
//! The noiseless training tensor Y (K_R x K_T x K_S^h x K_S^v) is a rank-L
//! CP tensor whose first two factors carry a column-repetition structure:
//!
//!   Y = I_{4,L} x1 (Abar_R Omega_R) x2 (Abar_T Omega_T) x3 Bbar_h x4 Bbar_v
//!
//! with L = L_T L_R and CP column n = l * L_R + k pairing TX path l with RX
//! path k. The estimator runs a constrained ALS over the four factors,
//! recovers one spatial frequency per factor column by a correlation search,
//! re-fits the path gains by least squares, rebuilds H_c and finally splits it
//! into H_T and H_R with a per-column rank-1 factorization (LSKRF).

#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <string>
#include <vector>

#include "risce/channel_model.hpp"
#include "risce/rng.hpp"
#include "risce/tensor_core.hpp"
#include "risce/training.hpp"

namespace risce {

struct AlsOptions {
  int max_iterations = 200;
  //! Stop when the relative change of ||Y - Yhat||_F drops below tol.
  double tol = 1e-8;
  int restarts = 3;
  //! Extrapolate all factors along the last update direction (step
  //! it^(1/3)) and keep the result when it lowers the fit.
  bool line_search = true;
};

struct FactorEstimates {
  ComplexMatrix a_r_bar;  //!< K_R x L_R
  ComplexMatrix a_t_bar;  //!< K_T x L_T
  ComplexMatrix b_h_bar;  //!< K_S^h x L
  ComplexMatrix b_v_bar;  //!< K_S^v x L
  int iterations = 0;
  //! ||Y - Yhat||_F / ||Y||_F after every full sweep of the winning restart.
  std::vector<double> fit_history;

  double final_fit() const {
    return fit_history.empty() ? std::numeric_limits<double>::infinity() : fit_history.back();
  }
};

//! Throws ConfigError unless every ALS subproblem can have full row rank:
//! K_T K_S >= L_R, K_R K_S >= L_T, K_R K_T K_S^v >= L and K_R K_T K_S^h >= L.
inline void check_identifiability(const Tensor4::Dims& dims, Index l_t, Index l_r) {
  if (l_t < 1 || l_r < 1) throw ConfigError("path counts must be >= 1");
  const Index k_r = dims[0], k_t = dims[1], k_h = dims[2], k_v = dims[3];
  const Index l = l_t * l_r;
  const Index k_s = k_h * k_v;
  std::string why;
  if (k_t * k_s < l_r) why += " K_T*K_S < L_R;";
  if (k_r * k_s < l_t) why += " K_R*K_S < L_T;";
  if (k_r * k_t * k_v < l) why += " K_R*K_T*K_S^v < L;";
  if (k_r * k_t * k_h < l) why += " K_R*K_T*K_S^h < L;";
  if (!why.empty()) throw ConfigError("identifiability violated:" + why);
}

namespace detail {

// KR * Omega_R^T: column k sums the KR columns n with n mod L_R == k.
inline ComplexMatrix fold_columns_rx(const ComplexMatrix& kr, Index l_t, Index l_r) {
  ComplexMatrix out = ComplexMatrix::Zero(kr.rows(), l_r);
  for (Index lt = 0; lt < l_t; ++lt)
    for (Index k = 0; k < l_r; ++k) out.col(k) += kr.col(lt * l_r + k);
  return out;
}

// KR * Omega_T^T: column l sums the KR columns n with n / L_R == l.
inline ComplexMatrix fold_columns_tx(const ComplexMatrix& kr, Index l_t, Index l_r) {
  ComplexMatrix out = ComplexMatrix::Zero(kr.rows(), l_t);
  for (Index lt = 0; lt < l_t; ++lt)
    for (Index k = 0; k < l_r; ++k) out.col(lt) += kr.col(lt * l_r + k);
  return out;
}

inline ComplexMatrix random_factor(Rng& rng, Index rows, Index cols) {
  ComplexMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.complex_normal();
  return m;
}

struct UnfoldedData {
  ComplexVector y;                   // vec([Y]_(4)^T)
  ComplexMatrix y1t, y2t, y3t, y4t;  // transposed unfoldings
  double norm = 0.0;
};

// Leading left singular vectors of an unfolding, padded with random columns
// when the unfolding has fewer rows than requested.
inline ComplexMatrix subspace_factor(const ComplexMatrix& unfolding_t, Index cols, Rng& rng) {
  ComplexMatrix out = random_factor(rng, unfolding_t.cols(), cols);
  const SvdResult s = svd(unfolding_t.transpose());
  const Index take = std::min<Index>(cols, s.u.cols());
  out.leftCols(take) = s.u.leftCols(take);
  return out;
}

// Groups `vecs` (unit columns) into `groups` clusters of `size` members by
// greedy absolute-correlation matching. Returns the cluster of every column.
inline std::vector<Index> cluster_directions(const ComplexMatrix& vecs, Index groups, Index size) {
  const Index n = vecs.cols();
  std::vector<Index> label(static_cast<std::size_t>(n), -1);
  const Eigen::MatrixXd sim = (vecs.adjoint() * vecs).cwiseAbs();
  for (Index g = 0; g < groups; ++g) {
    Index seed = 0;
    while (label[static_cast<std::size_t>(seed)] >= 0) ++seed;
    label[static_cast<std::size_t>(seed)] = g;
    for (Index m = 1; m < size; ++m) {
      Index pick = -1;
      for (Index c = 0; c < n; ++c)
        if (label[static_cast<std::size_t>(c)] < 0 && (pick < 0 || sim(seed, c) > sim(seed, pick))) pick = c;
      label[static_cast<std::size_t>(pick)] = g;
    }
  }
  return label;
}

// Dominant direction shared by the selected unit columns.
inline ComplexVector common_direction(const ComplexMatrix& vecs, const std::vector<Index>& label,
                                      Index group) {
  std::vector<Index> members;
  for (Index c = 0; c < vecs.cols(); ++c)
    if (label[static_cast<std::size_t>(c)] == group) members.push_back(c);
  ComplexMatrix stack(vecs.rows(), static_cast<Index>(members.size()));
  for (std::size_t i = 0; i < members.size(); ++i) stack.col(static_cast<Index>(i)) = vecs.col(members[i]);
  return top_singular_triplet(stack).u;
}

// Closed-form initialization. Merging the first two modes gives a rank-L
// 3-way CP model X = C o B_h o B_v with C = Abar_T (x) Abar_R; it is solved by
// a generalized eigendecomposition of two compressed slice mixtures. Each
// column of C is then split into its RX/TX directions, which are clustered
// back into the column-repetition structure. Returns false when the
// dimensions do not allow it or the clusters are inconsistent.
inline bool algebraic_init(const ComplexVector& y, const Tensor4::Dims& dims, Index l_t, Index l_r,
                           Rng& rng, FactorEstimates& est) {
  const Index k_r = dims[0], k_t = dims[1], k_h = dims[2], k_v = dims[3];
  const Index p = k_r * k_t;
  const Index l = l_t * l_r;
  if (p < l || k_h < l || k_v < 2 || k_r < l_r || k_t < l_t) return false;

  const ComplexMatrix x_p = unvec(y, p, k_h * k_v);
  const ComplexMatrix u_c = svd(x_p).u.leftCols(l);
  const ComplexMatrix x_h = mode_n_unfold(Tensor4(dims, y), 3);
  const ComplexMatrix w_h = svd(x_h).u.leftCols(l).conjugate();

  ComplexMatrix s1 = ComplexMatrix::Zero(l, l);
  ComplexMatrix s2 = ComplexMatrix::Zero(l, l);
  for (Index iv = 0; iv < k_v; ++iv) {
    const ComplexMatrix slice = unvec(y.segment(iv * p * k_h, p * k_h), p, k_h);
    const ComplexMatrix compressed = u_c.adjoint() * slice * w_h;
    s1 += rng.complex_normal() * compressed;
    s2 += rng.complex_normal() * compressed;
  }
  Index rank = 0;
  const ComplexMatrix s2_inv = pseudo_inverse(s2, &rank);
  if (rank < l) return false;
  Eigen::ComplexEigenSolver<ComplexMatrix> eig(s1 * s2_inv);
  if (eig.info() != Eigen::Success) return false;
  const ComplexMatrix c = u_c * eig.eigenvectors();

  const LsSolution bvh = ls_solve(c, x_p);  // row n is column n of (B_v kr B_h), transposed
  if (bvh.rank < l) return false;
  ComplexMatrix b_h(k_h, l), b_v(k_v, l), dir_r(k_r, l), dir_t(k_t, l);
  for (Index n = 0; n < l; ++n) {
    const SingularTriplet hv = top_singular_triplet(unvec(bvh.x.row(n).transpose(), k_h, k_v));
    const SingularTriplet rt = top_singular_triplet(unvec(c.col(n), k_r, k_t));
    b_h.col(n) = hv.sigma * rt.sigma * hv.u;
    b_v.col(n) = hv.v.conjugate();
    dir_r.col(n) = rt.u;
    dir_t.col(n) = rt.v.conjugate();
  }

  const std::vector<Index> rx = cluster_directions(dir_r, l_r, l_t);
  const std::vector<Index> tx = cluster_directions(dir_t, l_t, l_r);
  std::vector<Index> slot_of(static_cast<std::size_t>(l), -1);
  std::vector<bool> used(static_cast<std::size_t>(l), false);
  for (Index n = 0; n < l; ++n) {
    const Index slot = tx[static_cast<std::size_t>(n)] * l_r + rx[static_cast<std::size_t>(n)];
    if (used[static_cast<std::size_t>(slot)]) return false;
    used[static_cast<std::size_t>(slot)] = true;
    slot_of[static_cast<std::size_t>(n)] = slot;
  }

  est.a_r_bar.resize(k_r, l_r);
  est.a_t_bar.resize(k_t, l_t);
  for (Index k = 0; k < l_r; ++k) est.a_r_bar.col(k) = common_direction(dir_r, rx, k);
  for (Index lt = 0; lt < l_t; ++lt) est.a_t_bar.col(lt) = common_direction(dir_t, tx, lt);
  est.b_h_bar.resize(k_h, l);
  est.b_v_bar.resize(k_v, l);
  for (Index n = 0; n < l; ++n) {
    est.b_h_bar.col(slot_of[static_cast<std::size_t>(n)]) = b_h.col(n);
    est.b_v_bar.col(slot_of[static_cast<std::size_t>(n)]) = b_v.col(n);
  }
  return true;
}

enum class AlsInit { Algebraic, Subspace, Random };

inline FactorEstimates als_single(const UnfoldedData& data, const Tensor4::Dims& dims, Index l_t,
                                  Index l_r, const AlsOptions& opt, std::uint64_t seed,
                                  AlsInit init) {
  const Index l = l_t * l_r;
  Rng rng(seed);
  FactorEstimates est;
  if (init == AlsInit::Algebraic && !algebraic_init(data.y, dims, l_t, l_r, rng, est))
    init = AlsInit::Subspace;
  if (init == AlsInit::Subspace) {
    est.a_t_bar = subspace_factor(data.y2t, l_t, rng);
    est.b_h_bar = subspace_factor(data.y3t, l, rng);
    est.b_v_bar = subspace_factor(data.y4t, l, rng);
  } else if (init == AlsInit::Random) {
    est.a_t_bar = random_factor(rng, dims[1], l_t);
    est.b_h_bar = random_factor(rng, dims[2], l);
    est.b_v_bar = random_factor(rng, dims[3], l);
  }
  if (init != AlsInit::Algebraic) est.a_r_bar = ComplexMatrix::Zero(dims[0], l_r);

  const double scale = data.norm > 0 ? data.norm : 1.0;
  auto solve = [&](const ComplexMatrix& design, const ComplexMatrix& rhs, Index need, int it,
                   const char* name) {
    LsSolution s = ls_solve(design, rhs);
    if (s.rank < need) throw RankCollapseError(it, name);
    return s;
  };

  auto model_fit = [&](const FactorEstimates& f) {
    const ComplexMatrix a_tr =
        khatri_rao(repeat_columns(f.a_t_bar, l_r), tile_columns(f.a_r_bar, l_t));
    return (data.y4t - khatri_rao(f.b_h_bar, a_tr) * f.b_v_bar.transpose()).norm() / scale;
  };

  FactorEstimates prev;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    if (opt.line_search && it > 2) prev = est;

    const ComplexMatrix a_t_rep = repeat_columns(est.a_t_bar, l_r);
    ComplexMatrix kr = khatri_rao(est.b_v_bar, khatri_rao(est.b_h_bar, a_t_rep));
    est.a_r_bar = solve(fold_columns_rx(kr, l_t, l_r), data.y1t, l_r, it, "A_R").x.transpose();

    const ComplexMatrix a_r_tile = tile_columns(est.a_r_bar, l_t);
    kr = khatri_rao(est.b_v_bar, khatri_rao(est.b_h_bar, a_r_tile));
    est.a_t_bar = solve(fold_columns_tx(kr, l_t, l_r), data.y2t, l_t, it, "A_T").x.transpose();

    const ComplexMatrix a_tr = khatri_rao(repeat_columns(est.a_t_bar, l_r), a_r_tile);
    est.b_h_bar = solve(khatri_rao(est.b_v_bar, a_tr), data.y3t, l, it, "B_h").x.transpose();

    kr = khatri_rao(est.b_h_bar, a_tr);
    const LsSolution sv = solve(kr, data.y4t, l, it, "B_v");
    est.b_v_bar = sv.x.transpose();

    double fit = (data.y4t - kr * sv.x).norm() / scale;
    if (opt.line_search && it > 2) {
      const double step = std::cbrt(static_cast<double>(it));
      FactorEstimates trial;
      trial.a_r_bar = prev.a_r_bar + step * (est.a_r_bar - prev.a_r_bar);
      trial.a_t_bar = prev.a_t_bar + step * (est.a_t_bar - prev.a_t_bar);
      trial.b_h_bar = prev.b_h_bar + step * (est.b_h_bar - prev.b_h_bar);
      trial.b_v_bar = prev.b_v_bar + step * (est.b_v_bar - prev.b_v_bar);
      const double trial_fit = model_fit(trial);
      if (trial_fit < fit) {
        est.a_r_bar = std::move(trial.a_r_bar);
        est.a_t_bar = std::move(trial.a_t_bar);
        est.b_h_bar = std::move(trial.b_h_bar);
        est.b_v_bar = std::move(trial.b_v_bar);
        fit = trial_fit;
      }
    }

    est.iterations = it;
    est.fit_history.push_back(fit);
    if (fit <= 1e-13) break;
    if (it > 1) {
      const double last = est.fit_history[est.fit_history.size() - 2];
      if (std::abs(last - fit) <= opt.tol * last) break;
    }
  }
  return est;
}

}  // namespace detail

//! Constrained ALS for the four training-tensor factors. Each sweep updates
//! Abar_R, Abar_T, Bbar_h, Bbar_v in that order, always with the freshest
//! other factors. Restart 0 starts from the closed-form 3-way solution,
//! restart 1 from the leading unfolding subspaces and the rest from random
//! complex Gaussian factors; the lowest final fit wins.
inline FactorEstimates als_run(const Tensor4& y, Index l_t, Index l_r, const AlsOptions& opt,
                               std::uint64_t seed) {
  check_identifiability(y.dims(), l_t, l_r);
  if (opt.max_iterations < 1 || opt.restarts < 1)
    throw ConfigError("als_run: max_iterations and restarts must be >= 1");
  detail::UnfoldedData data;
  data.y1t = mode_n_unfold(y, 1).transpose();
  data.y2t = mode_n_unfold(y, 2).transpose();
  data.y3t = mode_n_unfold(y, 3).transpose();
  data.y4t = mode_n_unfold(y, 4).transpose();
  data.y = y.data();
  data.norm = y.norm();

  // A restart that collapses is discarded; the error surfaces only when
  // every restart collapsed.
  FactorEstimates best;
  bool have_best = false;
  std::exception_ptr first_error;
  for (int r = 0; r < opt.restarts; ++r) {
    const auto init = r == 0 ? detail::AlsInit::Algebraic
                             : (r == 1 ? detail::AlsInit::Subspace : detail::AlsInit::Random);
    try {
      FactorEstimates est = detail::als_single(data, y.dims(), l_t, l_r, opt, derive_seed(seed, 0xA15, r), init);
      if (!have_best || est.final_fit() < best.final_fit()) best = std::move(est);
      have_best = true;
    } catch (const RankCollapseError&) {
      if (!first_error) first_error = std::current_exception();
    }
    if (have_best && best.final_fit() <= 1e-13) break;
  }
  if (!have_best) std::rethrow_exception(first_error);
  return best;
}

// ---------------------------------------------------------------------------
// Spatial-frequency recovery
// ---------------------------------------------------------------------------

struct FrequencySearch {
  Index grid0 = 256;
  //! Each level zooms x10 around the incumbent.
  int refine_levels = 6;
};

struct Interval {
  double lo = 0.0;
  double hi = kTwoPi;

  double width() const { return hi - lo; }
  bool periodic() const { return width() >= kTwoPi - 1e-12; }
};

//! |col^H P v(psi)| / (||col|| ||P v(psi)||)
inline double steering_correlation(const ComplexVector& col, double col_norm,
                                   const ComplexMatrix& projector, double psi) {
  const ComplexVector pv = projector * steering_1d(psi, projector.cols());
  const double den = col_norm * pv.norm();
  return den > 0 ? std::abs(col.dot(pv)) / den : 0.0;
}

//! Correlation peak search over `range`: grid0 coarse points, then
//! refine_levels zoom stages, then one parabolic vertex step.
inline double recover_frequency(const ComplexVector& col, const ComplexMatrix& projector,
                                const FrequencySearch& search, Interval range = {}) {
  if (projector.rows() != col.size())
    throw ConfigError("recover_frequency: projector does not match column length");
  if (search.grid0 < 2 || search.refine_levels < 0)
    throw ConfigError("recover_frequency: invalid grid settings");
  const double col_norm = col.norm();
  if (col_norm == 0.0) throw NumericalError("recover_frequency: zero column");

  const bool periodic = range.periodic();
  auto clamp = [&](double x) {
    if (periodic) return range.lo + wrap_to_two_pi(x - range.lo);
    return std::min(std::max(x, range.lo), range.hi);
  };
  auto corr = [&](double x) { return steering_correlation(col, col_norm, projector, x); };

  double step = range.width() / static_cast<double>(search.grid0);
  const Index points = periodic ? search.grid0 : search.grid0 + 1;
  double best = range.lo;
  double best_val = -1.0;
  for (Index i = 0; i < points; ++i) {
    const double x = range.lo + static_cast<double>(i) * step;
    const double v = corr(x);
    if (v > best_val) {
      best_val = v;
      best = x;
    }
  }

  for (int level = 0; level < search.refine_levels; ++level) {
    const double center = best;
    const double fine = step / 10.0;
    for (int j = -10; j <= 10; ++j) {
      if (j == 0) continue;
      const double x = clamp(center + j * fine);
      const double v = corr(x);
      if (v > best_val) {
        best_val = v;
        best = x;
      }
    }
    step = fine;
  }

  // Parabolic vertex through the last three samples around the incumbent.
  const double fm = corr(clamp(best - step));
  const double fp = corr(clamp(best + step));
  const double curvature = fm - 2.0 * best_val + fp;
  if (curvature < 0.0) {
    double offset = 0.5 * step * (fm - fp) / curvature;
    offset = std::max(-step, std::min(step, offset));
    const double x = clamp(best + offset);
    if (corr(x) > best_val) best = x;
  }
  return clamp(best);
}

//! Spatial frequencies (and, once estimated, path gains) with CP-column labels.
struct RecoveredParams {
  RealVector psi_r;  //!< L_R
  RealVector psi_t;  //!< L_T
  RealVector mu_h;   //!< L, column n = l * L_R + k
  RealVector mu_v;   //!< L
  ComplexVector g_hat;

  Index l_t() const { return psi_t.size(); }
  Index l_r() const { return psi_r.size(); }
};

//! Per-column correlation search with projectors W^H, F^T, Phi_h^T and
//! Phi_v^T. All searches run over [0, 2pi) since steering vectors are
//! 2pi-periodic and combined RIS frequencies are sums of two draws.
inline RecoveredParams recover_all_params(const FactorEstimates& est, const TrainingSetup& tr,
                                          const FrequencySearch& search = {}) {
  auto run = [&](const ComplexMatrix& factor, const ComplexMatrix& projector) {
    RealVector out(factor.cols());
    for (Index c = 0; c < factor.cols(); ++c)
      out[c] = recover_frequency(factor.col(c), projector, search);
    return out;
  };
  RecoveredParams p;
  p.psi_r = run(est.a_r_bar, tr.w.adjoint());
  p.psi_t = run(est.a_t_bar, tr.f.transpose());
  p.mu_h = run(est.b_h_bar, tr.phi_h.transpose());
  p.mu_v = run(est.b_v_bar, tr.phi_v.transpose());
  return p;
}

//! Dictionary Phi_v^T B_v kr Phi_h^T B_h kr F^T A_T Omega_T kr W^H A_R Omega_R
//! built from recovered frequencies; its columns are indexed like g.
inline ComplexMatrix gain_dictionary(const RecoveredParams& p, const TrainingSetup& tr,
                                     const ArrayConfig& cfg) {
  const Index l_t = p.l_t(), l_r = p.l_r();
  if (p.mu_h.size() != l_t * l_r || p.mu_v.size() != l_t * l_r)
    throw ConfigError("gain_dictionary: RIS frequency count must equal L_T * L_R");
  const ComplexMatrix a_r = tr.w.adjoint() * steering_matrix(p.psi_r, cfg.m_r);
  const ComplexMatrix a_t = tr.f.transpose() * steering_matrix(p.psi_t, cfg.m_t);
  const ComplexMatrix b_h = tr.phi_h.transpose() * steering_matrix(p.mu_h, cfg.m_s_h);
  const ComplexMatrix b_v = tr.phi_v.transpose() * steering_matrix(p.mu_v, cfg.m_s_v);
  return khatri_rao(b_v, khatri_rao(b_h, khatri_rao(repeat_columns(a_t, l_r), tile_columns(a_r, l_t))));
}

//! Least-squares path gains from the vectorized measurement y = vec([Y]_(4)^T).
inline ComplexVector estimate_gains(const ComplexVector& y_vec, const RecoveredParams& p,
                                    const TrainingSetup& tr, const ArrayConfig& cfg) {
  const ComplexMatrix dict = gain_dictionary(p, tr, cfg);
  if (dict.rows() != y_vec.size()) throw ConfigError("estimate_gains: measurement length mismatch");
  const LsSolution s = ls_solve(dict, y_vec);
  if (s.rank < dict.cols()) throw NumericalError("estimate_gains: rank-deficient gain dictionary");
  return s.x.col(0);
}

//! H_c = (A_T (x) A_R) diag(g) (B_v kr B_h)^T from recovered parameters.
inline ComplexMatrix reconstruct_cascaded(const RecoveredParams& p, const ArrayConfig& cfg) {
  const Index l = p.l_t() * p.l_r();
  if (p.g_hat.size() != l) throw ConfigError("reconstruct_cascaded: gains missing");
  const ComplexMatrix a = kronecker(steering_matrix(p.psi_t, cfg.m_t), steering_matrix(p.psi_r, cfg.m_r));
  const ComplexMatrix b = khatri_rao(steering_matrix(p.mu_v, cfg.m_s_v), steering_matrix(p.mu_h, cfg.m_s_h));
  return a * p.g_hat.asDiagonal() * b.transpose();
}

struct SeparatedChannels {
  ComplexMatrix h_t_hat;  //!< M_S x M_T
  ComplexMatrix h_r_hat;  //!< M_R x M_S
  ComplexMatrix h_c_hat;  //!< (M_T M_R) x M_S
};

//! Splits H_c column by column: column m reshaped to M_R x M_T is replaced
//! by its best rank-1 approximation sigma u v^H, giving
//! h_r[:,m] = sqrt(sigma) u and h_t[m,:] = sqrt(sigma) v^H. Each column pair
//! is only defined up to a reciprocal complex scalar.
inline SeparatedChannels lskrf_split(const ComplexMatrix& h_c, const ArrayConfig& cfg) {
  if (h_c.rows() != cfg.m_t * cfg.m_r || h_c.cols() != cfg.m_s())
    throw ConfigError("lskrf_split: H_c must be (M_T M_R) x M_S");
  SeparatedChannels out;
  out.h_c_hat = h_c;
  out.h_t_hat.resize(cfg.m_s(), cfg.m_t);
  out.h_r_hat.resize(cfg.m_r, cfg.m_s());
  for (Index m = 0; m < cfg.m_s(); ++m) {
    const ComplexMatrix block = unvec(h_c.col(m), cfg.m_r, cfg.m_t);
    if (block.squaredNorm() == 0.0) {
      out.h_r_hat.col(m).setZero();
      out.h_t_hat.row(m).setZero();
      continue;
    }
    const SingularTriplet s = top_singular_triplet(block);
    const double root = std::sqrt(s.sigma);
    out.h_r_hat.col(m) = root * s.u;
    out.h_t_hat.row(m) = root * s.v.adjoint();
  }
  return out;
}

struct TenriceOptions {
  AlsOptions als;
  FrequencySearch search;
};

struct ChannelEstimate {
  FactorEstimates factors;
  RecoveredParams params;
  SeparatedChannels channels;
};

//! Full estimation chain from a measurement tensor to (H_T, H_R, H_c) estimates.
inline ChannelEstimate estimate_channels(const Tensor4& y, const TrainingSetup& tr,
                                         const ArrayConfig& cfg, Index l_t, Index l_r,
                                         const TenriceOptions& opt, std::uint64_t seed) {
  ChannelEstimate est;
  est.factors = als_run(y, l_t, l_r, opt.als, seed);
  est.params = recover_all_params(est.factors, tr, opt.search);
  est.params.g_hat = estimate_gains(y.data(), est.params, tr, cfg);
  est.channels = lskrf_split(reconstruct_cascaded(est.params, cfg), cfg);
  return est;
}

}  // namespace risce
