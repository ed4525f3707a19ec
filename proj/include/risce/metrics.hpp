#pragma once

//! @file metrics.hpp
//! Estimation-error metrics with permutation alignment: squared wrap-around
//! frequency errors after a minimum-cost assignment, and cascaded-channel NMSE.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "risce/channel_model.hpp"
#include "risce/errors.hpp"
#include "risce/tenrice.hpp"

namespace risce {

//! Minimum-cost perfect matching on a square cost matrix (Hungarian method,
//! potentials form). Returns assignment[row] = column.
inline std::vector<Index> min_cost_assignment(const Eigen::MatrixXd& cost) {
  const Index n = cost.rows();
  if (cost.cols() != n) throw ConfigError("min_cost_assignment: cost matrix must be square");
  if (!cost.allFinite()) throw ConfigError("min_cost_assignment: non-finite cost");
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a virtual start.
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Index> match(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    match[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const Index i0 = match[static_cast<std::size_t>(j0)];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> assignment(static_cast<std::size_t>(n), -1);
  for (Index j = 1; j <= n; ++j)
    assignment[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return assignment;
}

inline double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<Index>& assignment) {
  double total = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i) total += cost(static_cast<Index>(i), assignment[i]);
  return total;
}

//! sum_i d(truth_i, est_pi(i))^2 with d the wrap-around distance and pi optimal.
inline double aligned_squared_error(const RealVector& truth, const RealVector& est) {
  if (truth.size() != est.size()) throw ConfigError("aligned_squared_error: length mismatch");
  const Index n = truth.size();
  Eigen::MatrixXd cost(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) cost(i, j) = std::pow(wrapped_distance(truth[i], est[j]), 2);
  return assignment_cost(cost, min_cost_assignment(cost));
}

//! Combined RIS frequencies are matched as (mu^v, mu^h) pairs. Returns the
//! squared errors of each coordinate under the joint optimal assignment.
struct PairError {
  double v = 0.0;
  double h = 0.0;
};

inline PairError aligned_pair_error(const RealVector& truth_v, const RealVector& truth_h,
                                    const RealVector& est_v, const RealVector& est_h) {
  const Index n = truth_v.size();
  if (truth_h.size() != n || est_v.size() != n || est_h.size() != n)
    throw ConfigError("aligned_pair_error: length mismatch");
  Eigen::MatrixXd dv(n, n), dh(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      dv(i, j) = std::pow(wrapped_distance(truth_v[i], est_v[j]), 2);
      dh(i, j) = std::pow(wrapped_distance(truth_h[i], est_h[j]), 2);
    }
  const std::vector<Index> a = min_cost_assignment(dv + dh);
  return {assignment_cost(dv, a), assignment_cost(dh, a)};
}

//! Per-trial errors; NMSE is reported as the two sums so that means can be
//! formed as a ratio of expectations.
struct EstimationErrors {
  double se_psi_r = 0.0;
  double se_psi_t = 0.0;
  double se_mu_h = 0.0;
  double se_mu_v = 0.0;
  double hc_err_sq = 0.0;
  double hc_norm_sq = 0.0;

  double nmse() const { return hc_norm_sq > 0 ? hc_err_sq / hc_norm_sq : 0.0; }
  double max_frequency_error() const {
    return std::sqrt(std::max({se_psi_r, se_psi_t, se_mu_h, se_mu_v}));
  }
};

inline EstimationErrors estimation_errors(const ChannelRealization& truth, const RecoveredParams& est,
                                          const ComplexMatrix& h_c_hat) {
  EstimationErrors e;
  e.se_psi_r = aligned_squared_error(truth.params.psi_r, est.psi_r);
  e.se_psi_t = aligned_squared_error(truth.params.psi_t, est.psi_t);
  const PairError mu = aligned_pair_error(truth.mu_v, truth.mu_h, est.mu_v, est.mu_h);
  e.se_mu_v = mu.v;
  e.se_mu_h = mu.h;
  const ComplexMatrix h_c = cascaded_channel(truth);
  e.hc_err_sq = (h_c - h_c_hat).squaredNorm();
  e.hc_norm_sq = h_c.squaredNorm();
  return e;
}

}  // namespace risce
