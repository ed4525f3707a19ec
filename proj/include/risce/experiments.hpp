#pragma once

//! @file experiments.hpp
//! Monte-Carlo sweeps over SNR for channel estimation and reflection design,
//! with seeded per-trial streams, a deterministic parallel trial runner and
//! CSV output with a key=value manifest.

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

#include "risce/channel_model.hpp"
#include "risce/errors.hpp"
#include "risce/fromax.hpp"
#include "risce/metrics.hpp"
#include "risce/rng.hpp"
#include "risce/tenrice.hpp"
#include "risce/training.hpp"

#ifndef RISCE_VERSION
#define RISCE_VERSION "0.1.0"
#endif

namespace risce {

inline constexpr const char* kVersion = RISCE_VERSION;

enum class Pipeline { CeOnly, PerfectCsi, EndToEnd };

inline const char* to_string(Pipeline p) {
  switch (p) {
    case Pipeline::CeOnly: return "ce-only";
    case Pipeline::PerfectCsi: return "dt-perfect-csi";
    case Pipeline::EndToEnd: return "end-to-end";
  }
  return "?";
}

inline Pipeline parse_pipeline(const std::string& s) {
  if (s == "ce-only") return Pipeline::CeOnly;
  if (s == "dt-perfect-csi" || s == "perfect-csi") return Pipeline::PerfectCsi;
  if (s == "end-to-end") return Pipeline::EndToEnd;
  throw ConfigError("unknown pipeline '" + s + "' (ce-only, dt-perfect-csi, end-to-end)");
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (item.empty()) throw ConfigError("empty item in list '" + s + "'");
    out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || *end != '\0' || errno == ERANGE) throw ConfigError(key + ": not a number: '" + text + "'");
  return v;
}

inline long long parse_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || *end != '\0' || errno == ERANGE) throw ConfigError(key + ": not an integer: '" + text + "'");
  return v;
}

inline std::uint64_t parse_seed(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  if (t.empty() || t[0] == '-') throw ConfigError(key + ": seed must be a non-negative integer");
  const unsigned long long v = std::strtoull(t.c_str(), &end, 0);
  if (*end != '\0' || errno == ERANGE) throw ConfigError(key + ": not a seed: '" + text + "'");
  return v;
}

// %.17g, with explicit spellings for non-finite values.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

//! Parses a comma-separated SNR list in dB; "inf" selects noiseless training.
inline std::vector<double> parse_snr_list(const std::string& text) {
  std::vector<double> out;
  for (const std::string& item : detail::split(text, ',')) {
    out.push_back(detail::parse_double("snr", item));
    if (std::isnan(out.back())) throw ConfigError("snr: NaN is not an SNR");
  }
  if (out.empty()) throw ConfigError("snr: empty list");
  return out;
}

inline std::vector<ReflectionDesign> parse_variant_list(const std::string& text) {
  std::vector<ReflectionDesign> out;
  for (const std::string& item : detail::split(text, ',')) out.push_back(parse_reflection_design(item));
  if (out.empty()) throw ConfigError("variants: empty list");
  return out;
}

struct ExperimentConfig {
  ArrayConfig array;
  Index l_t = 2;
  Index l_r = 2;
  TrainingBudgets budgets;
  std::vector<double> snr_db{0.0, 10.0, 20.0, 30.0};
  int trials = 100;
  std::uint64_t seed = 1;
  Pipeline pipeline = Pipeline::PerfectCsi;
  std::vector<ReflectionDesign> variants{ReflectionDesign::FroMax1, ReflectionDesign::FroMax2,
                                         ReflectionDesign::Random};
  Index n_s = 1;
  double p_max = 1.0;
  TenriceOptions tenrice;
  int fromax2_refresh = 0;
  int threads = 1;  //!< 0 selects the hardware concurrency; never affects results

  void set(const std::string& key, const std::string& value) {
    using detail::parse_int;
    auto count = [&](const std::string& k, const std::string& v) {
      return static_cast<Index>(parse_int(k, v));
    };
    if (key == "m_t") array.m_t = count(key, value);
    else if (key == "m_r") array.m_r = count(key, value);
    else if (key == "m_s_v") array.m_s_v = count(key, value);
    else if (key == "m_s_h") array.m_s_h = count(key, value);
    else if (key == "l_t") l_t = count(key, value);
    else if (key == "l_r") l_r = count(key, value);
    else if (key == "k_r") budgets.k_r = count(key, value);
    else if (key == "k_t") budgets.k_t = count(key, value);
    else if (key == "k_s_h") budgets.k_s_h = count(key, value);
    else if (key == "k_s_v") budgets.k_s_v = count(key, value);
    else if (key == "snr_db") snr_db = parse_snr_list(value);
    else if (key == "trials") trials = static_cast<int>(parse_int(key, value));
    else if (key == "seed") seed = detail::parse_seed(key, value);
    else if (key == "pipeline") pipeline = parse_pipeline(detail::trim(value));
    else if (key == "variants") variants = parse_variant_list(value);
    else if (key == "n_s") n_s = count(key, value);
    else if (key == "p_max") p_max = detail::parse_double(key, value);
    else if (key == "max_iterations") tenrice.als.max_iterations = static_cast<int>(parse_int(key, value));
    else if (key == "tol") tenrice.als.tol = detail::parse_double(key, value);
    else if (key == "restarts") tenrice.als.restarts = static_cast<int>(parse_int(key, value));
    else if (key == "line_search") tenrice.als.line_search = parse_int(key, value) != 0;
    else if (key == "grid0") tenrice.search.grid0 = count(key, value);
    else if (key == "refine_levels") tenrice.search.refine_levels = static_cast<int>(parse_int(key, value));
    else if (key == "fromax2_refresh") fromax2_refresh = static_cast<int>(parse_int(key, value));
    else if (key == "threads") threads = static_cast<int>(parse_int(key, value));
    else throw ConfigError("unknown configuration key '" + key + "'");
  }

  //! Every setting that influences results, in a fixed order.
  std::vector<std::pair<std::string, std::string>> key_values() const {
    auto num = [](auto v) { return std::to_string(v); };
    std::string snr, var;
    for (std::size_t i = 0; i < snr_db.size(); ++i) snr += (i ? "," : "") + detail::format_double(snr_db[i]);
    for (std::size_t i = 0; i < variants.size(); ++i) var += std::string(i ? "," : "") + to_string(variants[i]);
    return {{"m_t", num(array.m_t)},
            {"m_r", num(array.m_r)},
            {"m_s_v", num(array.m_s_v)},
            {"m_s_h", num(array.m_s_h)},
            {"l_t", num(l_t)},
            {"l_r", num(l_r)},
            {"k_r", num(budgets.k_r)},
            {"k_t", num(budgets.k_t)},
            {"k_s_h", num(budgets.k_s_h)},
            {"k_s_v", num(budgets.k_s_v)},
            {"snr_db", snr},
            {"trials", num(trials)},
            {"seed", num(seed)},
            {"pipeline", to_string(pipeline)},
            {"variants", var},
            {"n_s", num(n_s)},
            {"p_max", detail::format_double(p_max)},
            {"max_iterations", num(tenrice.als.max_iterations)},
            {"tol", detail::format_double(tenrice.als.tol)},
            {"restarts", num(tenrice.als.restarts)},
            {"line_search", num(tenrice.als.line_search ? 1 : 0)},
            {"grid0", num(tenrice.search.grid0)},
            {"refine_levels", num(tenrice.search.refine_levels)},
            {"fromax2_refresh", num(fromax2_refresh)}};
  }

  void validate() const {
    array.validate();
    budgets.validate();
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (snr_db.empty()) throw ConfigError("snr_db: empty list");
    for (double s : snr_db)
      if (std::isnan(s) || s == -std::numeric_limits<double>::infinity())
        throw ConfigError("snr_db: values must be finite or +inf");
    if (pipeline != Pipeline::CeOnly) {
      if (variants.empty()) throw ConfigError("variants: empty list");
      if (n_s < 1 || n_s > std::min(array.m_r, array.m_t)) throw ConfigError("n_s out of range");
      if (!(p_max > 0.0) || !std::isfinite(p_max)) throw ConfigError("p_max must be positive");
      for (double s : snr_db)
        if (std::isinf(s)) throw ConfigError("snr_db: data-phase sweeps need finite SNR values");
    }
    if (tenrice.als.max_iterations < 1 || tenrice.als.restarts < 1 || !(tenrice.als.tol >= 0.0))
      throw ConfigError("ALS options out of range");
    if (tenrice.search.grid0 < 3 || tenrice.search.refine_levels < 0)
      throw ConfigError("frequency search options out of range");
    if (fromax2_refresh < 0) throw ConfigError("fromax2_refresh must be >= 0");
    if (threads < 0) throw ConfigError("threads must be >= 0");
    if (pipeline != Pipeline::PerfectCsi)
      check_identifiability({budgets.k_r, budgets.k_t, budgets.k_s_h, budgets.k_s_v}, l_t, l_r);
    else if (l_t < 1 || l_r < 1)
      throw ConfigError("path counts must be >= 1");
  }
};

//! Reads key=value lines; '#' starts a comment.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig cfg = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    cfg.set(detail::trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, std::move(cfg));
}

//! Outcome of one trial for one reflection design (or for estimation only).
struct TrialMetrics {
  bool failed = false;
  std::string failure;
  EstimationErrors errors;  //!< filled when the trial ran channel estimation
  double se = std::numeric_limits<double>::quiet_NaN();
  double alpha1 = std::numeric_limits<double>::quiet_NaN();
  double alpha2 = std::numeric_limits<double>::quiet_NaN();
  double modulus_dev = 0.0;        //!< max_m | |omega_m| - 1/sqrt(M_S) |
  double power_excess = 0.0;       //!< ||P||_F^2 - P_max
  double orthonormality_dev = 0.0; //!< max |Q^H Q - I|
};

//! One CSV row: a (SNR, design) point aggregated over trials in index order.
struct MetricRecord {
  std::string kind;     //!< "ce" or "se"
  double snr_db = 0.0;
  std::string variant;  //!< empty for estimation-only rows
  Index n_s = 0;
  int trials = 0;
  int failures = 0;
  double mse_psi_r = std::numeric_limits<double>::quiet_NaN();
  double mse_psi_t = std::numeric_limits<double>::quiet_NaN();
  double mse_mu_h = std::numeric_limits<double>::quiet_NaN();
  double mse_mu_v = std::numeric_limits<double>::quiet_NaN();
  double nmse = std::numeric_limits<double>::quiet_NaN();
  double se_mean = std::numeric_limits<double>::quiet_NaN();
  double se_std = std::numeric_limits<double>::quiet_NaN();
  double alpha1_mean = std::numeric_limits<double>::quiet_NaN();
  double alpha2_mean = std::numeric_limits<double>::quiet_NaN();
  double max_modulus_dev = std::numeric_limits<double>::quiet_NaN();
  double max_power_excess = std::numeric_limits<double>::quiet_NaN();
  double max_orthonormality_dev = std::numeric_limits<double>::quiet_NaN();
  std::vector<TrialMetrics> per_trial;  //!< not written to CSV
};

//! Runs job(i) for i in [0, n) on `threads` workers. Each job writes only its
//! own slot, so results do not depend on scheduling. The first exception is
//! rethrown after all workers finish.
template <class Job>
void parallel_for(std::size_t n, int threads, Job&& job) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> has_error{false};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || has_error.load()) return;
      try {
        job(i);
      } catch (...) {
        if (!has_error.exchange(true)) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace detail {

enum : std::uint64_t {
  kStreamChannel = 0xC0,
  kStreamTraining = 0xC1,
  kStreamNoise = 0xC2,
  kStreamAls = 0xC3,
  kStreamReflection = 0xC4,
};

struct TrialSeeds {
  std::uint64_t channel, training, noise, als, reflection;
};

// Channel, training and reflection draws depend on the trial only, so every
// SNR point sees the same realizations; noise and ALS restarts depend on both.
inline TrialSeeds trial_seeds(std::uint64_t master, std::size_t snr_index, std::size_t trial) {
  const std::uint64_t point = derive_seed(master, kStreamNoise, snr_index);
  return {derive_seed(master, kStreamChannel, trial), derive_seed(master, kStreamTraining, trial),
          derive_seed(point, kStreamNoise, trial), derive_seed(point, kStreamAls, trial),
          derive_seed(master, kStreamReflection, trial)};
}

inline void check_constraints(const BeamformingSolution& sol, double p_max, TrialMetrics& m) {
  const double mod = 1.0 / std::sqrt(static_cast<double>(sol.omega.size()));
  m.modulus_dev = 0.0;
  for (Index i = 0; i < sol.omega.size(); ++i)
    m.modulus_dev = std::max(m.modulus_dev, std::abs(std::abs(sol.omega[i]) - mod));
  m.power_excess = sol.p.squaredNorm() - p_max;
  const Index n_s = sol.q.cols();
  m.orthonormality_dev =
      (sol.q.adjoint() * sol.q - ComplexMatrix::Identity(n_s, n_s)).cwiseAbs().maxCoeff();
}

inline void aggregate_estimation(MetricRecord& rec) {
  double psi_r = 0, psi_t = 0, mu_h = 0, mu_v = 0, err = 0, norm = 0;
  int ok = 0;
  for (const TrialMetrics& t : rec.per_trial) {
    if (t.failed) continue;
    ++ok;
    psi_r += t.errors.se_psi_r;
    psi_t += t.errors.se_psi_t;
    mu_h += t.errors.se_mu_h;
    mu_v += t.errors.se_mu_v;
    err += t.errors.hc_err_sq;
    norm += t.errors.hc_norm_sq;
  }
  if (ok == 0) return;
  rec.mse_psi_r = psi_r / ok;
  rec.mse_psi_t = psi_t / ok;
  rec.mse_mu_h = mu_h / ok;
  rec.mse_mu_v = mu_v / ok;
  rec.nmse = norm > 0 ? err / norm : 0.0;
}

inline void aggregate_design(MetricRecord& rec) {
  double sum = 0, sum_sq = 0, a1 = 0, a2 = 0;
  double mod = 0, power = -std::numeric_limits<double>::infinity(), orth = 0;
  int ok = 0;
  for (const TrialMetrics& t : rec.per_trial) {
    if (t.failed) continue;
    ++ok;
    sum += t.se;
    sum_sq += t.se * t.se;
    a1 += t.alpha1;
    a2 += t.alpha2;
    mod = std::max(mod, t.modulus_dev);
    power = std::max(power, t.power_excess);
    orth = std::max(orth, t.orthonormality_dev);
  }
  if (ok == 0) return;
  rec.se_mean = sum / ok;
  rec.se_std = ok > 1 ? std::sqrt(std::max(0.0, (sum_sq - sum * sum / ok) / (ok - 1))) : 0.0;
  rec.alpha1_mean = a1 / ok;
  rec.alpha2_mean = a2 / ok;
  rec.max_modulus_dev = mod;
  rec.max_power_excess = power;
  rec.max_orthonormality_dev = orth;
}

struct EstimatedTrial {
  ChannelRealization truth;
  bool failed = false;
  std::string failure;
  EstimationErrors errors;
  ComplexMatrix h_t_hat, h_r_hat;
};

inline EstimatedTrial estimate_trial(const ExperimentConfig& cfg, double snr_db, const TrialSeeds& seeds) {
  EstimatedTrial out;
  out.truth = draw_channels(cfg.array, cfg.l_t, cfg.l_r, seeds.channel);
  const TrainingSetup tr = gen_training(cfg.array, cfg.budgets, seeds.training);
  const Tensor4 clean = measure_tensor_route(out.truth, tr, cfg.array);
  const MeasurementTensor y = add_noise(clean, tr.w, snr_db, seeds.noise);
  try {
    const ChannelEstimate est = estimate_channels(y.y, tr, cfg.array, cfg.l_t, cfg.l_r, cfg.tenrice, seeds.als);
    out.errors = estimation_errors(out.truth, est.params, est.channels.h_c_hat);
    out.h_t_hat = est.channels.h_t_hat;
    out.h_r_hat = est.channels.h_r_hat;
  } catch (const NumericalError& e) {
    out.failed = true;
    out.failure = e.what();
  }
  return out;
}

}  // namespace detail

//! Channel-estimation sweep: one row per SNR point.
inline std::vector<MetricRecord> run_ce_sweep(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.pipeline = Pipeline::CeOnly;
  cfg.validate();
  const std::size_t n_snr = cfg.snr_db.size();
  const auto trials = static_cast<std::size_t>(cfg.trials);
  std::vector<TrialMetrics> slots(n_snr * trials);
  parallel_for(slots.size(), cfg.threads, [&](std::size_t job) {
    const std::size_t s = job / trials, t = job % trials;
    const detail::EstimatedTrial r =
        detail::estimate_trial(cfg, cfg.snr_db[s], detail::trial_seeds(cfg.seed, s, t));
    TrialMetrics& m = slots[job];
    m.failed = r.failed;
    m.failure = r.failure;
    m.errors = r.errors;
  });

  std::vector<MetricRecord> out;
  for (std::size_t s = 0; s < n_snr; ++s) {
    MetricRecord rec;
    rec.kind = "ce";
    rec.snr_db = cfg.snr_db[s];
    rec.trials = cfg.trials;
    rec.per_trial.assign(slots.begin() + static_cast<std::ptrdiff_t>(s * trials),
                         slots.begin() + static_cast<std::ptrdiff_t>((s + 1) * trials));
    for (const TrialMetrics& t : rec.per_trial) rec.failures += t.failed ? 1 : 0;
    detail::aggregate_estimation(rec);
    out.push_back(std::move(rec));
  }
  return out;
}

//! Reflection-design sweep: one row per (SNR, design). With estimated CSI the
//! designs run on (H_T_hat, H_R_hat) and the SE of the resulting (Q, P, omega)
//! is evaluated on the true channel. The data-phase noise power is
//! sigma^2 = P_max / SNR, with the same SNR used for training.
inline std::vector<MetricRecord> run_se_sweep(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  if (cfg.pipeline == Pipeline::CeOnly) cfg.pipeline = Pipeline::PerfectCsi;
  cfg.validate();
  const std::size_t n_snr = cfg.snr_db.size();
  const std::size_t n_var = cfg.variants.size();
  const auto trials = static_cast<std::size_t>(cfg.trials);
  const bool estimated = cfg.pipeline == Pipeline::EndToEnd;
  std::vector<TrialMetrics> slots(n_snr * trials * n_var);

  parallel_for(n_snr * trials, cfg.threads, [&](std::size_t job) {
    const std::size_t s = job / trials, t = job % trials;
    const detail::TrialSeeds seeds = detail::trial_seeds(cfg.seed, s, t);
    const double sigma2 = cfg.p_max / std::pow(10.0, cfg.snr_db[s] / 10.0);

    detail::EstimatedTrial est;
    if (estimated) {
      est = detail::estimate_trial(cfg, cfg.snr_db[s], seeds);
    } else {
      est.truth = draw_channels(cfg.array, cfg.l_t, cfg.l_r, seeds.channel);
      est.h_t_hat = est.truth.h_t;
      est.h_r_hat = est.truth.h_r;
    }
    for (std::size_t v = 0; v < n_var; ++v) {
      TrialMetrics& m = slots[(s * n_var + v) * trials + t];
      m.errors = est.errors;
      if (est.failed) {
        m.failed = true;
        m.failure = est.failure;
        continue;
      }
      try {
        Algorithm2Options opt;
        opt.fromax2_refresh_passes = cfg.fromax2_refresh;
        opt.random_seed = seeds.reflection;
        const BeamformingSolution sol =
            run_algorithm2(est.h_t_hat, est.h_r_hat, cfg.p_max, sigma2, cfg.n_s, cfg.variants[v], opt);
        const ComplexMatrix h_e = effective_channel(est.truth.h_r, est.truth.h_t, sol.omega);
        m.se = estimated ? spectral_efficiency_logdet(h_e, sol.q, sol.p, sigma2) : sol.se_bits_per_hz;
        const RealVector alphas = estimated ? svd(h_e).s : sol.alphas;
        m.alpha1 = alphas[0];
        m.alpha2 = alphas.size() > 1 ? alphas[1] : 0.0;
        detail::check_constraints(sol, cfg.p_max, m);
      } catch (const NumericalError& e) {
        m.failed = true;
        m.failure = e.what();
      }
    }
  });

  std::vector<MetricRecord> out;
  for (std::size_t s = 0; s < n_snr; ++s)
    for (std::size_t v = 0; v < n_var; ++v) {
      MetricRecord rec;
      rec.kind = "se";
      rec.snr_db = cfg.snr_db[s];
      rec.variant = to_string(cfg.variants[v]);
      rec.n_s = cfg.n_s;
      rec.trials = cfg.trials;
      const auto first = slots.begin() + static_cast<std::ptrdiff_t>((s * n_var + v) * trials);
      rec.per_trial.assign(first, first + static_cast<std::ptrdiff_t>(trials));
      for (const TrialMetrics& t : rec.per_trial) rec.failures += t.failed ? 1 : 0;
      if (estimated) detail::aggregate_estimation(rec);
      detail::aggregate_design(rec);
      out.push_back(std::move(rec));
    }
  return out;
}

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "kind",     "snr_db",   "variant", "n_s",     "trials",  "failures",
      "mse_psi_r", "mse_psi_t", "mse_mu_h", "mse_mu_v", "nmse",  "se_mean",
      "se_std",   "alpha1_mean", "alpha2_mean", "max_modulus_dev", "max_power_excess",
      "max_orthonormality_dev"};
  return cols;
}

inline void write_csv(std::ostream& out, const std::vector<MetricRecord>& records) {
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  using detail::format_double;
  for (const MetricRecord& r : records) {
    out << r.kind << ',' << format_double(r.snr_db) << ',' << r.variant << ',' << r.n_s << ',' << r.trials
        << ',' << r.failures << ',' << format_double(r.mse_psi_r) << ',' << format_double(r.mse_psi_t) << ','
        << format_double(r.mse_mu_h) << ',' << format_double(r.mse_mu_v) << ',' << format_double(r.nmse)
        << ',' << format_double(r.se_mean) << ',' << format_double(r.se_std) << ','
        << format_double(r.alpha1_mean) << ',' << format_double(r.alpha2_mean) << ','
        << format_double(r.max_modulus_dev) << ',' << format_double(r.max_power_excess) << ','
        << format_double(r.max_orthonormality_dev) << '\n';
  }
}

inline void write_manifest(std::ostream& out, const ExperimentConfig& cfg, const std::string& command) {
  out << "software=risce\n";
  out << "version=" << kVersion << '\n';
  out << "command=" << command << '\n';
  for (const auto& [k, v] : cfg.key_values()) out << k << '=' << v << '\n';
}

//! Writes `path` and the sidecar `path.manifest`.
inline void write_csv(const std::vector<MetricRecord>& records, const std::string& path,
                      const ExperimentConfig& cfg, const std::string& command) {
  auto open = [](const std::string& p) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw std::system_error(errno, std::generic_category(), "cannot open '" + p + "' for writing");
    return f;
  };
  std::ofstream csv = open(path);
  write_csv(csv, records);
  std::ofstream manifest = open(path + ".manifest");
  write_manifest(manifest, cfg, command);
  csv.close();
  manifest.close();
  if (!csv || !manifest) throw std::system_error(errno, std::generic_category(), "write failed for '" + path + "'");
}

//! Parses a file produced by write_csv (per-trial data is not stored).
inline std::vector<MetricRecord> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("read_csv: missing header");
  std::vector<std::string> header;
  {
    std::istringstream h(line);
    std::string cell;
    while (std::getline(h, cell, ',')) header.push_back(cell);
  }
  if (header != csv_columns()) throw ConfigError("read_csv: unexpected header");
  std::vector<MetricRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> c;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) c.push_back(cell);
    if (line.back() == ',') c.emplace_back();
    if (c.size() != header.size()) throw ConfigError("read_csv: wrong field count");
    auto d = [&](std::size_t i) {
      return c[i] == "nan" ? std::numeric_limits<double>::quiet_NaN() : detail::parse_double(header[i], c[i]);
    };
    MetricRecord r;
    r.kind = c[0];
    r.snr_db = d(1);
    r.variant = c[2];
    r.n_s = static_cast<Index>(detail::parse_int(header[3], c[3]));
    r.trials = static_cast<int>(detail::parse_int(header[4], c[4]));
    r.failures = static_cast<int>(detail::parse_int(header[5], c[5]));
    r.mse_psi_r = d(6);
    r.mse_psi_t = d(7);
    r.mse_mu_h = d(8);
    r.mse_mu_v = d(9);
    r.nmse = d(10);
    r.se_mean = d(11);
    r.se_std = d(12);
    r.alpha1_mean = d(13);
    r.alpha2_mean = d(14);
    r.max_modulus_dev = d(15);
    r.max_power_excess = d(16);
    r.max_orthonormality_dev = d(17);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::map<std::string, std::string> read_manifest(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

}  // namespace risce
