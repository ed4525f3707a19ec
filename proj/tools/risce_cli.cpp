// risce: Monte-Carlo sweeps for RIS-aided channel estimation and reflection design.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "risce/experiments.hpp"
#include "risce/selftest.hpp"

namespace {

struct SweepArgs {
  std::string config;
  std::string seed, trials, snr, threads, pipeline, variants, ns;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, SweepArgs& a, const std::string& default_out) {
  a.out = default_out;
  cmd->add_option("--config", a.config, "key=value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.seed, "master seed (default 1)");
  cmd->add_option("--trials", a.trials, "trials per SNR point (default 100)");
  cmd->add_option("--snr", a.snr, "comma-separated SNR list in dB, 'inf' for noiseless");
  cmd->add_option("--threads", a.threads, "worker threads, 0 = all cores (results do not depend on it)");
  cmd->add_option("--out", a.out, "output CSV path; a .manifest file is written next to it")
      ->capture_default_str();
  cmd->add_option("--set", a.sets, "override any configuration key, e.g. --set k_r=4");
}

risce::ExperimentConfig build_config(const SweepArgs& a) {
  risce::ExperimentConfig cfg;
  if (!a.config.empty()) cfg = risce::load_config(a.config);
  for (const std::string& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw risce::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  const std::pair<const char*, const std::string*> flags[] = {
      {"seed", &a.seed},         {"trials", &a.trials},     {"snr_db", &a.snr},
      {"threads", &a.threads},   {"pipeline", &a.pipeline}, {"variants", &a.variants},
      {"n_s", &a.ns}};
  for (const auto& [key, value] : flags)
    if (!value->empty()) cfg.set(key, *value);
  return cfg;
}

void print_summary(const std::vector<risce::MetricRecord>& records) {
  for (const auto& r : records) {
    if (r.kind == "ce") {
      std::printf("snr=%-6g nmse=%-12.4e mse(psi_r)=%-11.3e mse(psi_t)=%-11.3e mse(mu_h)=%-11.3e "
                  "mse(mu_v)=%-11.3e failures=%d/%d\n",
                  r.snr_db, r.nmse, r.mse_psi_r, r.mse_psi_t, r.mse_mu_h, r.mse_mu_v, r.failures, r.trials);
    } else {
      std::printf("snr=%-6g %-8s N_s=%lld se=%-9.4f (std %.3f) alpha1=%-10.4g alpha2=%-10.4g failures=%d/%d\n",
                  r.snr_db, r.variant.c_str(), static_cast<long long>(r.n_s), r.se_mean, r.se_std,
                  r.alpha1_mean, r.alpha2_mean, r.failures, r.trials);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RIS-aided mmWave MIMO: tensor channel estimation and FroMax reflection design"};
  app.set_version_flag("--version", std::string("risce ") + risce::kVersion);
  app.require_subcommand(1);

  SweepArgs ce, se;
  CLI::App* ce_cmd = app.add_subcommand("ce-sweep", "channel-estimation MSE/NMSE versus SNR");
  add_common(ce_cmd, ce, "ce_sweep.csv");

  CLI::App* se_cmd = app.add_subcommand("se-sweep", "spectral efficiency versus SNR per reflection design");
  add_common(se_cmd, se, "se_sweep.csv");
  se_cmd->add_option("--pipeline", se.pipeline, "dt-perfect-csi (default) or end-to-end");
  se_cmd->add_option("--variants", se.variants, "comma list of fromax1, fromax2, random");
  se_cmd->add_option("--ns", se.ns, "number of data streams N_s (default 1)");

  CLI::App* st_cmd = app.add_subcommand("selftest", "run the built-in oracle checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (st_cmd->parsed()) {
      bool all = true;
      for (const auto& r : risce::run_selftest()) {
        std::printf("%s  %-36s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        all = all && r.pass;
      }
      return all ? 0 : 1;
    }
    const bool is_ce = ce_cmd->parsed();
    const SweepArgs& args = is_ce ? ce : se;
    risce::ExperimentConfig cfg = build_config(args);
    if (is_ce) cfg.pipeline = risce::Pipeline::CeOnly;
    const auto records = is_ce ? risce::run_ce_sweep(cfg) : risce::run_se_sweep(cfg);
    risce::write_csv(records, args.out, cfg, is_ce ? "ce-sweep" : "se-sweep");
    print_summary(records);
    std::printf("wrote %s\n", args.out.c_str());
    return 0;
  } catch (const risce::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
