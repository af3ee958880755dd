#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>

#include "sfrbsde/error.hpp"
#include "sfrbsde/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> workers;
  std::vector<std::string> expect_fail;
};

sfrbsde::ExperimentConfig load(const Options& opt) {
  sfrbsde::ExperimentConfig cfg;
  if (!opt.config.empty()) cfg = sfrbsde::parse_config(opt.config);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.workers) cfg.workers = *opt.workers;
  if (!opt.out.empty()) {
    cfg.output_dir = opt.out;
  } else if (const char* env = std::getenv("SFRBSDE_OUT_DIR"); env && *env) {
    cfg.output_dir = env;
  }
  cfg.validate();
  return cfg;
}

int report(const std::string& command, const sfrbsde::CommandResult& r) {
  std::cout << sfrbsde::format_checks(r.checks);
  for (const auto& f : r.files) std::cout << "wrote " << f.string() << "\n";
  std::cout << command << ": " << (r.passed() ? "all checks passed" : "check failure") << "\n";
  return r.passed() ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Averaging-principle lab for fractional backward SDEs"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "master seed (overrides the config)");
    sub->add_option("--out", opt.out, "output directory (default: $SFRBSDE_OUT_DIR, then the config)");
    sub->add_option("--workers", opt.workers, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  };
  auto* simulate = app.add_subcommand("simulate-fbm", "sample B / B^H paths and check the fBm covariance");
  auto* solve = app.add_subcommand("solve", "solve the PDE, extract (Y, Z1, Z2) and run the representation checks");
  auto* sweep = app.add_subcommand("sweep", "epsilon sweep of original against averaged solutions");
  auto* verify = app.add_subcommand("verify", "reduced-scale invariant suite");
  for (auto* sub : {simulate, solve, sweep, verify}) add_common(sub);
  verify->add_option("--expect-fail", opt.expect_fail, "negative control that must fail (lemma1-null)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const auto cfg = load(opt);
    if (*simulate) return report("simulate-fbm", sfrbsde::cmd_simulate_fbm(cfg));
    if (*solve) return report("solve", sfrbsde::cmd_solve(cfg));
    if (*sweep) return report("sweep", sfrbsde::cmd_sweep(cfg));
    return report("verify", sfrbsde::cmd_verify(cfg, opt.expect_fail));
  } catch (const sfrbsde::ConfigError& e) {
    std::cerr << "configuration error:\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v << "\n";
    return kExitUsage;
  } catch (const sfrbsde::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}
