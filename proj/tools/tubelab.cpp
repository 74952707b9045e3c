// Command-line runner for tube-family experiments.
//
//   tubelab run --config configs/suite.json --out reports
//   tubelab regress --config configs/suite.json
//   tubelab freeze --config configs/suite.json
//   tubelab list-scenarios
//
// Exit codes: 0 pass, 1 acceptance failure, 2 usage or config error.

#include "tubelab/experiment.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <future>
#include <iostream>
#include <optional>

using namespace tubelab;

namespace {

constexpr int kPass = 0, kFail = 1, kUsage = 2;

struct Options {
  std::string config;
  std::optional<std::int64_t> seed;
  std::optional<std::string> out;
  std::optional<double> grid_h;
  bool parallel = false;
};

std::vector<ExperimentConfig> prepare(const Options& o) {
  auto cfgs = load_configs(o.config);
  for (auto& c : cfgs) {
    if (o.seed) {
      if (*o.seed < 0) throw ConfigError("--seed must be nonnegative");
      c.seed = static_cast<std::uint64_t>(*o.seed);
    }
    if (o.out) c.output = *o.out;
    if (o.grid_h) c.grid.h = *o.grid_h;
    c.validate();
  }
  return cfgs;
}

std::vector<ExperimentReport> run_all(const std::vector<ExperimentConfig>& cfgs, bool parallel) {
  std::vector<ExperimentReport> out;
  if (!parallel) {
    for (const auto& c : cfgs) out.push_back(run_scenario(c));
    return out;
  }
  std::vector<std::future<ExperimentReport>> jobs;
  for (const auto& c : cfgs) jobs.push_back(std::async(std::launch::async, [&c] { return run_scenario(c); }));
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

void print_summary(const ExperimentReport& r) {
  std::cout << fmt::format("{:<7} {:<28} {:>8.2f}s", r.passed() ? "PASS" : "FAIL", r.config.name, r.wall_clock_seconds);
  if (r.failure) std::cout << "  error: " << *r.failure;
  std::cout << '\n';
  for (const auto& c : r.checks)
    if (!c.passed) std::cout << fmt::format("        check {} failed {}\n", c.name, c.detail);
}

int cmd_run(const Options& o) {
  const auto cfgs = prepare(o);
  const auto reports = run_all(cfgs, o.parallel);
  bool ok = true;
  for (const auto& r : reports) {
    write_report(r, r.config.output);
    print_summary(r);
    ok = ok && r.passed();
  }
  return ok ? kPass : kFail;
}

int cmd_regress(const Options& o, const std::string& fallback) {
  const auto cfgs = prepare(o);
  const auto reports = run_all(cfgs, o.parallel);
  bool ok = true;
  for (const auto& r : reports) {
    print_summary(r);
    ok = ok && r.passed();
  }
  const auto dir = golden_dir(fallback);
  const auto summary = regress(reports, dir);
  std::cout << '\n' << summary.table();
  if (!summary.missing.empty())
    std::cout << fmt::format(
        "\nNo golden values under {} for the scenarios above. Verify a passing run, then record them with\n"
        "  tubelab freeze --config {}\n(set TUBELAB_GOLDEN_DIR to choose another location).\n",
        dir.string(), o.config);
  return ok && summary.passed() ? kPass : kFail;
}

int cmd_freeze(const Options& o, const std::string& fallback) {
  const auto cfgs = prepare(o);
  const auto reports = run_all(cfgs, o.parallel);
  bool ok = true;
  for (const auto& r : reports) {
    print_summary(r);
    ok = ok && r.passed();
  }
  if (!ok) {
    std::cout << "not freezing: some scenarios failed\n";
    return kFail;
  }
  const auto dir = golden_dir(fallback);
  freeze(reports, dir);
  std::cout << fmt::format("golden values written to {}\n", dir.string());
  return kPass;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "scenario config or manifest (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "override the seed of every scenario");
  cmd->add_option("--out", o.out, "report directory");
  cmd->add_option("--grid-h", o.grid_h, "absolute grid spacing (at most delta/2 for every scale)");
  cmd->add_flag("--parallel", o.parallel, "run scenarios concurrently");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tubelab: desk-scale experiments on unions of lines and delta-tubes"};
  app.require_subcommand(1);
  Options o;
  std::string golden_fallback = "tests/golden";

  auto* run = app.add_subcommand("run", "run scenarios and write one report per scenario");
  auto* reg = app.add_subcommand("regress", "run scenarios and compare constants with golden values");
  auto* frz = app.add_subcommand("freeze", "run scenarios and record their constants as golden values");
  auto* list = app.add_subcommand("list-scenarios", "print the available scenarios");
  for (auto* c : {run, reg, frz}) add_common(c, o);
  for (auto* c : {reg, frz}) c->add_option("--golden", golden_fallback, "golden directory when TUBELAB_GOLDEN_DIR is unset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*list) {
      for (const auto& s : scenarios()) std::cout << fmt::format("{:<11} {}\n", s.name, s.description);
      return kPass;
    }
    if (*run) return cmd_run(o);
    if (*reg) return cmd_regress(o, golden_fallback);
    if (*frz) return cmd_freeze(o, golden_fallback);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
