// SPDX-License-Identifier: Apache-2.0
// efuse: run the ensemble-fusion experiments and summarize their reports.
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 runtime failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ef/config.hpp"
#include "ef/errors.hpp"
#include "ef/experiments.hpp"
#include "ef/report.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> workers;
  std::string format;
  std::optional<std::size_t> max_cells;
  bool resume = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "Experiment config file (key = value lines)");
  cmd->add_option("--seed", flags.seed, "Run a single seed instead of the config's seed list");
  cmd->add_option("--out", flags.out, "Report path (stdout when omitted)");
  cmd->add_option("--workers", flags.workers, "Concurrent units")->check(CLI::PositiveNumber);
  cmd->add_option("--format", flags.format, "Report format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--max-cells", flags.max_cells, "Stop after this many new units");
  cmd->add_flag("--resume", flags.resume, "Keep units already present in --out and run the rest");
}

int run(ef::ExperimentKind kind, const CommonFlags& flags) {
  ef::ConfigFile file = flags.config.empty() ? ef::ConfigFile::parse("", "<defaults>") : ef::ConfigFile::load(flags.config);
  const std::string name(ef::to_string(kind));
  if (const auto declared = file.get_string("experiment"); declared && *declared != name) {
    throw ef::ConfigError("config declares experiment '" + *declared + "', not '" + name + "'");
  }
  file.set("experiment", name);
  if (flags.seed) file.set("seeds", std::to_string(*flags.seed));
  if (!flags.out.empty()) file.set("output", flags.out);
  if (!flags.format.empty()) file.set("format", flags.format);
  if (flags.workers) file.set("workers", std::to_string(*flags.workers));

  const ef::ExperimentConfig cfg = ef::parse_experiment_config(file);
  ef::RunOptions options;
  options.workers = cfg.workers;
  options.max_units = flags.max_cells;
  if (flags.resume) {
    if (cfg.output.empty()) throw ef::ConfigError("--resume needs an output path");
    if (std::filesystem::exists(cfg.output)) options.previous_rows = ef::read_report(cfg.output);
  }

  const ef::RunReport report = ef::run_experiment(cfg, options);
  const auto total = ef::plan_units(cfg).keys.size();
  std::cerr << "experiment=" << name << " config_hash=" << report.config_hash
            << " wall_seconds=" << ef::format_value(report.wall_seconds) << " rows=" << report.rows.size()
            << " units=" << total << "\n";
  if (report.rows.empty()) throw std::runtime_error("no units completed");
  if (cfg.output.empty()) {
    std::cout << (cfg.format == ef::ReportFormat::csv ? ef::to_csv(report.rows) : ef::to_json(report.rows));
  } else {
    ef::emit_report(report, cfg.format, cfg.output);
  }
  return 0;
}

int summarize(const std::string& input, const std::string& out) {
  const auto rows = ef::read_report(input);
  const std::string text = ef::summary_to_csv(ef::summarize(rows));
  if (out.empty()) {
    std::cout << text;
    return 0;
  }
  std::FILE* f = std::fopen(out.c_str(), "wb");
  if (f == nullptr) throw std::runtime_error("cannot write " + out);
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  if (std::fclose(f) != 0 || !ok) throw std::runtime_error("failed writing " + out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble decision fusion, cyclic checkpoint ensembles and multi-teacher distillation"};
  app.require_subcommand(1);

  CommonFlags flags;
  struct Sub {
    ef::ExperimentKind kind;
    const char* help;
  };
  const Sub subs[] = {
      {ef::ExperimentKind::vote, "Weak-MLP pool fused by voting rules"},
      {ef::ExperimentKind::cyclic, "Snapshot / FGE checkpoint ensembles vs independent models"},
      {ef::ExperimentKind::distill, "Multi-teacher distillation grid"},
      {ef::ExperimentKind::spatial, "Spatial election Monte Carlo"},
  };
  std::optional<ef::ExperimentKind> chosen;
  for (const auto& s : subs) {
    auto* cmd = app.add_subcommand(std::string(ef::to_string(s.kind)), s.help);
    add_common(cmd, flags);
    cmd->callback([&chosen, kind = s.kind] { chosen = kind; });
  }
  std::string report_in;
  std::string report_out;
  auto* report_cmd = app.add_subcommand("report", "Mean and standard deviation per cell and metric");
  report_cmd->add_option("input", report_in, "Report written by another subcommand")->required();
  report_cmd->add_option("--out", report_out, "Summary CSV path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (report_cmd->parsed()) return summarize(report_in, report_out);
    return run(*chosen, flags);
  } catch (const ef::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ef::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
