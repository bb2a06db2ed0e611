// Command-line front end: batch experiments, correction-model battery,
// single-session event logs, fault-config calibration and the live gateway.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "replan/gateway.hpp"
#include "replan/harness.hpp"

namespace {

constexpr int kExitConfigError = 2;

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw replan::Error(replan::ErrorCode::ConfigError, "cannot write '" + path + "'");
  out << text;
}

std::vector<replan::AblationMode> parse_modes(const std::vector<std::string>& names) {
  if (names.empty() || (names.size() == 1 && names[0] == "all")) return replan::all_modes();
  std::vector<replan::AblationMode> modes;
  for (const auto& n : names) modes.push_back(replan::parse_mode(n));
  return modes;
}

struct GridPoint {
  replan::FaultConfig faults;
  double p_freeze = 0.0;
  std::vector<double> rates;
};

bool meets_ordering(const std::vector<double>& r) {
  return r[0] >= 0.6 && r[0] <= 0.8 && r[0] - r[1] >= 0.05 && r[1] - r[2] >= 0.05 && r[2] - r[3] >= 0.05;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-correction replanning simulator"};
  app.require_subcommand(1);

  std::vector<std::string> scenario_files;
  std::vector<std::string> mode_names;
  int trials = 20;
  std::uint64_t seed = 0;
  std::string out_path;
  unsigned jobs = 0;

  auto* run = app.add_subcommand("run", "Run seeded trials over ablation modes and write a report");
  run->add_option("--scenario", scenario_files, "Scenario JSON file (repeatable)")->required();
  run->add_option("--mode", mode_names, "full|no-internal|no-external|none|all (repeatable)");
  run->add_option("--trials", trials, "Trials per mode");
  run->add_option("--seed", seed, "Base seed");
  run->add_option("--out", out_path, "Report path ('-' for stdout)");
  run->add_option("--jobs", jobs, "Worker threads (0 = hardware concurrency)");

  std::string battery_path;
  auto* validate = app.add_subcommand("validate-corrections", "Run the correction-model battery");
  validate->add_option("--battery", battery_path, "Battery JSON file")->required();
  validate->add_option("--out", out_path, "Report path ('-' for stdout)");

  std::string log_scenario;
  std::string log_mode = "full";
  bool with_timing = false;
  auto* log = app.add_subcommand("log", "Run one scripted session and print its event log");
  log->add_option("--scenario", log_scenario, "Scenario JSON file")->required();
  log->add_option("--mode", log_mode, "full|no-internal|no-external|none");
  log->add_option("--seed", seed, "Session seed");
  log->add_option("--out", out_path, "Log path ('-' for stdout)");
  log->add_flag("--timing", with_timing, "Include wall-time fields");

  auto* calibrate = app.add_subcommand("calibrate", "Sweep fault/noise grid for a target ablation profile");
  calibrate->add_option("--scenario", log_scenario, "Base scenario JSON file")->required();
  calibrate->add_option("--trials", trials, "Trials per mode");
  calibrate->add_option("--seed", seed, "Base seed");
  calibrate->add_option("--jobs", jobs, "Worker threads");

  int port = 8080;
  std::string host = "127.0.0.1";
  std::string scenario_dir = "configs/scenarios";
  std::string log_dir;
  std::string static_dir;
  auto* serve = app.add_subcommand("serve", "Serve live sessions over HTTP");
  serve->add_option("--port", port, "Listen port");
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--scenarios", scenario_dir, "Directory of scenario files");
  serve->add_option("--log-dir", log_dir, "Append each session's events to <dir>/<id>.ndjson");
  serve->add_option("--static", static_dir, "Console bundle directory, served under /console");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      std::vector<replan::Scenario> scenarios;
      for (const auto& f : scenario_files) scenarios.push_back(replan::load_scenario(f));
      const auto report = replan::run_experiment(scenarios, parse_modes(mode_names), trials, seed, jobs);
      std::cerr << replan::format_table(report);
      if (!out_path.empty()) write_output(out_path, replan::to_json(report).dump(2) + "\n");
    } else if (*validate) {
      const auto report = replan::validate_correction_models(replan::load_battery(battery_path));
      for (const auto& [name, c] : report.categories) {
        std::fprintf(stderr, "%-24s %-8s %2d/%2d rejected (expected %s)\n", name.c_str(), c.model.c_str(), c.rejects,
                     c.cases, c.expect_reject ? "reject" : "accept");
      }
      if (!out_path.empty()) write_output(out_path, replan::to_json(report).dump(2) + "\n");
      return report.all_matched() ? 0 : 1;
    } else if (*log) {
      const auto sc = replan::load_scenario(log_scenario);
      const auto result = replan::run_session(sc, replan::parse_mode(log_mode), seed);
      write_output(out_path.empty() ? "-" : out_path, replan::serialize_log(result.events, with_timing));
    } else if (*calibrate) {
      const auto base = replan::load_scenario(log_scenario);
      std::vector<GridPoint> hits;
      for (double out : {0.02, 0.05, 0.1}) {
        for (double wrong : {0.1, 0.15, 0.2, 0.3}) {
          for (double exec : {0.05, 0.1, 0.15, 0.2}) {
            for (double freeze : {0.0, 0.05, 0.1, 0.2}) {
              auto sc = base;
              sc.faults = {out, wrong, exec};
              sc.noise.p_freeze = freeze;
              const auto report = replan::run_experiment({sc}, replan::all_modes(), trials, seed, jobs);
              GridPoint g{sc.faults, freeze, {}};
              for (auto m : replan::all_modes()) g.rates.push_back(report.rate(m));
              std::printf("out=%.2f wrong=%.2f exec=%.2f freeze=%.2f  %.3f %.3f %.3f %.3f%s\n", out, wrong, exec,
                          freeze, g.rates[0], g.rates[1], g.rates[2], g.rates[3],
                          meets_ordering(g.rates) ? "  *" : "");
              if (meets_ordering(g.rates)) hits.push_back(g);
            }
          }
        }
      }
      std::printf("%zu grid points satisfy the ordering and band\n", hits.size());
    } else if (*serve) {
      replan::SessionService service(scenario_dir, log_dir.empty() ? std::nullopt
                                                                   : std::optional<std::filesystem::path>(log_dir));
      replan::Gateway gateway(service, static_dir.empty() ? std::nullopt
                                                          : std::optional<std::filesystem::path>(static_dir));
      std::cerr << "listening on " << host << ":" << port << "\n";
      gateway.serve(host, port);
    }
  } catch (const replan::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == replan::ErrorCode::ConfigError ? kExitConfigError : 1;
  }
  return 0;
}
