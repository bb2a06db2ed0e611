#pragma once

// Batch experiments: seeded trial repetition over ablation modes, ground-truth
// scoring of each session, aggregate reports, and the standalone
// correction-model battery.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "replan/correction.hpp"
#include "replan/engine.hpp"
#include "replan/error.hpp"
#include "replan/reasoner.hpp"
#include "replan/remote.hpp"
#include "replan/rng.hpp"
#include "replan/scenario.hpp"

namespace replan {

// Oracle or remote selection, always behind the fault injector so the fault
// stream is consumed identically whatever the fault probabilities are.
inline std::unique_ptr<Reasoner> make_reasoner(const Scenario& sc, std::uint64_t seed) {
  std::unique_ptr<Reasoner> base;
  if (sc.reasoner.kind == "remote") {
    base = std::make_unique<RemoteReasoner>(sc.reasoner.endpoint);
  } else {
    base = std::make_unique<OracleReasoner>();
  }
  return std::make_unique<FaultyReasoner>(std::move(base), sc.faults, RngStream(seed, "faults"));
}

inline SessionResult run_session(const Scenario& sc, AblationMode mode, std::uint64_t seed, EventSink sink = {}) {
  return run_session(sc, make_reasoner(sc, seed), mode, seed, std::move(sink));
}

// Independent of the mode, so every mode replays the same draws for a trial index.
inline std::uint64_t trial_seed(std::uint64_t base_seed, std::string_view scenario, int trial) {
  return derive_seed(base_seed ^ splitmix64(static_cast<std::uint64_t>(trial)), scenario);
}

// Did the instruction's replanning loop leave the true workcell in the state
// the operator asked for?
inline bool instruction_achieved(const InstructionRecord& rec, Arm arm) {
  if (!rec.completed) return false;
  const Gripper* before = rec.before.find_gripper(arm);
  const Gripper* after = rec.after.find_gripper(arm);
  if (before == nullptr || after == nullptr) return false;

  if (const auto* d = rec.instruction.directional()) {
    const double spacing = rec.lattice_spacing.value_or(2.0 * kMinDetectableDisplacement);
    const double along = (after->pose.position - before->pose.position).dot(d->direction());
    return along >= 0.5 * spacing;
  }
  const auto held_tool = [](const Gripper* g) -> const ToolSpec* {
    return g->held && g->held->tool ? &*g->held->tool : nullptr;
  };
  if (const auto* t = rec.instruction.tool_by_name()) {
    const ToolSpec* tool = held_tool(after);
    return tool != nullptr && tool->name.find(t->fragment) != std::string::npos;
  }
  if (const auto* c = rec.instruction.comparative()) {
    const ToolSpec* was = held_tool(before);
    const ToolSpec* now = held_tool(after);
    if (was == nullptr || now == nullptr) return false;
    return c->direction == CompareDirection::Bigger ? now->bit_size_mm > was->bit_size_mm
                                                     : now->bit_size_mm < was->bit_size_mm;
  }
  return true;
}

struct StageLatency {
  double total_ms = 0.0;
  int count = 0;
  void add(double ms) {
    total_ms += ms;
    ++count;
  }
  double mean() const { return count == 0 ? 0.0 : total_ms / count; }
};

struct TrialResult {
  std::string scenario;
  AblationMode mode = AblationMode::Full;
  int trial = 0;
  std::uint64_t seed = 0;
  SessionOutcome outcome;
  bool success = false;
  std::vector<bool> instructions_achieved;
  std::map<std::string, StageLatency> latency;
};

inline TrialResult run_trial(const Scenario& sc, AblationMode mode, int trial, std::uint64_t seed) {
  SessionResult r = run_session(sc, mode, seed);
  TrialResult out{sc.name, mode, trial, seed, r.outcome, false, {}, {}};
  bool all = r.outcome.kind == OutcomeKind::CompletedAllInstructions;
  for (const auto& rec : r.records) {
    const bool ok = instruction_achieved(rec, sc.arm);
    out.instructions_achieved.push_back(ok);
    all = all && ok;
  }
  out.success = all;
  for (const auto& e : r.events) {
    switch (e.kind) {
      case EventKind::TargetSelected: out.latency["select"].add(e.wall_ms); break;
      case EventKind::InternalVerdict: out.latency["internal"].add(e.wall_ms); break;
      case EventKind::ActionExecuted: out.latency["execute"].add(e.wall_ms); break;
      case EventKind::ExternalVerdict: out.latency["external"].add(e.wall_ms); break;
      default: break;
    }
  }
  return out;
}

struct ModeSummary {
  int trials = 0;
  int successes = 0;
  std::map<std::string, int> outcomes;
  std::map<std::string, StageLatency> latency;
  double rate() const { return trials == 0 ? 0.0 : static_cast<double>(successes) / trials; }
};

struct Report {
  nlohmann::json config;
  std::vector<AblationMode> modes;
  std::map<AblationMode, ModeSummary> summary;
  std::vector<TrialResult> trials;

  double rate(AblationMode m) const {
    auto it = summary.find(m);
    return it == summary.end() ? 0.0 : it->second.rate();
  }
};

inline const std::vector<AblationMode>& all_modes() {
  static const std::vector<AblationMode> modes = {AblationMode::Full, AblationMode::NoInternal,
                                                  AblationMode::NoExternal, AblationMode::None};
  return modes;
}

// Trials run on `jobs` worker threads; results are stored by index so the
// report does not depend on scheduling.
inline Report run_experiment(const std::vector<Scenario>& scenarios, const std::vector<AblationMode>& modes,
                             int trials, std::uint64_t base_seed, unsigned jobs = 0) {
  if (trials < 1) throw Error(ErrorCode::ConfigError, "trials must be >= 1");
  if (scenarios.empty() || modes.empty()) throw Error(ErrorCode::ConfigError, "need at least one scenario and mode");
  for (const auto& sc : scenarios) {
    if (sc.instructions.empty() || !parse_instruction(sc.instructions.back(), sc.lexicon).is_done()) {
      throw Error(ErrorCode::ConfigError, "scenario '" + sc.name + "' script must end with a done instruction");
    }
  }

  struct Job {
    std::size_t scenario;
    AblationMode mode;
    int trial;
  };
  std::vector<Job> work;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    for (AblationMode m : modes) {
      for (int t = 0; t < trials; ++t) work.push_back({s, m, t});
    }
  }

  std::vector<TrialResult> results(work.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) {
      try {
        const Job& j = work[i];
        const Scenario& sc = scenarios[j.scenario];
        results[i] = run_trial(sc, j.mode, j.trial, trial_seed(base_seed, sc.name, j.trial));
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(work.size()));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < jobs; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  Report report;
  report.modes = modes;
  nlohmann::json echo = nlohmann::json::array();
  for (const auto& sc : scenarios) echo.push_back(scenario_echo(sc));
  nlohmann::json mode_names = nlohmann::json::array();
  for (auto m : modes) mode_names.push_back(std::string(to_string(m)));
  report.config = {{"scenarios", echo}, {"modes", mode_names}, {"trials_per_mode", trials}, {"base_seed", base_seed}};
  for (auto& r : results) {
    ModeSummary& s = report.summary[r.mode];
    ++s.trials;
    if (r.success) ++s.successes;
    ++s.outcomes[std::string(to_string(r.outcome.kind))];
    for (const auto& [stage, lat] : r.latency) {
      s.latency[stage].total_ms += lat.total_ms;
      s.latency[stage].count += lat.count;
    }
  }
  report.trials = std::move(results);
  return report;
}

// Comparison form (with_timing = false) is byte-stable across reruns.
inline nlohmann::json to_json(const Report& r, bool with_timing = true) {
  nlohmann::json modes = nlohmann::json::object();
  for (auto m : r.modes) {
    const auto& s = r.summary.at(m);
    modes[std::string(to_string(m))] = {
        {"trials", s.trials}, {"successes", s.successes}, {"success_rate", s.rate()}, {"outcomes", s.outcomes}};
  }
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : r.trials) {
    trials.push_back({{"scenario", t.scenario},
                      {"mode", std::string(to_string(t.mode))},
                      {"trial", t.trial},
                      {"seed", t.seed},
                      {"outcome", std::string(to_string(t.outcome.kind))},
                      {"success", t.success},
                      {"instructions_achieved", t.instructions_achieved}});
  }
  nlohmann::json j = {{"config", r.config}, {"modes", modes}, {"trials", trials}};
  if (with_timing) {
    nlohmann::json lat = nlohmann::json::object();
    for (auto m : r.modes) {
      nlohmann::json stages = nlohmann::json::object();
      for (const auto& [stage, l] : r.summary.at(m).latency) {
        stages[stage] = {{"mean_ms", l.mean()}, {"count", l.count}};
      }
      lat[std::string(to_string(m))] = stages;
    }
    j["latency_ms"] = lat;
  }
  return j;
}

inline std::string mode_column_label(AblationMode m) {
  switch (m) {
    case AblationMode::Full: return "Full";
    case AblationMode::NoInternal: return "w/o Internal";
    case AblationMode::NoExternal: return "w/o External";
    case AblationMode::None: return "w/o Both";
  }
  return "?";
}

inline std::string format_table(const Report& r) {
  std::ostringstream head;
  std::ostringstream row;
  head << "Method       ";
  row << "Success Rate ";
  for (auto m : r.modes) {
    const auto& s = r.summary.at(m);
    char cell[64];
    std::snprintf(cell, sizeof(cell), "%d/%d (%.1f%%)", s.successes, s.trials, 100.0 * s.rate());
    const std::string label = mode_column_label(m);
    const std::size_t width = std::max(label.size(), std::string(cell).size()) + 2;
    head << "| " << label << std::string(width - label.size() - 1, ' ');
    row << "| " << cell << std::string(width - std::string(cell).size() - 1, ' ');
  }
  return head.str() + "\n" + row.str() + "\n";
}

// ---------------------------------------------------------------------------
// Correction-model battery

struct BatteryCase {
  std::string name;
  std::string category;
  std::string model;  // "internal" | "external"
  TaskKind task = TaskKind::Fixation;
  Arm arm = Arm::Left;
  std::string instruction;
  nlohmann::json selection;  // {"id"} | {"offset_steps"} | {"tool"}
  std::string hold_tool;     // tool picked up before the case runs
  bool execution_failed = false;
  NoiseModel noise;
  bool expect_reject = true;
};

struct Battery {
  WorkcellState workcell;
  std::string frame_id;
  SamplerParams sampler;
  std::uint64_t seed = 0;
  std::vector<BatteryCase> cases;
};

inline Battery battery_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {}) {
  Battery b;
  try {
    const auto& wc = doc.at("workcell");
    b.workcell = load_workcell(wc.is_string() ? read_json_file(base_dir / wc.get<std::string>()) : wc);
    b.frame_id = doc.value("frame", std::string());
    if (doc.contains("targets")) {
      b.sampler.spacing_m = doc.at("targets").value("spacing_m", b.sampler.spacing_m);
      b.sampler.count_per_side = doc.at("targets").value("count_per_side", b.sampler.count_per_side);
    }
    b.seed = doc.value("seed", std::uint64_t{0});
    const Arm default_arm = parse_arm(doc.value("arm", std::string("left")));
    for (const auto& jc : doc.at("cases")) {
      BatteryCase c;
      c.name = jc.value("name", std::string());
      c.category = jc.at("category").get<std::string>();
      c.model = jc.at("model").get<std::string>();
      if (c.model != "internal" && c.model != "external") {
        throw Error(ErrorCode::ConfigError, "case '" + c.name + "': model must be internal or external");
      }
      c.task = jc.value("task", std::string("fixation")) == "tool_prep" ? TaskKind::ToolPrep : TaskKind::Fixation;
      c.arm = jc.contains("arm") ? parse_arm(jc.at("arm").get<std::string>()) : default_arm;
      c.instruction = jc.at("instruction").get<std::string>();
      c.selection = jc.at("selection");
      c.hold_tool = jc.value("hold_tool", std::string());
      c.execution_failed = jc.value("execution_failed", false);
      if (jc.contains("noise")) {
        c.noise.p_freeze = jc.at("noise").value("p_freeze", 0.0);
        c.noise.p_tool_invisible = jc.at("noise").value("p_tool_invisible", 0.0);
      }
      c.expect_reject = jc.value("expect", std::string("reject")) == "reject";
      b.cases.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("battery: ") + e.what());
  }
  return b;
}

inline Battery load_battery(const std::filesystem::path& path) {
  return battery_from_json(read_json_file(path), path.parent_path());
}

struct CaseResult {
  std::string name;
  std::string category;
  std::string model;
  bool expect_reject = true;
  Verdict verdict;
  bool matched() const { return expect_reject != verdict.accepted(); }
};

struct CategorySummary {
  std::string model;
  int cases = 0;
  int rejects = 0;
  int matches = 0;
  bool expect_reject = true;
};

struct DetectionReport {
  std::vector<CaseResult> cases;
  std::map<std::string, CategorySummary> categories;
  bool all_matched() const {
    return std::all_of(cases.begin(), cases.end(), [](const auto& c) { return c.matched(); });
  }
};

namespace detail {

inline std::string resolve_battery_selection(const BatteryCase& c, const CandidateSet& set, const FrameObject* frame) {
  const auto& s = c.selection;
  if (s.contains("id")) return s.at("id").get<std::string>();
  if (s.contains("offset_steps")) {
    if (frame == nullptr || !set.current || !set.current->grasp() || !set.lattice_spacing) {
      throw Error(ErrorCode::ConfigError, "case '" + c.name + "': offset_steps needs a fixation task");
    }
    const int k = s.at("offset_steps").get<int>();
    const Vec3 want = set.current->grasp()->pose.position + (k * *set.lattice_spacing) * frame->axis;
    for (const auto& cand : set.candidates) {
      if ((cand.grasp()->pose.position - want).norm() < 1e-9) return cand.id;
    }
    throw Error(ErrorCode::ConfigError, "case '" + c.name + "': no candidate at offset " + std::to_string(k));
  }
  if (s.contains("tool")) {
    const auto name = s.at("tool").get<std::string>();
    for (const auto& cand : set.candidates) {
      if (cand.tool() && cand.tool()->tool.name == name) return cand.id;
    }
    throw Error(ErrorCode::ConfigError, "case '" + c.name + "': tool '" + name + "' not selectable");
  }
  throw Error(ErrorCode::ConfigError, "case '" + c.name + "': selection needs id, offset_steps or tool");
}

}  // namespace detail

// Runs each crafted case through the correction model it targets, standalone.
inline DetectionReport validate_correction_models(const Battery& battery) {
  DetectionReport report;
  const NoiseModel clean{};
  for (std::size_t i = 0; i < battery.cases.size(); ++i) {
    const BatteryCase& c = battery.cases[i];
    RngStream rng(derive_seed(battery.seed, c.name), "perception");

    WorkcellState state = battery.workcell;
    if (!c.hold_tool.empty()) {
      const ToolSlot* slot = nullptr;
      for (const auto& s : state.tool_stand) {
        if (s.tool && s.tool->name == c.hold_tool) slot = &s;
      }
      if (slot == nullptr) throw Error(ErrorCode::ConfigError, "case '" + c.name + "': unknown tool to hold");
      ExecutableAction pick{ActionKind::PickupTool, c.arm, tool_target_id(slot->slot_id), {}, {}, slot->slot_id, false};
      state = apply_action(state, pick);
      detail::refresh_priors(state);
    }

    const CandidateSet set = c.task == TaskKind::Fixation
                                 ? generate_grasp_candidates(state, battery.frame_id, c.arm, battery.sampler)
                                 : generate_tool_candidates(state);
    const ParsedInstruction instr = parse_instruction(c.instruction);
    Selection sel{detail::resolve_battery_selection(c, set, state.find_frame(battery.frame_id)), "battery case",
                  c.execution_failed};

    const Observation pre = observe(state, clean, rng);
    Verdict verdict;
    if (c.model == "internal") {
      verdict = internal_check(pre, sel, instr, set);
    } else {
      const WorkcellState next = apply_action(state, make_action(sel, set, state, c.arm));
      const Observation post = observe(next, c.noise, rng, pre);
      verdict = external_check(pre, post, instr, expected_delta_for(instr, sel, set), sel.target_id);
    }

    CaseResult r{c.name, c.category, c.model, c.expect_reject, verdict};
    CategorySummary& cat = report.categories[c.category];
    cat.model = c.model;
    cat.expect_reject = c.expect_reject;
    ++cat.cases;
    if (!verdict.accepted()) ++cat.rejects;
    if (r.matched()) ++cat.matches;
    report.cases.push_back(std::move(r));
  }
  return report;
}

inline nlohmann::json to_json(const DetectionReport& r) {
  nlohmann::json cats = nlohmann::json::object();
  for (const auto& [name, c] : r.categories) {
    cats[name] = {{"model", c.model},
                  {"cases", c.cases},
                  {"rejects", c.rejects},
                  {"matches", c.matches},
                  {"expected", c.expect_reject ? "reject" : "accept"}};
  }
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : r.cases) {
    cases.push_back({{"name", c.name},
                     {"category", c.category},
                     {"model", c.model},
                     {"expected", c.expect_reject ? "reject" : "accept"},
                     {"verdict", to_json(c.verdict)},
                     {"matched", c.matched()}});
  }
  return {{"categories", cats}, {"cases", cases}, {"all_matched", r.all_matched()}};
}

}  // namespace replan
