// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "replan/replan.hpp"

using namespace replan;

namespace {

std::filesystem::path config(const std::string& rel) { return std::filesystem::path(REPLAN_CONFIG_DIR) / rel; }

Scenario scenario(const std::string& name) { return load_scenario(config("scenarios/" + name + ".json")); }

struct Check {
  bool ok = true;
  std::string detail;
  void require(bool cond, const std::string& why) {
    if (!cond && ok) {
      ok = false;
      detail = why;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

int count(const std::vector<SessionEvent>& events, EventKind kind, const char* verdict = nullptr) {
  int n = 0;
  for (const auto& e : events) {
    if (e.kind == kind && (verdict == nullptr || e.payload.at("verdict") == verdict)) ++n;
  }
  return n;
}

// A1: clean oracle runs.
Check clean_runs() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<Scenario> fixation = {scenario("fixation_left"), scenario("fixation_right"),
                                          scenario("fixation_raise")};
  int fix_ok = 0;
  for (int t = 0; t < 20; ++t) {
    const Scenario& sc = fixation[t % fixation.size()];
    fix_ok += run_trial(sc, AblationMode::Full, t, trial_seed(0, sc.name, t)).success;
  }
  const auto tool = scenario("tool_prep_initial");
  int tool_ok = 0;
  for (int t = 0; t < 10; ++t) tool_ok += run_trial(tool, AblationMode::Full, t, trial_seed(0, tool.name, t)).success;
  const double secs = seconds_since(t0);
  c.require(fix_ok == 20, "fixation " + std::to_string(fix_ok) + "/20");
  c.require(tool_ok == 10, "tool prep " + std::to_string(tool_ok) + "/10");
  c.require(secs < 5.0, fmt("took %.2f s", secs));
  if (c.ok) c.detail = "fixation 20/20, tool prep 10/10" + fmt(", %.2f s", secs);
  return c;
}

// A2: shipped battery.
Check battery() {
  Check c;
  const auto report = validate_correction_models(load_battery(config("correction_battery.json")));
  std::string summary;
  for (const char* cat : {"out_of_set", "wrong_direction", "no_change"}) {
    auto it = report.categories.find(cat);
    const int rejects = it == report.categories.end() ? -1 : it->second.rejects;
    const int cases = it == report.categories.end() ? -1 : it->second.cases;
    c.require(cases == 10 && rejects == 10, std::string(cat) + " " + std::to_string(rejects) + "/" + std::to_string(cases));
    summary += std::string(cat) + " " + std::to_string(rejects) + "/10, ";
  }
  for (const char* cat : {"clean_internal", "clean_external"}) {
    auto it = report.categories.find(cat);
    const int rejects = it == report.categories.end() ? -1 : it->second.rejects;
    const int cases = it == report.categories.end() ? -1 : it->second.cases;
    c.require(cases == 10 && rejects == 0, std::string(cat) + " false positives " + std::to_string(rejects));
    summary += std::string(cat) + " fp " + std::to_string(rejects) + "/10, ";
  }
  if (c.ok) c.detail = summary.substr(0, summary.size() - 2);
  return c;
}

// A3: ablation ordering under the committed fault config.
Check ablation() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const auto sc = load_scenario(config("table3_like.json"));
  const auto report = run_experiment({sc}, all_modes(), 200, 0);
  const double secs = seconds_since(t0);
  const double full = report.rate(AblationMode::Full);
  const double ni = report.rate(AblationMode::NoInternal);
  const double ne = report.rate(AblationMode::NoExternal);
  const double none = report.rate(AblationMode::None);
  const double eps = 1e-12;
  c.require(full >= 0.6 - eps && full <= 0.8 + eps, fmt("Full %.3f outside [0.6, 0.8]", full));
  c.require(full - ni >= 0.05 - eps, fmt("Full-NoInternal gap %.3f", full - ni));
  c.require(ni - ne >= 0.05 - eps, fmt("NoInternal-NoExternal gap %.3f", ni - ne));
  c.require(ne - none >= 0.05 - eps, fmt("NoExternal-None gap %.3f", ne - none));
  c.require(secs < 60.0, fmt("took %.1f s", secs));
  if (c.ok) c.detail = fmt("%.3f > %.3f > %.3f > %.3f", full, ni, ne, none) + fmt(", %.1f s", secs);
  return c;
}

// A4: termination after exactly cap rejections.
Check termination() {
  Check c;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    auto logic = scenario("fixation_left");
    logic.faults = {1.0, 0.0, 0.0};
    const auto r = run_session(logic, AblationMode::Full, seed);
    c.require(r.outcome.kind == OutcomeKind::SelectionFailure, "logic faults did not end in SelectionFailure");
    c.require(count(r.events, EventKind::InternalVerdict, "reject") == 3, "internal reject count != 3");
    c.require(count(r.events, EventKind::ActionExecuted) == 0, "action executed under persistent logic faults");

    auto freeze = scenario("fixation_left");
    freeze.noise.p_freeze = 1.0;
    freeze.sampler.count_per_side = 3;
    const auto f = run_session(freeze, AblationMode::Full, seed);
    c.require(f.outcome.kind == OutcomeKind::PhysicalFailure, "freeze did not end in PhysicalFailure");
    c.require(count(f.events, EventKind::ExternalVerdict, "reject") == 3, "external reject count != 3");
  }
  if (c.ok) c.detail = "25 seeds: SelectionFailure after 3 internal rejects, PhysicalFailure after 3 external rejects";
  return c;
}

// A5: determinism and context discipline.
Check determinism() {
  Check c;
  const auto sc = load_scenario(config("table3_like.json"));
  int sessions = 0;
  int rejects = 0;
  for (auto mode : all_modes()) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      nlohmann::json executed;
      bool observation_ok = true;
      auto sink = [&](const SessionEvent& e, const SessionState& s) {
        if (e.kind == EventKind::ActionExecuted) executed = e.payload.at("observation");
        if (e.kind == EventKind::ExternalVerdict && e.is_reject() && to_json(s.last_observation) != executed) {
          observation_ok = false;
        }
      };
      const auto r = run_session(sc, mode, seed, sink);
      const auto log = serialize_log(r.events, false);
      for (int k = 0; k < 2; ++k) c.require(serialize_log(run_session(sc, mode, seed).events, false) == log, "log differs on rerun");
      c.require(observation_ok, "retained observation differs from x_new after external reject");

      std::size_t size = 0;
      for (std::size_t i = 0; i < r.events.size(); ++i) {
        const auto& e = r.events[i];
        if (e.kind == EventKind::InstructionReceived) size = 0;
        if (e.is_reject()) {
          ++rejects;
          c.require(i + 1 < r.events.size() && r.events[i + 1].kind == EventKind::FeedbackAppended,
                    "reject not followed by feedback");
          c.require(i + 2 >= r.events.size() || r.events[i + 2].kind != EventKind::FeedbackAppended,
                    "reject followed by more than one feedback");
        }
        if (e.kind == EventKind::FeedbackAppended) {
          const auto now = e.payload.at("context_size").get<std::size_t>();
          c.require(now >= size, "feedback list shrank within an instruction");
          size = now;
        }
      }
      ++sessions;
    }
  }
  if (c.ok) c.detail = std::to_string(sessions) + " sessions x3 reruns, " + std::to_string(rejects) + " rejects checked";
  return c;
}

// A6: correction-model purity.
struct Transition {
  ActionKind kind;
  Arm arm;
  bool executed;
  Vec3 grasp_offset;      // Grasp: target minus current grasp point
  std::string taken;      // Pickup/Swap
  std::string returned;   // Return/Swap
};

bool oracle_verdict(const Transition& t, const ExpectedDelta& e) {
  if (std::holds_alternative<NoExpectation>(e)) return true;
  if (!t.executed) return false;
  if (const auto* m = std::get_if<GripperMove>(&e)) {
    return t.kind == ActionKind::Grasp && t.arm == m->arm && t.grasp_offset.dot(m->direction) >= m->min_displacement_m;
  }
  if (const auto* a = std::get_if<ToolAcquired>(&e)) return !t.taken.empty() && t.taken == a->tool_name;
  const auto& r = std::get<ToolReturned>(e);
  return !t.returned.empty() && t.returned == r.tool_name;
}

Check purity() {
  Check c;
  const WorkcellState base = load_workcell(read_json_file(config("workcells/default.json")));
  RngStream rng(0);
  const NoiseModel off{};
  const auto instr = parse_instruction("proceed");

  std::vector<std::string> tools;
  for (const auto& s : base.tool_stand) tools.push_back(s.tool->name);
  std::vector<ExpectedDelta> expectations = {NoExpectation{}};
  for (Arm arm : {Arm::Left, Arm::Right}) {
    for (Vec3 d : {Vec3{1, 0, 0}, Vec3{-1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, -1, 0}}) {
      for (double min : {0.025, 0.075}) expectations.push_back(GripperMove{arm, d, min});
    }
  }
  for (const auto& n : tools) {
    expectations.push_back(ToolAcquired{n});
    expectations.push_back(ToolReturned{n});
  }

  int cases = 0;
  auto run = [&](const WorkcellState& pre_state, const ExecutableAction& a, const Transition& t) {
    const WorkcellState post_state = apply_action(pre_state, a);
    const Observation pre = observe(pre_state, off, rng);
    const Observation post = observe(post_state, off, rng, pre);
    for (const auto& e : expectations) {
      const bool got = external_check(pre, post, instr, e).accepted();
      c.require(got == oracle_verdict(t, e), std::string("mismatch on ") + std::string(to_string(a.kind)) + " " +
                                                 to_json(e).dump() + (t.executed ? " executed" : " no-op"));
      ++cases;
    }
  };

  const auto tool_slot = [&](const WorkcellState& s, const std::string& name) {
    for (const auto& slot : s.tool_stand) {
      if (slot.tool && slot.tool->name == name) return slot.slot_id;
    }
    return -1;
  };

  for (bool executed : {true, false}) {
    // Grasp: every lattice point on both frames.
    for (const char* frame_id : {"frame_a", "frame_b"}) {
      const auto set = generate_grasp_candidates(base, frame_id, Arm::Left, {});
      for (const auto& cand : set.candidates) {
        ExecutableAction a{ActionKind::Grasp, Arm::Left, cand.id, frame_id, cand.grasp()->pose, 0, !executed};
        run(base, a, {ActionKind::Grasp, Arm::Left, executed,
                      cand.grasp()->pose.position - set.current->grasp()->pose.position, "", ""});
      }
    }
    for (const auto& name : tools) {
      const int slot = tool_slot(base, name);
      run(base, {ActionKind::PickupTool, Arm::Right, tool_target_id(slot), "", {}, slot, !executed},
          {ActionKind::PickupTool, Arm::Right, executed, {}, name, ""});

      const WorkcellState holding = apply_action(base, {ActionKind::PickupTool, Arm::Right, "", "", {}, slot, false});
      run(holding, {ActionKind::ReturnTool, Arm::Right, "", "", {}, 0, !executed},
          {ActionKind::ReturnTool, Arm::Right, executed, {}, "", name});
      for (const auto& other : tools) {
        if (other == name) continue;
        const int other_slot = tool_slot(holding, other);
        run(holding, {ActionKind::SwapTool, Arm::Right, tool_target_id(other_slot), "", {}, other_slot, !executed},
            {ActionKind::SwapTool, Arm::Right, executed, {}, other, name});
      }
    }
  }

  // Mirrored-candidate exclusivity on the default lattice of each frame.
  int pairs = 0;
  const Observation obs = observe(base, off, rng);
  const std::vector<std::pair<const char*, std::vector<const char*>>> lattice = {
      {"frame_a", {"Move a little to the left", "Move to the right", "Move much more to the left", "shift right a lot"}},
      {"frame_b", {"Raise it a bit higher", "Move it up", "Lower it slightly", "Move much more down"}}};
  for (const auto& [frame_id, texts] : lattice) {
    const auto set = generate_grasp_candidates(base, frame_id, Arm::Left, {});
    for (const char* text : texts) {
      const auto p = parse_instruction(text);
      for (const auto& cand : set.candidates) {
        const auto mirror = detail::mirror_of(set, cand.id);
        c.require(mirror.has_value(), "missing mirror for " + cand.id);
        if (!mirror) continue;
        const bool a = internal_check(obs, {cand.id, "", false}, p, set).accepted();
        const bool b = internal_check(obs, {*mirror, "", false}, p, set).accepted();
        c.require(a != b, std::string("mirrored pair not exclusive: ") + cand.id + " / " + *mirror + " for '" + text + "'");
        ++pairs;
      }
    }
  }
  if (c.ok) c.detail = std::to_string(cases) + " transition x expectation cases, " + std::to_string(pairs) + " mirrored pairs";
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Check()>>> criteria = {
      {"A1 clean-run parity", clean_runs},           {"A2 adversarial detection", battery},
      {"A3 ablation ordering", ablation},            {"A4 termination contracts", termination},
      {"A5 determinism and context", determinism},   {"A6 correction-model purity", purity},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Check c;
    try {
      c = fn();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s %s: %s\n", c.ok ? "PASS" : "FAIL", name, c.detail.c_str());
    failed += !c.ok;
  }
  return failed == 0 ? 0 : 1;
}
