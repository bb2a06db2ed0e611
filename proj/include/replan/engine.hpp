#pragma once

// The replanning protocol as an explicit state machine.
//
//   for each instruction:
//     done?            -> end session
//     reset context to the instruction
//     loop:
//       select target from (x_t, context, O)
//       internal check (if enabled): reject -> append logic feedback, retry
//       execute, capture x_new
//       external check (if enabled): reject -> append physical feedback,
//                                    x_t <- x_new, retry
//       accept -> wait for next instruction
//
// Consecutive rejects are counted per model and per instruction; reaching a
// cap ends the session. Every transition emits exactly one SessionEvent.

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "replan/correction.hpp"
#include "replan/error.hpp"
#include "replan/lang.hpp"
#include "replan/reasoner.hpp"
#include "replan/rng.hpp"
#include "replan/scenario.hpp"
#include "replan/scene.hpp"
#include "replan/targets.hpp"

namespace replan {

enum class AblationMode { Full, NoInternal, NoExternal, None };

inline std::string_view to_string(AblationMode m) {
  switch (m) {
    case AblationMode::Full: return "full";
    case AblationMode::NoInternal: return "no-internal";
    case AblationMode::NoExternal: return "no-external";
    case AblationMode::None: return "none";
  }
  return "?";
}

inline AblationMode parse_mode(std::string_view text) {
  if (text == "full") return AblationMode::Full;
  if (text == "no-internal") return AblationMode::NoInternal;
  if (text == "no-external") return AblationMode::NoExternal;
  if (text == "none") return AblationMode::None;
  throw Error(ErrorCode::ConfigError, "unknown mode '" + std::string(text) + "'");
}

inline bool internal_enabled(AblationMode m) { return m == AblationMode::Full || m == AblationMode::NoExternal; }
inline bool external_enabled(AblationMode m) { return m == AblationMode::Full || m == AblationMode::NoInternal; }

enum class Phase { AwaitingInstruction, Selecting, InternalChecking, Executing, ExternalChecking, Terminated };

inline std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::AwaitingInstruction: return "awaiting_instruction";
    case Phase::Selecting: return "selecting";
    case Phase::InternalChecking: return "internal_checking";
    case Phase::Executing: return "executing";
    case Phase::ExternalChecking: return "external_checking";
    case Phase::Terminated: return "terminated";
  }
  return "?";
}

enum class EventKind {
  InstructionReceived,
  TargetSelected,
  InternalVerdict,
  ActionExecuted,
  ExternalVerdict,
  FeedbackAppended,
  SessionEnded,
};

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::InstructionReceived: return "instruction_received";
    case EventKind::TargetSelected: return "target_selected";
    case EventKind::InternalVerdict: return "internal_verdict";
    case EventKind::ActionExecuted: return "action_executed";
    case EventKind::ExternalVerdict: return "external_verdict";
    case EventKind::FeedbackAppended: return "feedback_appended";
    case EventKind::SessionEnded: return "session_ended";
  }
  return "?";
}

struct SessionEvent {
  int step = 0;  // emission index within the session
  int t = 0;     // workcell step index at emission
  EventKind kind = EventKind::InstructionReceived;
  nlohmann::json payload;
  double wall_ms = 0.0;  // latency of the stage that produced the event

  bool is_reject() const {
    return (kind == EventKind::InternalVerdict || kind == EventKind::ExternalVerdict) &&
           payload.at("verdict") == "reject";
  }
};

// Comparison form leaves out wall time; it is what determinism is asserted on.
inline nlohmann::json to_json(const SessionEvent& e, bool with_timing = true) {
  nlohmann::json j = {{"step", e.step}, {"t", e.t}, {"kind", std::string(to_string(e.kind))}, {"payload", e.payload}};
  if (with_timing) j["wall_ms"] = e.wall_ms;
  return j;
}

inline std::string serialize_log(const std::vector<SessionEvent>& events, bool with_timing = true) {
  std::string out;
  for (const auto& e : events) {
    out += to_json(e, with_timing).dump();
    out += '\n';
  }
  return out;
}

enum class OutcomeKind { CompletedAllInstructions, SelectionFailure, PhysicalFailure, FormatHalt, NoCandidates };

inline std::string_view to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::CompletedAllInstructions: return "completed_all_instructions";
    case OutcomeKind::SelectionFailure: return "selection_failure";
    case OutcomeKind::PhysicalFailure: return "physical_failure";
    case OutcomeKind::FormatHalt: return "format_halt";
    case OutcomeKind::NoCandidates: return "no_candidates";
  }
  return "?";
}

struct SessionOutcome {
  OutcomeKind kind = OutcomeKind::CompletedAllInstructions;
  std::string detail;
};

// True workcell before and after one instruction's replanning loop; used by
// the harness for ground-truth scoring.
struct InstructionRecord {
  ParsedInstruction instruction;
  WorkcellState before;
  WorkcellState after;
  std::optional<double> lattice_spacing;
  bool completed = false;
};

struct SessionState {
  WorkcellState workcell;
  Observation last_observation;
  ReasoningContext context;
  CandidateSet candidate_set;
  int logic_rejects = 0;
  int phys_rejects = 0;
  Phase phase = Phase::AwaitingInstruction;
  std::optional<SessionOutcome> outcome;
};

inline nlohmann::json to_json(const SessionState& s) {
  nlohmann::json feedback = nlohmann::json::array();
  for (const auto& f : s.context.feedback()) feedback.push_back(f);
  nlohmann::json j = {
      {"phase", std::string(to_string(s.phase))},
      {"observation", to_json(s.last_observation)},
      {"candidate_set", to_json(s.candidate_set)},
      {"context",
       {{"instruction", to_json(s.context.base_instruction())},
        {"feedback", feedback},
        {"rendered", s.context.render()}}},
      {"counters", {{"logic_rejects", s.logic_rejects}, {"phys_rejects", s.phys_rejects}}},
      {"outcome", nullptr},
  };
  if (s.outcome) {
    j["outcome"] = {{"kind", std::string(to_string(s.outcome->kind))}, {"detail", s.outcome->detail}};
  }
  return j;
}

using EventSink = std::function<void(const SessionEvent&, const SessionState&)>;

// Builds the executable action for a selection; the target must be a
// selectable candidate (not the current one).
inline ExecutableAction make_action(const Selection& sel, const CandidateSet& set, const WorkcellState& state,
                                    Arm arm) {
  const auto index = set.index_of(sel.target_id);
  if (!index) throw Error(ErrorCode::UnresolvableTarget, "target '" + sel.target_id + "' is not a candidate");
  const ActionTarget& target = set.candidates[*index];
  ExecutableAction action;
  action.target_id = target.id;
  action.execution_failed = sel.execution_fault;
  if (const auto* g = target.grasp()) {
    action.kind = ActionKind::Grasp;
    action.arm = g->arm;
    action.frame_id = g->frame_id;
    action.grasp_pose = g->pose;
  } else {
    const auto* tc = target.tool();
    action.arm = arm;
    const Gripper* gripper = state.find_gripper(arm);
    action.kind = (gripper && gripper->held && gripper->held->tool) ? ActionKind::SwapTool : ActionKind::PickupTool;
    action.slot_id = tc->slot_id;
  }
  return action;
}

class Session {
 public:
  Session(Scenario scenario, std::unique_ptr<Reasoner> reasoner, AblationMode mode, std::uint64_t seed,
          EventSink sink = {})
      : scenario_(std::move(scenario)),
        reasoner_(std::move(reasoner)),
        mode_(mode),
        perception_rng_(seed, scenario_.noise.stream_label),
        sink_(std::move(sink)) {
    state_.workcell = scenario_.workcell;
    state_.last_observation = observe(state_.workcell, scenario_.noise, perception_rng_);
    if (!scenario_.policy.regenerate_candidates) state_.candidate_set = generate_candidates();
  }

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const SessionState& state() const { return state_; }
  const std::vector<SessionEvent>& events() const { return events_; }
  const std::vector<InstructionRecord>& records() const { return records_; }
  const Scenario& scenario() const { return scenario_; }
  AblationMode mode() const { return mode_; }
  bool terminated() const { return state_.phase == Phase::Terminated; }

  // Runs one instruction through the replanning loop. Returns the step of the
  // InstructionReceived event.
  int submit(const std::string& text) {
    if (state_.phase != Phase::AwaitingInstruction) {
      throw Error(ErrorCode::WrongPhase, "session is " + std::string(to_string(state_.phase)));
    }
    const int ack = static_cast<int>(events_.size());
    process(text);
    return ack;
  }

 private:
  using Clock = std::chrono::steady_clock;

  static double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  }

  CandidateSet generate_candidates() const {
    if (scenario_.task == TaskKind::Fixation) {
      return generate_grasp_candidates(state_.workcell, scenario_.frame_id, scenario_.arm, scenario_.sampler);
    }
    return generate_tool_candidates(state_.workcell);
  }

  void emit(EventKind kind, nlohmann::json payload, double wall_ms = 0.0) {
    SessionEvent e{static_cast<int>(events_.size()), state_.workcell.step_index, kind, std::move(payload), wall_ms};
    events_.push_back(e);
    if (sink_) sink_(events_.back(), state_);
  }

  void end(OutcomeKind kind, std::string detail) {
    state_.phase = Phase::Terminated;
    state_.outcome = SessionOutcome{kind, detail};
    if (!records_.empty() && !records_.back().completed) records_.back().after = state_.workcell;
    emit(EventKind::SessionEnded, {{"outcome", std::string(to_string(kind))}, {"detail", detail}});
  }

  void append_feedback(const Feedback& f) {
    state_.context.append(f);
    emit(EventKind::FeedbackAppended, {{"kind", std::string(to_string(f.kind))},
                                       {"message", f.message},
                                       {"subject_id", f.subject_id},
                                       {"context_size", state_.context.feedback().size()}});
  }

  void process(const std::string& text) {
    const auto started = Clock::now();
    ParsedInstruction instr = parse_instruction(text, scenario_.lexicon);

    if (instr.is_done()) {
      emit(EventKind::InstructionReceived, {{"text", text}, {"parsed", to_json(instr)}, {"candidates", nullptr}},
           ms_since(started));
      end(OutcomeKind::CompletedAllInstructions, "operator ended the collaboration");
      return;
    }

    if (scenario_.policy.regenerate_candidates) state_.candidate_set = generate_candidates();
    auto history = std::move(state_.context.action_history);
    state_.context = ReasoningContext(instr, turn_++);
    if (scenario_.policy.expose_action_history) state_.context.action_history = std::move(history);
    state_.logic_rejects = 0;
    state_.phys_rejects = 0;
    records_.push_back({instr, state_.workcell, state_.workcell, state_.candidate_set.lattice_spacing, false});

    emit(EventKind::InstructionReceived,
         {{"text", text}, {"parsed", to_json(instr)}, {"candidates", to_json(state_.candidate_set)}},
         ms_since(started));

    if (state_.candidate_set.empty()) {
      end(OutcomeKind::NoCandidates, "no action target candidates available");
      return;
    }

    for (int attempt = 0;; ++attempt) {
      state_.phase = Phase::Selecting;
      auto t0 = Clock::now();
      Selection sel;
      try {
        sel = reasoner_->select(state_.last_observation, state_.context, state_.candidate_set);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NoFeasibleTarget) {
          end(OutcomeKind::SelectionFailure, e.what());
        } else if (e.code() == ErrorCode::MalformedReply || e.code() == ErrorCode::TransportError) {
          end(OutcomeKind::FormatHalt, e.what());
        } else {
          throw;
        }
        return;
      }
      emit(EventKind::TargetSelected,
           {{"target_id", sel.target_id}, {"rationale", sel.rationale}, {"attempt", attempt}}, ms_since(t0));

      if (internal_enabled(mode_)) {
        state_.phase = Phase::InternalChecking;
        t0 = Clock::now();
        const Verdict v = internal_check(state_.last_observation, sel, instr, state_.candidate_set);
        auto payload = to_json(v);
        payload["target_id"] = sel.target_id;
        emit(EventKind::InternalVerdict, payload, ms_since(t0));
        if (!v.accepted()) {
          ++state_.logic_rejects;
          append_feedback(*v.rejection);
          if (state_.logic_rejects >= scenario_.caps.internal) {
            end(OutcomeKind::SelectionFailure,
                std::to_string(state_.logic_rejects) + " consecutive internal rejections");
            return;
          }
          continue;
        }
        state_.logic_rejects = 0;
      }

      state_.phase = Phase::Executing;
      t0 = Clock::now();
      ExecutableAction action;
      try {
        action = make_action(sel, state_.candidate_set, state_.workcell, scenario_.arm);
        state_.workcell = apply_action(state_.workcell, action);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::UnresolvableTarget || e.code() == ErrorCode::ArmOccupied) {
          end(OutcomeKind::FormatHalt, std::string("selection not executable: ") + e.what());
          return;
        }
        throw;
      }
      const Observation pre = state_.last_observation;
      const Observation x_new = observe(state_.workcell, scenario_.noise, perception_rng_, state_.last_observation);
      if (scenario_.policy.expose_action_history) {
        state_.context.action_history.push_back(std::string(to_string(action.kind)) + " " + action.target_id);
      }
      emit(EventKind::ActionExecuted,
           {{"target_id", action.target_id},
            {"action", std::string(to_string(action.kind))},
            {"arm", std::string(to_string(action.arm))},
            {"execution_failed", action.execution_failed},
            {"observation", to_json(x_new)}},
           ms_since(t0));
      state_.last_observation = x_new;

      if (external_enabled(mode_)) {
        state_.phase = Phase::ExternalChecking;
        t0 = Clock::now();
        const ExpectedDelta expected = expected_delta_for(instr, sel, state_.candidate_set);
        const Verdict v = external_check(pre, x_new, instr, expected, sel.target_id);
        auto payload = to_json(v);
        payload["expected"] = to_json(expected);
        emit(EventKind::ExternalVerdict, payload, ms_since(t0));
        if (!v.accepted()) {
          ++state_.phys_rejects;
          append_feedback(*v.rejection);
          if (state_.phys_rejects >= scenario_.caps.external) {
            end(OutcomeKind::PhysicalFailure,
                std::to_string(state_.phys_rejects) + " consecutive physical failures");
            return;
          }
          continue;
        }
        state_.phys_rejects = 0;
      }
      break;
    }

    records_.back().after = state_.workcell;
    records_.back().completed = true;
    state_.phase = Phase::AwaitingInstruction;
  }

  Scenario scenario_;
  std::unique_ptr<Reasoner> reasoner_;
  AblationMode mode_;
  RngStream perception_rng_;
  EventSink sink_;
  SessionState state_;
  std::vector<SessionEvent> events_;
  std::vector<InstructionRecord> records_;
  int turn_ = 0;
};

struct SessionResult {
  SessionOutcome outcome;
  std::vector<SessionEvent> events;
  std::vector<InstructionRecord> records;
};

// Drives a scripted session to termination. The script must end with a
// "done" instruction.
inline SessionResult run_session(const Scenario& scenario, std::unique_ptr<Reasoner> reasoner, AblationMode mode,
                                 std::uint64_t seed, EventSink sink = {}) {
  if (scenario.instructions.empty() || !parse_instruction(scenario.instructions.back(), scenario.lexicon).is_done()) {
    throw Error(ErrorCode::ConfigError, "scenario '" + scenario.name + "' script must end with a done instruction");
  }
  Session session(scenario, std::move(reasoner), mode, seed, std::move(sink));
  for (const auto& text : scenario.instructions) {
    if (session.terminated()) break;
    session.submit(text);
  }
  return {*session.state().outcome, session.events(), session.records()};
}

}  // namespace replan
