#pragma once

// Dual correction: a pre-execution semantic filter (membership + directional
// or comparative consistency) and a post-execution physical verifier that
// only ever sees the two observations.

#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

#include "replan/lang.hpp"
#include "replan/reasoner.hpp"
#include "replan/scene.hpp"
#include "replan/targets.hpp"

namespace replan {

struct Verdict {
  std::optional<Feedback> rejection;  // empty on Accept

  static Verdict accept() { return {}; }
  static Verdict reject(Feedback f) { return {std::move(f)}; }

  bool accepted() const { return !rejection.has_value(); }
  friend bool operator==(const Verdict&, const Verdict&) = default;
};

inline nlohmann::json to_json(const Verdict& v) {
  return {{"verdict", v.accepted() ? "accept" : "reject"}, {"feedback", v.accepted() ? "" : v.rejection->message}};
}

struct GripperMove {
  Arm arm = Arm::Left;
  Vec3 direction;  // unit
  double min_displacement_m = 0.0;
  friend bool operator==(const GripperMove&, const GripperMove&) = default;
};
struct ToolAcquired {
  std::string tool_name;
  friend bool operator==(const ToolAcquired&, const ToolAcquired&) = default;
};
struct ToolReturned {
  std::string tool_name;
  friend bool operator==(const ToolReturned&, const ToolReturned&) = default;
};
struct NoExpectation {
  friend bool operator==(const NoExpectation&, const NoExpectation&) = default;
};

using ExpectedDelta = std::variant<GripperMove, ToolAcquired, ToolReturned, NoExpectation>;

namespace detail {

inline Feedback logic_feedback(const Observation& obs, const std::string& id, const std::string& text) {
  return {FeedbackKind::Logic, "LOGIC: " + text, obs.captured_at_step, id};
}

inline Feedback phys_feedback(const Observation& post, const std::string& id, const std::string& text) {
  return {FeedbackKind::Physical, "PHYS: " + text, post.captured_at_step, id};
}

}  // namespace detail

inline Verdict internal_check(const Observation& obs, const Selection& sel, const ParsedInstruction& instr,
                              const CandidateSet& set) {
  const auto index = set.index_of(sel.target_id);
  if (!index) {
    return Verdict::reject(detail::logic_feedback(
        obs, sel.target_id,
        "target '" + sel.target_id + "' not among candidates; choose one of the listed candidate ids"));
  }
  const ActionTarget& target = set.candidates[*index];

  if (const auto* d = instr.directional(); d && target.grasp() && set.current && set.current->grasp()) {
    const Vec3 offset = target.grasp()->pose.position - set.current->grasp()->pose.position;
    const double along = offset.dot(d->direction());
    if (along <= 0.0) {
      const std::string dir = std::string(d->sign > 0 ? "+" : "-") + std::string(to_string(d->axis));
      return Verdict::reject(detail::logic_feedback(
          obs, sel.target_id,
          "target '" + sel.target_id + "' moves opposite to instructed direction " + dir + " (offset " +
              detail::format_mm(along) + " along " + dir + ")"));
    }
  }
  if (const auto* c = instr.comparative(); c && target.tool() && set.current && set.current->tool()) {
    const double ref = set.current->tool()->tool.bit_size_mm;
    const double size = target.tool()->tool.bit_size_mm;
    const bool bigger = c->direction == CompareDirection::Bigger;
    if (bigger ? !(size > ref) : !(size < ref)) {
      return Verdict::reject(detail::logic_feedback(
          obs, sel.target_id,
          "target '" + sel.target_id + "' (" + detail::format_size(size) + ") is not " +
              (bigger ? "bigger" : "smaller") + " than the current tool (" + detail::format_size(ref) + ")"));
    }
  }
  return Verdict::accept();
}

// Directional grasp -> GripperMove (min displacement = half the lattice
// spacing); tool targets -> ToolAcquired; anything else -> NoExpectation.
inline ExpectedDelta expected_delta_for(const ParsedInstruction& instr, const Selection& sel,
                                        const CandidateSet& set) {
  const ActionTarget* target = set.find(sel.target_id);
  if (target == nullptr) return NoExpectation{};
  if (const auto* tc = target->tool()) return ToolAcquired{tc->tool.name};
  if (const auto* d = instr.directional(); d && target->grasp()) {
    const double spacing = set.lattice_spacing.value_or(2.0 * kMinDetectableDisplacement);
    return GripperMove{target->grasp()->arm, d->direction(), 0.5 * spacing};
  }
  return NoExpectation{};
}

inline Verdict external_check(const Observation& pre, const Observation& post, const ParsedInstruction& instr,
                              const ExpectedDelta& expected, const std::string& subject_id = {}) {
  const SceneDelta delta = diff(pre, post);
  (void)instr;

  if (const auto* move = std::get_if<GripperMove>(&expected)) {
    const Vec3 d = delta.displacement_of(move->arm).value_or(Vec3{});
    const double along = d.dot(move->direction);
    if (along >= move->min_displacement_m) return Verdict::accept();
    if (d.norm() == 0.0) {
      return Verdict::reject(detail::phys_feedback(
          post, subject_id,
          "no pose change detected for the " + std::string(to_string(move->arm)) + " gripper; the grasp did not move"));
    }
    return Verdict::reject(detail::phys_feedback(
        post, subject_id,
        "gripper moved " + detail::format_mm(along) + " along the instructed direction; expected at least " +
            detail::format_mm(move->min_displacement_m)));
  }
  if (const auto* acq = std::get_if<ToolAcquired>(&expected)) {
    bool left_slot = false;
    for (const auto& c : delta.slot_changes) {
      if (c.kind == SlotChangeKind::Removed && c.tool_name == acq->tool_name) left_slot = true;
    }
    bool held = false;
    for (const auto& c : delta.held_changes) {
      if (c.kind == HeldChangeKind::Acquired && c.tool_name == acq->tool_name) held = true;
    }
    if (left_slot && held) return Verdict::accept();
    std::string what = !left_slot ? "'" + acq->tool_name + "' still appears in its slot"
                                  : "'" + acq->tool_name + "' does not appear in a gripper";
    return Verdict::reject(detail::phys_feedback(post, subject_id, "tool not acquired: " + what));
  }
  if (const auto* ret = std::get_if<ToolReturned>(&expected)) {
    bool in_slot = false;
    for (const auto& c : delta.slot_changes) {
      if (c.kind == SlotChangeKind::Returned && c.tool_name == ret->tool_name) in_slot = true;
    }
    bool released = false;
    for (const auto& c : delta.held_changes) {
      if (c.kind == HeldChangeKind::Released && c.tool_name == ret->tool_name) released = true;
    }
    if (in_slot && released) return Verdict::accept();
    return Verdict::reject(
        detail::phys_feedback(post, subject_id, "tool '" + ret->tool_name + "' was not returned to its slot"));
  }
  return Verdict::accept();
}

inline nlohmann::json to_json(const ExpectedDelta& e) {
  if (const auto* m = std::get_if<GripperMove>(&e)) {
    return {{"type", "gripper_move"}, {"arm", std::string(to_string(m->arm))}, {"direction", m->direction},
            {"min_displacement_m", m->min_displacement_m}};
  }
  if (const auto* a = std::get_if<ToolAcquired>(&e)) return {{"type", "tool_acquired"}, {"tool", a->tool_name}};
  if (const auto* r = std::get_if<ToolReturned>(&e)) return {{"type", "tool_returned"}, {"tool", r->tool_name}};
  return {{"type", "none"}};
}

}  // namespace replan
