#pragma once

// Candidate action targets: a parametric grasp lattice along a frame axis
// (stand-in for a learned 6-DoF grasp sampler) and the tools on the stand.

#include <algorithm>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "replan/error.hpp"
#include "replan/geometry.hpp"
#include "replan/scene.hpp"

namespace replan {

struct GraspCandidate {
  Pose pose;
  Arm arm = Arm::Left;
  std::string frame_id;
  friend bool operator==(const GraspCandidate&, const GraspCandidate&) = default;
};

struct ToolCandidate {
  ToolSpec tool;
  int slot_id = 0;
  friend bool operator==(const ToolCandidate&, const ToolCandidate&) = default;
};

struct ActionTarget {
  std::string id;
  std::variant<GraspCandidate, ToolCandidate> target;

  friend bool operator==(const ActionTarget&, const ActionTarget&) = default;

  const GraspCandidate* grasp() const { return std::get_if<GraspCandidate>(&target); }
  const ToolCandidate* tool() const { return std::get_if<ToolCandidate>(&target); }
};

// `candidates` are the selectable targets; `current` is the engaged target
// (present grasp, held tool). Lookup by id covers both.
struct CandidateSet {
  std::vector<ActionTarget> candidates;
  std::optional<ActionTarget> current;
  std::optional<double> lattice_spacing;  // grasp sets only

  friend bool operator==(const CandidateSet&, const CandidateSet&) = default;

  bool empty() const { return candidates.empty(); }

  bool contains(std::string_view id) const { return index_of(id).has_value(); }

  std::optional<std::size_t> index_of(std::string_view id) const {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (candidates[i].id == id) return i;
    }
    return std::nullopt;
  }

  const ActionTarget* find(std::string_view id) const {
    if (auto i = index_of(id)) return &candidates[*i];
    if (current && current->id == id) return &*current;
    return nullptr;
  }
};

struct SamplerParams {
  double spacing_m = 0.05;
  int count_per_side = 2;
};

// Candidates sit at integer multiples of `spacing` from the arm's current
// grasp point along the frame axis, ordered by offset (negative first).
inline CandidateSet generate_grasp_candidates(const WorkcellState& state, std::string_view frame_id, Arm arm,
                                              const SamplerParams& params) {
  const FrameObject* frame = state.find_frame(frame_id);
  if (frame == nullptr) throw Error(ErrorCode::UnknownFrame, "frame '" + std::string(frame_id) + "' not in workcell");
  if (!(params.spacing_m > 0.0) || params.count_per_side < 1) {
    throw Error(ErrorCode::ConfigError, "sampler needs spacing > 0 and count >= 1");
  }
  const Gripper* gripper = state.find_gripper(arm);
  if (gripper == nullptr) throw Error(ErrorCode::ConfigError, "no gripper for arm " + std::string(to_string(arm)));

  const Vec3 origin = gripper->pose.position;
  const Quaternion orientation = frame->base_pose.orientation;

  CandidateSet set;
  set.lattice_spacing = params.spacing_m;
  set.current = ActionTarget{grasp_target_id(*frame, origin),
                             GraspCandidate{gripper->pose, arm, frame->id}};
  for (int k = -params.count_per_side; k <= params.count_per_side; ++k) {
    if (k == 0) continue;
    const Vec3 p = origin + (k * params.spacing_m) * frame->axis;
    set.candidates.push_back({grasp_target_id(*frame, p), GraspCandidate{Pose{p, orientation}, arm, frame->id}});
  }
  return set;
}

inline CandidateSet generate_tool_candidates(const WorkcellState& state) {
  CandidateSet set;
  for (const auto& slot : state.tool_stand) {
    if (slot.tool) set.candidates.push_back({tool_target_id(slot.slot_id), ToolCandidate{*slot.tool, slot.slot_id}});
  }
  for (const auto& g : state.grippers) {
    if (g.held && g.held->tool && g.held->home_slot) {
      set.current = ActionTarget{g.held->target_id, ToolCandidate{*g.held->tool, *g.held->home_slot}};
      break;
    }
  }
  return set;
}

inline Vec3 candidate_offset(const CandidateSet& set, std::string_view from_id, std::string_view to_id) {
  const ActionTarget* from = set.find(from_id);
  const ActionTarget* to = set.find(to_id);
  if (from == nullptr || to == nullptr) {
    throw Error(ErrorCode::UnresolvableTarget, "offset between '" + std::string(from_id) + "' and '" +
                                                   std::string(to_id) + "'");
  }
  if (!from->grasp() || !to->grasp()) throw Error(ErrorCode::NotAGraspTarget, "offset needs two grasp targets");
  return to->grasp()->pose.position - from->grasp()->pose.position;
}

inline void to_json(nlohmann::json& j, const ActionTarget& t) {
  if (const auto* g = t.grasp()) {
    j = {{"id", t.id}, {"type", "grasp"}, {"pose", g->pose}, {"arm", std::string(to_string(g->arm))},
         {"frame_id", g->frame_id}};
  } else {
    const auto* tc = t.tool();
    j = {{"id", t.id}, {"type", "tool"}, {"tool", tc->tool}, {"slot_id", tc->slot_id}};
  }
}

inline nlohmann::json to_json(const CandidateSet& set) {
  nlohmann::json candidates = nlohmann::json::array();
  for (const auto& c : set.candidates) candidates.push_back(c);
  return {{"candidates", candidates},
          {"current", set.current ? nlohmann::json(*set.current) : nlohmann::json(nullptr)},
          {"lattice_spacing", set.lattice_spacing ? nlohmann::json(*set.lattice_spacing) : nlohmann::json(nullptr)}};
}

}  // namespace replan
