#pragma once

// Simulated workcell: frames to be held, a tool stand, and two grippers.
// All operations are value-in/value-out; a WorkcellState is never shared.

#include <algorithm>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "replan/error.hpp"
#include "replan/geometry.hpp"
#include "replan/rng.hpp"

namespace replan {

enum class Arm { Left, Right };

inline std::string_view to_string(Arm arm) { return arm == Arm::Left ? "left" : "right"; }

inline Arm parse_arm(std::string_view text) {
  if (text == "left") return Arm::Left;
  if (text == "right") return Arm::Right;
  throw Error(ErrorCode::ConfigError, "unknown arm '" + std::string(text) + "'");
}

enum class BitKind { Hex, Phillips };

inline std::string_view to_string(BitKind kind) { return kind == BitKind::Hex ? "hex" : "phillips"; }

inline BitKind parse_bit_kind(std::string_view text) {
  if (text == "hex") return BitKind::Hex;
  if (text == "phillips") return BitKind::Phillips;
  throw Error(ErrorCode::ConfigError, "unknown bit kind '" + std::string(text) + "'");
}

struct ToolSpec {
  std::string name;
  BitKind bit_kind = BitKind::Hex;
  double bit_size_mm = 0.0;

  friend bool operator==(const ToolSpec&, const ToolSpec&) = default;
};

struct FrameObject {
  std::string id;
  Vec3 axis;  // unit vector
  double length_m = 0.0;
  Pose base_pose;  // base_pose.orientation doubles as the canonical grasp orientation

  friend bool operator==(const FrameObject&, const FrameObject&) = default;
};

struct ToolSlot {
  int slot_id = 0;
  std::optional<ToolSpec> home;  // the tool that belongs in this slot
  std::optional<ToolSpec> tool;  // the tool currently present
  std::optional<ToolSpec> prior_tool;  // contents before the last applied action

  bool occupied() const { return tool.has_value(); }

  friend bool operator==(const ToolSlot&, const ToolSlot&) = default;
};

// Reference to whatever a gripper currently holds; target_id resolves against
// the candidate catalog (grasp ids for frames, tool ids for tools).
struct HeldItem {
  std::string target_id;
  std::optional<std::string> frame_id;
  std::optional<ToolSpec> tool;
  std::optional<int> home_slot;

  friend bool operator==(const HeldItem&, const HeldItem&) = default;
};

struct Gripper {
  Arm arm = Arm::Left;
  Pose pose;
  std::optional<HeldItem> held;
  Pose prior_pose;  // pose before the last applied action

  friend bool operator==(const Gripper&, const Gripper&) = default;
};

struct WorkcellState {
  std::vector<FrameObject> frames;
  std::vector<ToolSlot> tool_stand;
  std::vector<Gripper> grippers;
  int step_index = 0;

  friend bool operator==(const WorkcellState&, const WorkcellState&) = default;

  const FrameObject* find_frame(std::string_view id) const {
    auto it = std::find_if(frames.begin(), frames.end(), [&](const auto& f) { return f.id == id; });
    return it == frames.end() ? nullptr : &*it;
  }
  const ToolSlot* find_slot(int slot_id) const {
    auto it = std::find_if(tool_stand.begin(), tool_stand.end(),
                           [&](const auto& s) { return s.slot_id == slot_id; });
    return it == tool_stand.end() ? nullptr : &*it;
  }
  ToolSlot* find_slot(int slot_id) {
    return const_cast<ToolSlot*>(std::as_const(*this).find_slot(slot_id));
  }
  const Gripper* find_gripper(Arm arm) const {
    auto it = std::find_if(grippers.begin(), grippers.end(), [&](const auto& g) { return g.arm == arm; });
    return it == grippers.end() ? nullptr : &*it;
  }
  Gripper* find_gripper(Arm arm) { return const_cast<Gripper*>(std::as_const(*this).find_gripper(arm)); }
};

// ---------------------------------------------------------------------------
// Target identifiers. Grasp ids encode the signed distance (mm, 0.1 mm
// resolution) of the grasp point from the frame base along the frame axis,
// so they are stable for a given workcell and sampler configuration.

inline std::string grasp_target_id(const FrameObject& frame, Vec3 position) {
  const double along_mm = (position - frame.base_pose.position).dot(frame.axis) * 1000.0;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%+.1f", along_mm);
  std::string text = buf;
  if (text == "-0.0") text = "+0.0";
  return frame.id + "@" + text;
}

inline std::string tool_target_id(int slot_id) { return "tool_" + std::to_string(slot_id); }

// ---------------------------------------------------------------------------
// Actions

enum class ActionKind { Grasp, PickupTool, ReturnTool, SwapTool };

inline std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Grasp: return "grasp";
    case ActionKind::PickupTool: return "pickup_tool";
    case ActionKind::ReturnTool: return "return_tool";
    case ActionKind::SwapTool: return "swap_tool";
  }
  return "unknown";
}

struct ExecutableAction {
  ActionKind kind = ActionKind::Grasp;
  Arm arm = Arm::Left;
  std::string target_id;
  std::string frame_id;  // Grasp
  Pose grasp_pose;       // Grasp
  int slot_id = 0;       // PickupTool / SwapTool: slot to take from
  bool execution_failed = false;
};

namespace detail {

inline void refresh_priors(WorkcellState& s) {
  for (auto& g : s.grippers) g.prior_pose = g.pose;
  for (auto& slot : s.tool_stand) slot.prior_tool = slot.tool;
}

inline HeldItem take_tool(WorkcellState& s, int slot_id) {
  ToolSlot* slot = s.find_slot(slot_id);
  if (slot == nullptr || !slot->tool) {
    throw Error(ErrorCode::UnresolvableTarget, "no tool in slot " + std::to_string(slot_id));
  }
  HeldItem item{tool_target_id(slot_id), std::nullopt, *slot->tool, slot_id};
  slot->tool.reset();
  return item;
}

inline void put_back(WorkcellState& s, const HeldItem& item) {
  if (!item.tool || !item.home_slot) {
    throw Error(ErrorCode::UnresolvableTarget, "held item '" + item.target_id + "' is not a tool");
  }
  ToolSlot* slot = s.find_slot(*item.home_slot);
  if (slot == nullptr || slot->tool) {
    throw Error(ErrorCode::UnresolvableTarget, "home slot for '" + item.tool->name + "' unavailable");
  }
  slot->tool = item.tool;
}

}  // namespace detail

// Successor state for one executed action. A flagged execution failure is a
// physical no-op: only step_index and the perception priors change.
inline WorkcellState apply_action(const WorkcellState& state, const ExecutableAction& action) {
  WorkcellState next = state;
  Gripper* gripper = next.find_gripper(action.arm);
  if (gripper == nullptr) {
    throw Error(ErrorCode::UnresolvableTarget, "no gripper for arm " + std::string(to_string(action.arm)));
  }

  switch (action.kind) {
    case ActionKind::Grasp: {
      const FrameObject* frame = next.find_frame(action.frame_id);
      if (frame == nullptr) throw Error(ErrorCode::UnresolvableTarget, "unknown frame '" + action.frame_id + "'");
      if (!action.grasp_pose.valid()) throw Error(ErrorCode::UnresolvableTarget, "invalid grasp pose");
      if (gripper->held && gripper->held->tool) {
        throw Error(ErrorCode::ArmOccupied, std::string(to_string(action.arm)) + " arm holds a tool");
      }
      break;
    }
    case ActionKind::PickupTool: {
      if (gripper->held) throw Error(ErrorCode::ArmOccupied, std::string(to_string(action.arm)) + " arm is not empty");
      const ToolSlot* slot = next.find_slot(action.slot_id);
      if (slot == nullptr || !slot->tool) {
        throw Error(ErrorCode::UnresolvableTarget, "no tool in slot " + std::to_string(action.slot_id));
      }
      break;
    }
    case ActionKind::ReturnTool:
      if (!gripper->held || !gripper->held->tool) {
        throw Error(ErrorCode::UnresolvableTarget, std::string(to_string(action.arm)) + " arm holds no tool");
      }
      break;
    case ActionKind::SwapTool: {
      if (!gripper->held || !gripper->held->tool) {
        throw Error(ErrorCode::ArmOccupied, std::string(to_string(action.arm)) + " arm holds no tool to swap");
      }
      const ToolSlot* slot = next.find_slot(action.slot_id);
      if (slot == nullptr || !slot->tool) {
        throw Error(ErrorCode::UnresolvableTarget, "no tool in slot " + std::to_string(action.slot_id));
      }
      break;
    }
  }

  detail::refresh_priors(next);
  ++next.step_index;
  if (action.execution_failed) return next;

  switch (action.kind) {
    case ActionKind::Grasp:
      gripper->pose = action.grasp_pose;
      gripper->held = HeldItem{action.target_id, action.frame_id, std::nullopt, std::nullopt};
      break;
    case ActionKind::PickupTool:
      gripper->held = detail::take_tool(next, action.slot_id);
      break;
    case ActionKind::ReturnTool:
      detail::put_back(next, *gripper->held);
      gripper->held.reset();
      break;
    case ActionKind::SwapTool: {
      const HeldItem returning = *gripper->held;
      gripper->held = detail::take_tool(next, action.slot_id);
      detail::put_back(next, returning);
      break;
    }
  }
  return next;
}

namespace detail {

inline bool same_catalog(const WorkcellState& a, const WorkcellState& b) {
  if (a.frames.size() != b.frames.size() || a.tool_stand.size() != b.tool_stand.size() ||
      a.grippers.size() != b.grippers.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    if (a.frames[i].id != b.frames[i].id) return false;
  }
  for (std::size_t i = 0; i < a.tool_stand.size(); ++i) {
    if (a.tool_stand[i].slot_id != b.tool_stand[i].slot_id || a.tool_stand[i].home != b.tool_stand[i].home) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.grippers.size(); ++i) {
    if (a.grippers[i].arm != b.grippers[i].arm) return false;
  }
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Perception

struct NoiseModel {
  double p_freeze = 0.0;          // a moved gripper pose is reported unmoved
  double p_tool_invisible = 0.0;  // a removed tool is reported still in its slot
  std::string stream_label = "perception";

  bool valid() const { return p_freeze >= 0.0 && p_freeze <= 1.0 && p_tool_invisible >= 0.0 && p_tool_invisible <= 1.0; }
};

struct Observation {
  WorkcellState snapshot;
  std::vector<std::string> corrupted_fields;
  int captured_at_step = 0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

// One Bernoulli draw per eligible field (moved gripper, emptied slot), in
// state order, regardless of the probability value.
inline Observation observe(const WorkcellState& state, const NoiseModel& noise, RngStream& rng) {
  Observation obs{state, {}, state.step_index};
  for (auto& g : obs.snapshot.grippers) {
    if (g.pose == g.prior_pose) continue;
    if (rng.bernoulli(noise.p_freeze)) {
      g.pose = g.prior_pose;
      obs.corrupted_fields.push_back("grippers." + std::string(to_string(g.arm)) + ".pose");
    }
  }
  for (auto& slot : obs.snapshot.tool_stand) {
    if (slot.tool || !slot.prior_tool) continue;
    if (rng.bernoulli(noise.p_tool_invisible)) {
      slot.tool = slot.prior_tool;
      obs.corrupted_fields.push_back("tool_stand." + std::to_string(slot.slot_id) + ".tool");
    }
  }
  return obs;
}

// Variant for a perception stream with memory: a frozen field repeats what the
// previous observation reported, so a persistent freeze keeps showing the same
// stale scene instead of lagging one action behind. Eligibility is judged
// against that report as well.
inline Observation observe(const WorkcellState& state, const NoiseModel& noise, RngStream& rng,
                           const Observation& previous) {
  const WorkcellState& last = previous.snapshot;
  if (!detail::same_catalog(state, last)) throw Error(ErrorCode::MismatchedWorkcell, "previous observation mismatch");
  Observation obs{state, {}, state.step_index};
  for (std::size_t i = 0; i < obs.snapshot.grippers.size(); ++i) {
    auto& g = obs.snapshot.grippers[i];
    const Pose& reported = last.grippers[i].pose;
    if (g.pose == reported) continue;
    if (rng.bernoulli(noise.p_freeze)) {
      g.pose = reported;
      obs.corrupted_fields.push_back("grippers." + std::string(to_string(g.arm)) + ".pose");
    }
  }
  for (std::size_t i = 0; i < obs.snapshot.tool_stand.size(); ++i) {
    auto& slot = obs.snapshot.tool_stand[i];
    const auto& reported = last.tool_stand[i].tool;
    if (slot.tool || !reported) continue;
    if (rng.bernoulli(noise.p_tool_invisible)) {
      slot.tool = reported;
      obs.corrupted_fields.push_back("tool_stand." + std::to_string(slot.slot_id) + ".tool");
    }
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Differencing

inline constexpr double kMinDetectableDisplacement = 0.001;  // meters

struct GripperDisplacement {
  Arm arm;
  Vec3 displacement;
  friend bool operator==(const GripperDisplacement&, const GripperDisplacement&) = default;
};

enum class SlotChangeKind { Removed, Returned };

struct SlotChange {
  int slot_id;
  SlotChangeKind kind;
  std::string tool_name;
  friend bool operator==(const SlotChange&, const SlotChange&) = default;
};

enum class HeldChangeKind { Acquired, Released };

struct HeldChange {
  Arm arm;
  HeldChangeKind kind;
  std::string item_id;
  std::optional<std::string> tool_name;
  friend bool operator==(const HeldChange&, const HeldChange&) = default;
};

struct SceneDelta {
  std::vector<GripperDisplacement> gripper_moves;
  std::vector<SlotChange> slot_changes;
  std::vector<HeldChange> held_changes;

  bool empty() const { return gripper_moves.empty() && slot_changes.empty() && held_changes.empty(); }

  std::optional<Vec3> displacement_of(Arm arm) const {
    for (const auto& m : gripper_moves) {
      if (m.arm == arm) return m.displacement;
    }
    return std::nullopt;
  }
};


inline SceneDelta diff(const Observation& pre, const Observation& post) {
  const WorkcellState& a = pre.snapshot;
  const WorkcellState& b = post.snapshot;
  if (!detail::same_catalog(a, b)) throw Error(ErrorCode::MismatchedWorkcell, "observations describe different workcells");

  SceneDelta delta;
  for (std::size_t i = 0; i < a.grippers.size(); ++i) {
    const Gripper& before = a.grippers[i];
    const Gripper& after = b.grippers[i];
    const Vec3 d = after.pose.position - before.pose.position;
    if (d.norm() >= kMinDetectableDisplacement) delta.gripper_moves.push_back({before.arm, d});

    const std::string before_id = before.held ? before.held->target_id : "";
    const std::string after_id = after.held ? after.held->target_id : "";
    if (before_id != after_id) {
      if (before.held) {
        delta.held_changes.push_back({before.arm, HeldChangeKind::Released, before_id,
                                      before.held->tool ? std::optional(before.held->tool->name) : std::nullopt});
      }
      if (after.held) {
        delta.held_changes.push_back({after.arm, HeldChangeKind::Acquired, after_id,
                                      after.held->tool ? std::optional(after.held->tool->name) : std::nullopt});
      }
    }
  }
  for (std::size_t i = 0; i < a.tool_stand.size(); ++i) {
    const auto& before = a.tool_stand[i].tool;
    const auto& after = b.tool_stand[i].tool;
    const int id = a.tool_stand[i].slot_id;
    if (before == after) continue;
    if (before) delta.slot_changes.push_back({id, SlotChangeKind::Removed, before->name});
    if (after) delta.slot_changes.push_back({id, SlotChangeKind::Returned, after->name});
  }
  return delta;
}

// ---------------------------------------------------------------------------
// Serialization. Snapshots are canonical JSON (nlohmann::json objects keep
// keys sorted). Perception priors are bookkeeping and are not serialized.

inline void to_json(nlohmann::json& j, const ToolSpec& t) {
  j = {{"name", t.name}, {"bit_kind", std::string(to_string(t.bit_kind))}, {"bit_size_mm", t.bit_size_mm}};
}
inline void from_json(const nlohmann::json& j, ToolSpec& t) {
  t.name = j.at("name").get<std::string>();
  t.bit_kind = parse_bit_kind(j.at("bit_kind").get<std::string>());
  t.bit_size_mm = j.at("bit_size_mm").get<double>();
}

inline nlohmann::json optional_json(const auto& value) {
  return value ? nlohmann::json(*value) : nlohmann::json(nullptr);
}

inline void to_json(nlohmann::json& j, const HeldItem& h) {
  j = {{"target_id", h.target_id},
       {"frame_id", optional_json(h.frame_id)},
       {"tool", optional_json(h.tool)},
       {"home_slot", optional_json(h.home_slot)}};
}

inline nlohmann::json to_json(const WorkcellState& s) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : s.frames) {
    frames.push_back({{"id", f.id}, {"axis", f.axis}, {"length_m", f.length_m}, {"base_pose", f.base_pose}});
  }
  nlohmann::json stand = nlohmann::json::array();
  for (const auto& slot : s.tool_stand) {
    stand.push_back({{"slot_id", slot.slot_id},
                     {"occupied", slot.occupied()},
                     {"tool", optional_json(slot.tool)},
                     {"home", optional_json(slot.home)}});
  }
  nlohmann::json grippers = nlohmann::json::array();
  for (const auto& g : s.grippers) {
    grippers.push_back({{"arm", std::string(to_string(g.arm))}, {"pose", g.pose}, {"held", optional_json(g.held)}});
  }
  return {{"frames", frames}, {"tool_stand", stand}, {"grippers", grippers}, {"step_index", s.step_index}};
}

inline nlohmann::json to_json(const Observation& o) {
  return {{"snapshot", to_json(o.snapshot)},
          {"corrupted_fields", o.corrupted_fields},
          {"captured_at_step", o.captured_at_step}};
}

inline std::string serialize(const WorkcellState& s) { return to_json(s).dump(); }
inline std::string serialize(const Observation& o) { return to_json(o).dump(); }

// Loads a workcell configuration document:
//   frames:     [{id, axis, length_m, base_pose}]
//   tool_slots: [{slot_id, tool: {name, bit_kind, bit_size_mm} | null}]
//   arms:       [{arm, pose, grasping?: frame id}]
inline WorkcellState load_workcell(const nlohmann::json& doc) {
  WorkcellState s;
  try {
    for (const auto& jf : doc.at("frames")) {
      FrameObject f{jf.at("id").get<std::string>(), jf.at("axis").get<Vec3>(), jf.at("length_m").get<double>(),
                    jf.at("base_pose").get<Pose>()};
      const double n = f.axis.norm();
      if (!(n > 0.0) || std::abs(n - 1.0) > 1e-6) throw Error(ErrorCode::ConfigError, "frame '" + f.id + "' axis is not a unit vector");
      f.axis = (1.0 / n) * f.axis;
      if (!f.base_pose.valid()) throw Error(ErrorCode::ConfigError, "frame '" + f.id + "' base pose invalid");
      if (s.find_frame(f.id)) throw Error(ErrorCode::ConfigError, "duplicate frame '" + f.id + "'");
      s.frames.push_back(std::move(f));
    }
    std::vector<std::string> names;
    for (const auto& js : doc.value("tool_slots", nlohmann::json::array())) {
      ToolSlot slot;
      slot.slot_id = js.at("slot_id").get<int>();
      if (s.find_slot(slot.slot_id)) throw Error(ErrorCode::ConfigError, "duplicate slot " + std::to_string(slot.slot_id));
      if (js.contains("tool") && !js.at("tool").is_null()) {
        ToolSpec t = js.at("tool").get<ToolSpec>();
        if (!(t.bit_size_mm > 0.0)) throw Error(ErrorCode::ConfigError, "tool '" + t.name + "' bit size must be positive");
        if (std::find(names.begin(), names.end(), t.name) != names.end()) {
          throw Error(ErrorCode::ConfigError, "duplicate tool name '" + t.name + "'");
        }
        names.push_back(t.name);
        slot.home = t;
        slot.tool = t;
        slot.prior_tool = t;
      }
      s.tool_stand.push_back(std::move(slot));
    }
    std::sort(s.tool_stand.begin(), s.tool_stand.end(), [](const auto& a, const auto& b) { return a.slot_id < b.slot_id; });
    for (const auto& ja : doc.at("arms")) {
      Gripper g;
      g.arm = parse_arm(ja.at("arm").get<std::string>());
      if (s.find_gripper(g.arm)) throw Error(ErrorCode::ConfigError, "duplicate arm");
      g.pose = ja.at("pose").get<Pose>();
      if (!g.pose.valid()) throw Error(ErrorCode::ConfigError, "arm pose invalid");
      g.prior_pose = g.pose;
      if (ja.contains("grasping") && !ja.at("grasping").is_null()) {
        const auto frame_id = ja.at("grasping").get<std::string>();
        const FrameObject* frame = s.find_frame(frame_id);
        if (frame == nullptr) throw Error(ErrorCode::ConfigError, "arm grasps unknown frame '" + frame_id + "'");
        g.held = HeldItem{grasp_target_id(*frame, g.pose.position), frame_id, std::nullopt, std::nullopt};
      }
      s.grippers.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("workcell document: ") + e.what());
  }
  return s;
}

}  // namespace replan
