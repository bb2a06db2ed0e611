#pragma once

#include <filesystem>
#include <string>

#include "replan/replan.hpp"

namespace fixtures {

inline std::filesystem::path config(const std::string& rel) { return std::filesystem::path(REPLAN_CONFIG_DIR) / rel; }

inline replan::WorkcellState default_workcell() {
  return replan::load_workcell(replan::read_json_file(config("workcells/default.json")));
}

inline replan::Scenario scenario(const std::string& name) {
  return replan::load_scenario(config("scenarios/" + name + ".json"));
}

inline replan::Observation clean_view(const replan::WorkcellState& s) {
  replan::RngStream rng(0);
  return replan::observe(s, replan::NoiseModel{}, rng);
}

inline const replan::ToolSlot* slot_holding(const replan::WorkcellState& s, const std::string& name) {
  for (const auto& slot : s.tool_stand) {
    if (slot.tool && slot.tool->name == name) return &slot;
  }
  return nullptr;
}

inline replan::ExecutableAction pickup(replan::Arm arm, int slot, bool failed = false) {
  return {replan::ActionKind::PickupTool, arm, replan::tool_target_id(slot), {}, {}, slot, failed};
}

inline replan::ExecutableAction swap(replan::Arm arm, int slot, bool failed = false) {
  return {replan::ActionKind::SwapTool, arm, replan::tool_target_id(slot), {}, {}, slot, failed};
}

inline replan::ExecutableAction give_back(replan::Arm arm, bool failed = false) {
  return {replan::ActionKind::ReturnTool, arm, "", {}, {}, 0, failed};
}

}  // namespace fixtures
