#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "replan/error.hpp"
#include "replan/lang.hpp"
#include "replan/reasoner.hpp"
#include "replan/scene.hpp"
#include "replan/targets.hpp"

namespace replan {

enum class TaskKind { Fixation, ToolPrep };

inline std::string_view to_string(TaskKind k) { return k == TaskKind::Fixation ? "fixation" : "tool_prep"; }

struct Caps {
  int internal = 3;
  int external = 3;
};

struct EnginePolicy {
  bool regenerate_candidates = true;   // rebuild O for every instruction
  bool expose_action_history = false;  // hand executed-action history to the reasoner
};

// Chat-completion style endpoint. The token is read from `token_env` at call time.
struct EndpointConfig {
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string token_env = "REPLAN_API_TOKEN";
  double timeout_s = 60.0;
};

struct ReasonerSpec {
  std::string kind = "oracle";  // "oracle" | "remote"
  EndpointConfig endpoint;
};

struct Scenario {
  std::string name;
  TaskKind task = TaskKind::Fixation;
  WorkcellState workcell;
  Arm arm = Arm::Left;
  std::string frame_id;
  SamplerParams sampler;
  std::vector<std::string> instructions;
  FaultConfig faults;
  NoiseModel noise;
  Caps caps;
  EnginePolicy policy;
  ReasonerSpec reasoner;
  DirectionLexicon lexicon = DirectionLexicon::standard();
};

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, "'" + path.string() + "': " + e.what());
  }
}

// Scenario document. `workcell` and `lexicon` may be inline objects or paths
// relative to `base_dir`.
inline Scenario scenario_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {}) {
  auto resolve = [&](const nlohmann::json& ref) {
    return ref.is_string() ? read_json_file(base_dir / ref.get<std::string>()) : ref;
  };

  Scenario sc;
  try {
    sc.name = doc.at("name").get<std::string>();
    const auto task = doc.value("task", std::string("fixation"));
    if (task == "fixation") {
      sc.task = TaskKind::Fixation;
    } else if (task == "tool_prep") {
      sc.task = TaskKind::ToolPrep;
    } else {
      throw Error(ErrorCode::ConfigError, "unknown task '" + task + "'");
    }
    sc.workcell = load_workcell(resolve(doc.at("workcell")));
    sc.arm = parse_arm(doc.value("arm", std::string("left")));
    sc.frame_id = doc.value("frame", std::string());
    if (doc.contains("targets")) {
      const auto& t = doc.at("targets");
      sc.sampler.spacing_m = t.value("spacing_m", sc.sampler.spacing_m);
      sc.sampler.count_per_side = t.value("count_per_side", sc.sampler.count_per_side);
    }
    sc.instructions = doc.at("instructions").get<std::vector<std::string>>();
    if (doc.contains("faults")) sc.faults = doc.at("faults").get<FaultConfig>();
    if (doc.contains("noise")) {
      const auto& n = doc.at("noise");
      sc.noise.p_freeze = n.value("p_freeze", 0.0);
      sc.noise.p_tool_invisible = n.value("p_tool_invisible", 0.0);
      sc.noise.stream_label = n.value("stream", sc.noise.stream_label);
    }
    if (doc.contains("caps")) {
      sc.caps.internal = doc.at("caps").value("internal", sc.caps.internal);
      sc.caps.external = doc.at("caps").value("external", sc.caps.external);
    }
    if (doc.contains("policy")) {
      const auto& p = doc.at("policy");
      sc.policy.regenerate_candidates = p.value("regenerate_candidates", sc.policy.regenerate_candidates);
      sc.policy.expose_action_history = p.value("expose_action_history", sc.policy.expose_action_history);
    }
    if (doc.contains("reasoner")) {
      const auto& r = doc.at("reasoner");
      sc.reasoner.kind = r.value("kind", std::string("oracle"));
      if (sc.reasoner.kind == "remote") {
        auto& e = sc.reasoner.endpoint;
        e.base_url = r.at("base_url").get<std::string>();
        e.path = r.value("path", e.path);
        e.model = r.value("model", std::string());
        e.token_env = r.value("token_env", e.token_env);
        e.timeout_s = r.value("timeout_s", e.timeout_s);
      } else if (sc.reasoner.kind != "oracle") {
        throw Error(ErrorCode::ConfigError, "unknown reasoner kind '" + sc.reasoner.kind + "'");
      }
    }
    if (doc.contains("lexicon")) sc.lexicon.extend(resolve(doc.at("lexicon")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, "scenario: " + std::string(e.what()));
  }

  if (sc.instructions.empty()) throw Error(ErrorCode::ConfigError, "scenario '" + sc.name + "' has no instructions");
  if (!sc.faults.valid() || !sc.noise.valid()) throw Error(ErrorCode::ConfigError, "probabilities must lie in [0, 1]");
  if (sc.caps.internal < 1 || sc.caps.external < 1) throw Error(ErrorCode::ConfigError, "caps must be >= 1");
  if (sc.task == TaskKind::Fixation) {
    if (sc.workcell.find_frame(sc.frame_id) == nullptr) {
      throw Error(ErrorCode::ConfigError, "fixation scenario needs a known frame, got '" + sc.frame_id + "'");
    }
    if (!(sc.sampler.spacing_m > 0.0) || sc.sampler.count_per_side < 1) {
      throw Error(ErrorCode::ConfigError, "targets need spacing_m > 0 and count_per_side >= 1");
    }
  }
  if (sc.workcell.find_gripper(sc.arm) == nullptr) throw Error(ErrorCode::ConfigError, "scenario arm not in workcell");
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(read_json_file(path), path.parent_path());
}

inline nlohmann::json scenario_echo(const Scenario& sc) {
  return {{"name", sc.name},
          {"task", std::string(to_string(sc.task))},
          {"arm", std::string(to_string(sc.arm))},
          {"frame", sc.frame_id},
          {"targets", {{"spacing_m", sc.sampler.spacing_m}, {"count_per_side", sc.sampler.count_per_side}}},
          {"instructions", sc.instructions},
          {"faults", sc.faults},
          {"noise", {{"p_freeze", sc.noise.p_freeze}, {"p_tool_invisible", sc.noise.p_tool_invisible}}},
          {"caps", {{"internal", sc.caps.internal}, {"external", sc.caps.external}}},
          {"reasoner", sc.reasoner.kind}};
}

}  // namespace replan
