#pragma once

// Target-selection reasoners. The engine calls select() once per replanning
// attempt; loops and retries live in the engine, never here.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "replan/error.hpp"
#include "replan/lang.hpp"
#include "replan/rng.hpp"
#include "replan/scene.hpp"
#include "replan/targets.hpp"

namespace replan {

enum class FeedbackKind { Logic, Physical };

inline std::string_view to_string(FeedbackKind k) { return k == FeedbackKind::Logic ? "logic" : "physical"; }

// Messages are prefixed "LOGIC:" or "PHYS:" so any reasoner can condition on them.
struct Feedback {
  FeedbackKind kind = FeedbackKind::Logic;
  std::string message;
  int issued_at_step = 0;
  std::string subject_id;  // target the feedback is about

  friend bool operator==(const Feedback&, const Feedback&) = default;
};

inline void to_json(nlohmann::json& j, const Feedback& f) {
  j = {{"kind", std::string(to_string(f.kind))},
       {"message", f.message},
       {"issued_at_step", f.issued_at_step},
       {"subject_id", f.subject_id}};
}

// The active instruction plus everything appended to it during replanning.
class ReasoningContext {
 public:
  ReasoningContext() = default;
  explicit ReasoningContext(ParsedInstruction base, int turn = 0) : base_(std::move(base)), turn_(turn) {}

  const ParsedInstruction& base_instruction() const { return base_; }
  const std::vector<Feedback>& feedback() const { return feedback_; }
  int turn() const { return turn_; }

  void append(Feedback f) {
    if (f.message.empty()) throw Error(ErrorCode::ConfigError, "feedback message must be non-empty");
    feedback_.push_back(std::move(f));
  }

  // Optional action history across instructions; empty unless the engine policy exposes it.
  std::vector<std::string> action_history;

  std::set<std::string> excluded_ids() const {
    std::set<std::string> ids;
    for (const auto& f : feedback_) {
      if (!f.subject_id.empty()) ids.insert(f.subject_id);
    }
    return ids;
  }

  // Instruction text with appended feedback, one entry per line.
  std::string render() const {
    std::string text = base_.raw;
    for (const auto& f : feedback_) text += "\n" + f.message;
    return text;
  }

  friend bool operator==(const ReasoningContext&, const ReasoningContext&) = default;

 private:
  ParsedInstruction base_;
  std::vector<Feedback> feedback_;
  int turn_ = 0;
};

struct Selection {
  std::string target_id;
  std::string rationale;
  bool execution_fault = false;  // set by the fault injector: the execution becomes a no-op

  friend bool operator==(const Selection&, const Selection&) = default;
};

class Reasoner {
 public:
  virtual ~Reasoner() = default;
  virtual Selection select(const Observation& obs, const ReasoningContext& ctx, const CandidateSet& set) = 0;
  virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------
// Oracle

namespace detail {

inline std::string format_mm(double meters) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.1f mm", meters * 1000.0);
  return buf;
}

inline std::string format_size(double mm) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g mm", mm);
  return buf;
}

inline Selection select_directional(const Directional& d, const CandidateSet& set,
                                    const std::set<std::string>& excluded) {
  if (!set.current || !set.current->grasp()) {
    throw Error(ErrorCode::NoFeasibleTarget, "directional instruction without a current grasp");
  }
  const Vec3 dir = d.direction();
  const Vec3 origin = set.current->grasp()->pose.position;

  struct Option {
    std::size_t index;
    double distance;
  };
  std::vector<Option> feasible;
  for (std::size_t i = 0; i < set.candidates.size(); ++i) {
    const auto& c = set.candidates[i];
    if (!c.grasp() || excluded.count(c.id)) continue;
    const Vec3 offset = c.grasp()->pose.position - origin;
    if (offset.dot(dir) > 0.0) feasible.push_back({i, offset.norm()});
  }
  if (feasible.empty()) {
    throw Error(ErrorCode::NoFeasibleTarget, "no candidate lies in the instructed direction");
  }
  std::stable_sort(feasible.begin(), feasible.end(),
                   [](const Option& a, const Option& b) { return a.distance < b.distance; });
  const std::size_t pick = d.magnitude == Magnitude::Large ? std::min<std::size_t>(1, feasible.size() - 1) : 0;
  const auto& chosen = set.candidates[feasible[pick].index];
  const double along = (chosen.grasp()->pose.position - origin).dot(dir);
  return {chosen.id,
          "moves " + format_mm(along) + " along " + std::string(d.sign > 0 ? "+" : "-") +
              std::string(to_string(d.axis)) + " (" + std::string(to_string(d.magnitude)) + " step)"};
}

inline Selection select_comparative(const Comparative& c, const CandidateSet& set,
                                    const std::set<std::string>& excluded) {
  if (!set.current || !set.current->tool()) {
    throw Error(ErrorCode::NoFeasibleTarget, "comparative instruction without a held tool");
  }
  const double ref = set.current->tool()->tool.bit_size_mm;
  const bool bigger = c.direction == CompareDirection::Bigger;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < set.candidates.size(); ++i) {
    const auto* tc = set.candidates[i].tool();
    if (tc == nullptr || excluded.count(set.candidates[i].id)) continue;
    const double size = tc->tool.bit_size_mm;
    if (bigger ? !(size > ref) : !(size < ref)) continue;
    if (!best) {
      best = i;
      continue;
    }
    const double best_size = set.candidates[*best].tool()->tool.bit_size_mm;
    if (bigger ? size < best_size : size > best_size) best = i;
  }
  if (!best) {
    throw Error(ErrorCode::NoFeasibleTarget,
                std::string("no tool ") + (bigger ? "larger" : "smaller") + " than " + format_size(ref));
  }
  const auto& chosen = set.candidates[*best];
  return {chosen.id, std::string(bigger ? "next size up" : "next size down") + " from " + format_size(ref) +
                         ": " + chosen.tool()->tool.name};
}

inline Selection select_by_name(const ToolByName& t, const CandidateSet& set, const std::set<std::string>& excluded) {
  for (const auto& c : set.candidates) {
    const auto* tc = c.tool();
    if (tc == nullptr || excluded.count(c.id)) continue;
    if (tc->tool.name.find(t.fragment) != std::string::npos) {
      return {c.id, "first available tool matching '" + t.fragment + "': " + tc->tool.name};
    }
  }
  throw Error(ErrorCode::NoFeasibleTarget, "no available tool matches '" + t.fragment + "'");
}

}  // namespace detail

// Exact reference reasoner. Every id named by earlier feedback (logic or
// physical) is excluded; ties go to the lowest candidate index.
inline Selection oracle_select(const Observation& /*obs*/, const ReasoningContext& ctx, const CandidateSet& set) {
  if (set.empty()) throw Error(ErrorCode::NoFeasibleTarget, "empty candidate set");
  const auto excluded = ctx.excluded_ids();
  const ParsedInstruction& instr = ctx.base_instruction();
  if (const auto* d = instr.directional()) return detail::select_directional(*d, set, excluded);
  if (const auto* c = instr.comparative()) return detail::select_comparative(*c, set, excluded);
  if (const auto* t = instr.tool_by_name()) return detail::select_by_name(*t, set, excluded);
  throw Error(ErrorCode::NoFeasibleTarget, "instruction not interpretable: '" + instr.raw + "'");
}

class OracleReasoner final : public Reasoner {
 public:
  Selection select(const Observation& obs, const ReasoningContext& ctx, const CandidateSet& set) override {
    return oracle_select(obs, ctx, set);
  }
  std::string name() const override { return "oracle"; }
};

// ---------------------------------------------------------------------------
// Fault injection

struct FaultConfig {
  double p_out_of_set = 0.0;
  double p_wrong_direction = 0.0;
  double p_exec_fail = 0.0;

  bool valid() const {
    auto ok = [](double p) { return p >= 0.0 && p <= 1.0; };
    return ok(p_out_of_set) && ok(p_wrong_direction) && ok(p_exec_fail);
  }
  bool any() const { return p_out_of_set > 0.0 || p_wrong_direction > 0.0 || p_exec_fail > 0.0; }
};

inline void to_json(nlohmann::json& j, const FaultConfig& f) {
  j = {{"p_out_of_set", f.p_out_of_set}, {"p_wrong_direction", f.p_wrong_direction}, {"p_exec_fail", f.p_exec_fail}};
}
inline void from_json(const nlohmann::json& j, FaultConfig& f) {
  f.p_out_of_set = j.value("p_out_of_set", 0.0);
  f.p_wrong_direction = j.value("p_wrong_direction", 0.0);
  f.p_exec_fail = j.value("p_exec_fail", 0.0);
}

using SelectFn = std::function<Selection(const Observation&, const ReasoningContext&, const CandidateSet&)>;

namespace detail {

inline std::optional<std::string> mirror_of(const CandidateSet& set, std::string_view id) {
  const ActionTarget* chosen = set.find(id);
  if (chosen == nullptr || !chosen->grasp() || !set.current || !set.current->grasp()) return std::nullopt;
  const Vec3 origin = set.current->grasp()->pose.position;
  const Vec3 mirrored = -(chosen->grasp()->pose.position - origin);
  for (const auto& c : set.candidates) {
    if (!c.grasp()) continue;
    if ((c.grasp()->pose.position - origin - mirrored).norm() < 1e-9) return c.id;
  }
  return std::nullopt;
}

inline std::string fabricate_id(const CandidateSet& set, std::uint64_t draw) {
  const std::string prefix = (!set.candidates.empty() && set.candidates.front().tool()) ? "tool_" : "target_";
  std::uint64_t n = 90 + draw % 900;
  std::string id = prefix + std::to_string(n);
  while (set.find(id) != nullptr) id = prefix + std::to_string(++n);
  return id;
}

}  // namespace detail

// Every call consumes exactly four draws from `rng` (out-of-set, wrong
// direction, execution failure, fabricated-id number) so runs that differ
// only in ablation mode see the same fault sequence per call index.
inline Selection faulty_select(const SelectFn& inner, const FaultConfig& cfg, RngStream& rng, const Observation& obs,
                               const ReasoningContext& ctx, const CandidateSet& set) {
  const double u_out = rng.uniform();
  const double u_wrong = rng.uniform();
  const double u_exec = rng.uniform();
  const std::uint64_t fabricated = rng.next();
  const bool exec_fault = u_exec < cfg.p_exec_fail;

  if (u_out < cfg.p_out_of_set) {
    return {detail::fabricate_id(set, fabricated), "best match for the instruction", exec_fault};
  }
  Selection sel = inner(obs, ctx, set);
  if (u_wrong < cfg.p_wrong_direction) {
    if (auto mirror = detail::mirror_of(set, sel.target_id)) {
      sel.target_id = *mirror;
    }
  }
  sel.execution_fault = sel.execution_fault || exec_fault;
  return sel;
}

class FaultyReasoner final : public Reasoner {
 public:
  FaultyReasoner(std::unique_ptr<Reasoner> inner, FaultConfig cfg, RngStream rng)
      : inner_(std::move(inner)), cfg_(cfg), rng_(rng) {}

  Selection select(const Observation& obs, const ReasoningContext& ctx, const CandidateSet& set) override {
    auto call_inner = [this](const Observation& o, const ReasoningContext& c, const CandidateSet& s) {
      return inner_->select(o, c, s);
    };
    return faulty_select(call_inner, cfg_, rng_, obs, ctx, set);
  }
  std::string name() const override { return "faulty(" + inner_->name() + ")"; }

 private:
  std::unique_ptr<Reasoner> inner_;
  FaultConfig cfg_;
  RngStream rng_;
};

}  // namespace replan
