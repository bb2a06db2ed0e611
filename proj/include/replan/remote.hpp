#pragma once

// Optional adapters that delegate selection and verification to a
// chat-completion style HTTP endpoint. Not used by any acceptance run.

#include <cstdlib>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>

#include <httplib.h>
#include <json.hpp>

#include "replan/correction.hpp"
#include "replan/error.hpp"
#include "replan/prompts.hpp"
#include "replan/reasoner.hpp"
#include "replan/scenario.hpp"
#include "replan/scene.hpp"
#include "replan/targets.hpp"

namespace replan {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

// Strips one pair of surrounding quotes: '..', "..", `..` or the typographic
// single quotes U+2018/U+2019.
inline std::string unquote(std::string s) {
  static constexpr std::string_view kOpen = "\xE2\x80\x98";
  static constexpr std::string_view kClose = "\xE2\x80\x99";
  if (s.size() >= kOpen.size() + kClose.size() && s.starts_with(kOpen) && s.ends_with(kClose)) {
    return s.substr(kOpen.size(), s.size() - kOpen.size() - kClose.size());
  }
  if (s.size() >= 2 && (s.front() == '\'' || s.front() == '"' || s.front() == '`') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

inline std::string format_vec(const Vec3& v) {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed << "[" << v.x << ", " << v.y << ", " << v.z << "]";
  return os.str();
}

inline std::string format_quat(const Quaternion& q) {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed << "[" << q.qx << ", " << q.qy << ", " << q.qz << ", " << q.qw << "]";
  return os.str();
}

inline std::string describe_target(const ActionTarget& t) {
  if (const auto* g = t.grasp()) {
    return t.id + ": (position" + format_vec(g->pose.position) + ", orientation" + format_quat(g->pose.orientation) +
           ")";
  }
  const auto& tool = t.tool()->tool;
  return t.id + ": " + tool.name + " (" + std::string(to_string(tool.bit_kind)) + ", " +
         format_size(tool.bit_size_mm) + ")";
}

inline std::string scene_block(const Observation& obs, std::string_view label = "scene") {
  return "```" + std::string(label) + "\n" + to_json(obs.snapshot).dump(2) + "\n```\n";
}

}  // namespace detail

inline std::string selection_system_prompt() {
  std::string p;
  p += prompts::kSelectionTask;
  p += "\n";
  p += prompts::kBackgroundHeader;
  p += prompts::kCoordinateConventions;
  p += "\n";
  p += prompts::kBackgroundFooter;
  p += "\n";
  p += prompts::kSelectionInputDescription;
  p += "\n";
  p += prompts::kSelectionChainOfThought;
  p += "\n";
  p += prompts::kSelectionOutputFormat;
  return p;
}

inline std::string selection_user_message(const Observation& obs, const ReasoningContext& ctx,
                                          const CandidateSet& set) {
  std::string m;
  m += "- Instruction: " + ctx.base_instruction().raw + "\n";
  m += "- Current object: " + (set.current ? detail::describe_target(*set.current) : std::string("none")) + "\n";
  m += "- Action Target candidate:\n";
  for (const auto& c : set.candidates) m += "  - " + detail::describe_target(c) + "\n";
  m += "- Environment image of the workspace:\n" + detail::scene_block(obs);
  if (ctx.feedback().empty()) {
    m += "- Feedback: none\n";
  } else {
    m += "- Feedback:\n";
    for (const auto& f : ctx.feedback()) m += "  - " + f.message + "\n";
  }
  if (!ctx.action_history.empty()) {
    m += "- Previous actions:\n";
    for (const auto& a : ctx.action_history) m += "  - " + a + "\n";
  }
  return m;
}

// Reply grammar: first non-empty line is the target id; a later line starting
// with "Reason:" carries the rationale.
inline Selection parse_selection_reply(std::string_view reply) {
  std::istringstream in{std::string(reply)};
  std::string line;
  std::string id;
  std::optional<std::string> reason;
  while (std::getline(in, line)) {
    std::string t = detail::trim(line);
    if (t.empty()) continue;
    if (t.rfind("Reason:", 0) == 0) {
      if (id.empty()) break;
      reason = detail::unquote(detail::trim(std::string_view(t).substr(7)));
      break;
    }
    if (id.empty()) id = detail::unquote(t);
  }
  if (id.empty()) throw Error(ErrorCode::MalformedReply, "reply has no target id line");
  if (!reason) throw Error(ErrorCode::MalformedReply, "reply has no Reason line");
  return {id, *reason, false};
}

// Verdict grammar: first token YES or NO; for NO the remainder is the feedback.
inline Verdict parse_verdict_reply(std::string_view reply, FeedbackKind kind, int step, const std::string& subject) {
  std::string text = detail::trim(reply);
  std::size_t n = 0;
  while (n < text.size() && std::isalpha(static_cast<unsigned char>(text[n]))) ++n;
  std::string head = text.substr(0, n);
  for (auto& c : head) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (head == "YES") return Verdict::accept();
  if (head != "NO") throw Error(ErrorCode::MalformedReply, "verdict must start with YES or NO");
  std::string rest = detail::trim(std::string_view(text).substr(n));
  while (!rest.empty() && (rest.front() == '.' || rest.front() == ',' || rest.front() == ':' || rest.front() == '-')) {
    rest = detail::trim(std::string_view(rest).substr(1));
  }
  if (rest.empty()) rest = "rejected without explanation";
  const std::string prefix = kind == FeedbackKind::Logic ? "LOGIC: " : "PHYS: ";
  return Verdict::reject({kind, prefix + rest, step, subject});
}

inline nlohmann::json chat_request(const EndpointConfig& cfg, const std::string& system, const std::string& user) {
  return {{"model", cfg.model},
          {"messages",
           nlohmann::json::array({{{"role", "system"}, {"content", system}}, {{"role", "user"}, {"content", user}}})}};
}

// One blocking round trip; a fresh client per call keeps concurrent sessions
// on independent connections.
inline std::string chat_complete(const EndpointConfig& cfg, const std::string& system, const std::string& user) {
  httplib::Client client(cfg.base_url);
  const auto secs = static_cast<time_t>(cfg.timeout_s);
  const auto usecs = static_cast<time_t>((cfg.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (const char* token = std::getenv(cfg.token_env.c_str()); token != nullptr && *token != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const auto body = chat_request(cfg, system, user).dump();
  auto res = client.Post(cfg.path, headers, body, "application/json");
  if (!res) throw Error(ErrorCode::TransportError, "request to " + cfg.base_url + cfg.path + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error(ErrorCode::TransportError, "endpoint returned HTTP " + std::to_string(res->status));
  try {
    const auto doc = nlohmann::json::parse(res->body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedReply, std::string("unexpected completion payload: ") + e.what());
  }
}

class RemoteReasoner final : public Reasoner {
 public:
  explicit RemoteReasoner(EndpointConfig cfg) : cfg_(std::move(cfg)) {}

  Selection select(const Observation& obs, const ReasoningContext& ctx, const CandidateSet& set) override {
    return parse_selection_reply(chat_complete(cfg_, selection_system_prompt(), selection_user_message(obs, ctx, set)));
  }
  std::string name() const override { return "remote(" + cfg_.model + ")"; }

 private:
  EndpointConfig cfg_;
};

inline std::string internal_system_prompt() {
  std::string p;
  p += prompts::kInternalTask;
  p += "\n";
  p += prompts::kBackgroundHeader;
  p += prompts::kCoordinateConventions;
  p += "\n\n";
  p += prompts::kInternalInputDescription;
  return p;
}

inline std::string external_system_prompt() {
  std::string p;
  p += prompts::kExternalTask;
  p += "\n";
  p += prompts::kExternalInputDescription;
  return p;
}

inline Verdict remote_internal_check(const EndpointConfig& cfg, const Observation& obs, const Selection& sel,
                                     const ReasoningContext& ctx, const CandidateSet& set) {
  std::string user = selection_user_message(obs, ctx, set);
  user += "- Selected target: " + sel.target_id + "\n- Selection rationale: " + sel.rationale + "\n";
  return parse_verdict_reply(chat_complete(cfg, internal_system_prompt(), user), FeedbackKind::Logic,
                             obs.captured_at_step, sel.target_id);
}

inline Verdict remote_external_check(const EndpointConfig& cfg, const Observation& pre, const Observation& post,
                                     const ParsedInstruction& instr, const std::string& subject = {}) {
  std::string user = detail::scene_block(pre, "scene-before") + detail::scene_block(post, "scene-after");
  user += "- Instruction: " + instr.raw + "\n";
  return parse_verdict_reply(chat_complete(cfg, external_system_prompt(), user), FeedbackKind::Physical,
                             post.captured_at_step, subject);
}

}  // namespace replan
