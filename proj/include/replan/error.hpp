#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace replan {

enum class ErrorCode {
  UnresolvableTarget,
  ArmOccupied,
  MismatchedWorkcell,
  UnknownFrame,
  NotAGraspTarget,
  NoFeasibleTarget,
  TransportError,
  MalformedReply,
  WrongPhase,
  UnknownSession,
  ConfigError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnresolvableTarget: return "unresolvable_target";
    case ErrorCode::ArmOccupied: return "arm_occupied";
    case ErrorCode::MismatchedWorkcell: return "mismatched_workcell";
    case ErrorCode::UnknownFrame: return "unknown_frame";
    case ErrorCode::NotAGraspTarget: return "not_a_grasp_target";
    case ErrorCode::NoFeasibleTarget: return "no_feasible_target";
    case ErrorCode::TransportError: return "transport_error";
    case ErrorCode::MalformedReply: return "malformed_reply";
    case ErrorCode::WrongPhase: return "wrong_phase";
    case ErrorCode::UnknownSession: return "unknown_session";
    case ErrorCode::ConfigError: return "config_error";
  }
  return "unknown";
}

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace replan
