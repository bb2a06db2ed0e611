#pragma once

// Versioned prompt templates for the optional remote reasoner and remote
// correction models. Keep edits here so template changes show up in diffs.

#include <string_view>

namespace replan::prompts {

inline constexpr std::string_view kVersion = "v1";

inline constexpr std::string_view kCoordinateConventions =
    "- Front = -z, Back = +z, Left = +x, Right = -x, Up = +y, Down = -y";

inline constexpr std::string_view kSelectionTask =
    "Task:\n"
    "You are an AI assistant for assembly tasks.\n"
    "Given the current object, select a new object candidate according to the human instruction.\n"
    "If feedback is provided, revise the selection by taking the feedback into account.\n";

inline constexpr std::string_view kBackgroundHeader =
    "Background information:\n"
    "The following coordinate system definitions take priority over common natural language interpretations.\n"
    "You must strictly follow these sign conventions and must not interpret them inversely.\n";

inline constexpr std::string_view kBackgroundFooter = "Image and characteristics of the selected object\n";

inline constexpr std::string_view kSelectionInputDescription =
    "Input description:\n"
    "- Instruction: Human language instruction\n"
    "- Current object: Current tool name\n"
    "- Action Target candidate: List of grasp candidates[(position[x, y, z], orientation[qx, qy, qz, qw]), "
    "Tool name, ...]\n"
    "- Environment image of the workspace (given as a fenced scene block)\n"
    "- Feedback: (may not exist)\n";

inline constexpr std::string_view kSelectionChainOfThought =
    "Chain of thought:\n"
    "First, consider modifications based on the instruction, then select a suitable action target from the "
    "action target candidate list.\n";

inline constexpr std::string_view kSelectionOutputFormat =
    "Output format:\n"
    "New objects\n"
    "Reason: 'Explanation of selection rationale'\n"
    "(The first line must be exactly one candidate id from the list.)\n";

inline constexpr std::string_view kInternalTask =
    "Task:\n"
    "You are a validation AI that determines whether the grasp candidate selected by the Action Target "
    "Selection Model is appropriate. If the instruction has been successfully completed, output YES. If not, "
    "output NO and briefly explain why.\n";

inline constexpr std::string_view kInternalInputDescription =
    "Input description:\n"
    "<figure_1>This is the current environmental information.\n"
    "- Information from Action Target Selection Model\n"
    "- Instruction, current object and action target candidates as for the selection model\n";

inline constexpr std::string_view kExternalTask =
    "Task:\n"
    "You are the AI for error detection of performed preparatory movement corrections.\n"
    "If the operation was completed, output YES. If not, output NO and briefly explain why.\n"
    "Determine whether the specified action is being performed and whether the action is successful.\n";

inline constexpr std::string_view kExternalInputDescription =
    "Input description:\n"
    "<figure_1><figure_2> The first image shows the environment before task execution,\n"
    "and the second image shows the environment after task execution.\n"
    "- Instruction: Human language instruction\n";

}  // namespace replan::prompts
