#pragma once

// Operator instruction parsing. Only enough structure for the oracle reasoner
// and the consistency check; the raw text is always carried along.

#include <cctype>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "replan/error.hpp"
#include "replan/geometry.hpp"

namespace replan {

enum class Axis { X, Y, Z };

inline std::string_view to_string(Axis axis) {
  switch (axis) {
    case Axis::X: return "x";
    case Axis::Y: return "y";
    case Axis::Z: return "z";
  }
  return "?";
}

inline Axis parse_axis(std::string_view text) {
  if (text == "x") return Axis::X;
  if (text == "y") return Axis::Y;
  if (text == "z") return Axis::Z;
  throw Error(ErrorCode::ConfigError, "unknown axis '" + std::string(text) + "'");
}

// Unit vector along axis * sign.
inline Vec3 direction_vector(Axis axis, int sign) {
  const double s = sign >= 0 ? 1.0 : -1.0;
  switch (axis) {
    case Axis::X: return {s, 0.0, 0.0};
    case Axis::Y: return {0.0, s, 0.0};
    case Axis::Z: return {0.0, 0.0, s};
  }
  return {};
}

enum class Magnitude { Slight, Default, Large };

inline std::string_view to_string(Magnitude m) {
  switch (m) {
    case Magnitude::Slight: return "slight";
    case Magnitude::Default: return "default";
    case Magnitude::Large: return "large";
  }
  return "?";
}

enum class CompareDirection { Bigger, Smaller };

struct Directional {
  Axis axis = Axis::X;
  int sign = 1;
  Magnitude magnitude = Magnitude::Default;
  friend bool operator==(const Directional&, const Directional&) = default;
  Vec3 direction() const { return direction_vector(axis, sign); }
};

// Attribute is always the bit size.
struct Comparative {
  CompareDirection direction = CompareDirection::Bigger;
  friend bool operator==(const Comparative&, const Comparative&) = default;
};

struct ToolByName {
  std::string fragment;  // empty matches any tool
  friend bool operator==(const ToolByName&, const ToolByName&) = default;
};

struct Done {
  friend bool operator==(const Done&, const Done&) = default;
};

struct Unknown {
  friend bool operator==(const Unknown&, const Unknown&) = default;
};

using InstructionKind = std::variant<Directional, Comparative, ToolByName, Done, Unknown>;

struct ParsedInstruction {
  std::string raw;
  InstructionKind kind = Unknown{};

  friend bool operator==(const ParsedInstruction&, const ParsedInstruction&) = default;

  bool is_done() const { return std::holds_alternative<Done>(kind); }
  const Directional* directional() const { return std::get_if<Directional>(&kind); }
  const Comparative* comparative() const { return std::get_if<Comparative>(&kind); }
  const ToolByName* tool_by_name() const { return std::get_if<ToolByName>(&kind); }
  bool is_unknown() const { return std::holds_alternative<Unknown>(kind); }
};

struct DirectionEntry {
  Axis axis = Axis::X;
  int sign = 1;
  friend bool operator==(const DirectionEntry&, const DirectionEntry&) = default;
};

// Word -> (axis, sign), seeded with the workcell sign convention:
// front -z, back +z, left +x, right -x, up +y, down -y.
struct DirectionLexicon {
  std::map<std::string, DirectionEntry, std::less<>> words;

  static DirectionLexicon standard() {
    DirectionLexicon lex;
    lex.words = {
        {"front", {Axis::Z, -1}}, {"forward", {Axis::Z, -1}},
        {"back", {Axis::Z, +1}},  {"backward", {Axis::Z, +1}},
        {"left", {Axis::X, +1}},  {"right", {Axis::X, -1}},
        {"up", {Axis::Y, +1}},    {"higher", {Axis::Y, +1}},
        {"down", {Axis::Y, -1}},  {"lower", {Axis::Y, -1}},
    };
    return lex;
  }

  // Extension document: {"word": {"axis": "x|y|z", "sign": 1|-1}, ...}
  void extend(const nlohmann::json& doc) {
    if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "lexicon extension must be an object");
    for (const auto& [word, entry] : doc.items()) {
      const int sign = entry.at("sign").get<int>();
      if (sign != 1 && sign != -1) throw Error(ErrorCode::ConfigError, "lexicon sign must be +1 or -1");
      std::string key;
      for (unsigned char c : word) key.push_back(static_cast<char>(std::tolower(c)));
      words[key] = {parse_axis(entry.at("axis").get<std::string>()), sign};
    }
  }

  const DirectionEntry* lookup(std::string_view word) const {
    auto it = words.find(word);
    return it == words.end() ? nullptr : &it->second;
  }
};

namespace detail {

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

inline bool has_token(const std::vector<std::string>& tokens, std::string_view word) {
  for (const auto& t : tokens) {
    if (t == word) return true;
  }
  return false;
}

inline bool has_bigram(const std::vector<std::string>& tokens, std::string_view a, std::string_view b) {
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    if (tokens[i] == a && tokens[i + 1] == b) return true;
  }
  return false;
}

}  // namespace detail

// Rule order: Done > Comparative > Directional > ToolByName, else Unknown.
// When several direction words occur the last one wins, so "raise the left a
// bit higher" resolves to +y (the leading "left" names the arm).
inline ParsedInstruction parse_instruction(std::string_view text,
                                           const DirectionLexicon& lexicon = DirectionLexicon::standard()) {
  using detail::has_bigram;
  using detail::has_token;

  ParsedInstruction out{std::string(text), Unknown{}};
  const auto tokens = detail::tokenize(text);

  if (has_token(tokens, "done") || has_token(tokens, "finished")) {
    out.kind = Done{};
    return out;
  }
  if (has_token(tokens, "bigger") || has_token(tokens, "larger")) {
    out.kind = Comparative{CompareDirection::Bigger};
    return out;
  }
  if (has_token(tokens, "smaller")) {
    out.kind = Comparative{CompareDirection::Smaller};
    return out;
  }

  const DirectionEntry* hit = nullptr;
  for (const auto& t : tokens) {
    if (const auto* e = lexicon.lookup(t)) hit = e;
  }
  if (hit != nullptr) {
    Magnitude m = Magnitude::Default;
    if (has_bigram(tokens, "a", "little") || has_bigram(tokens, "a", "bit") || has_token(tokens, "slightly")) {
      m = Magnitude::Slight;
    } else if (has_token(tokens, "much") || has_bigram(tokens, "a", "lot")) {
      m = Magnitude::Large;
    }
    out.kind = Directional{hit->axis, hit->sign, m};
    return out;
  }

  for (const char* kind_word : {"hex", "phillips"}) {
    if (has_token(tokens, kind_word)) {
      out.kind = ToolByName{kind_word};
      return out;
    }
  }
  if (has_token(tokens, "driver") || has_token(tokens, "screwdriver")) {
    out.kind = ToolByName{""};
    return out;
  }
  return out;
}

inline nlohmann::json to_json(const ParsedInstruction& p) {
  nlohmann::json j = {{"raw", p.raw}};
  if (const auto* d = p.directional()) {
    j["kind"] = "directional";
    j["axis"] = std::string(to_string(d->axis));
    j["sign"] = d->sign;
    j["magnitude"] = std::string(to_string(d->magnitude));
  } else if (const auto* c = p.comparative()) {
    j["kind"] = "comparative";
    j["attribute"] = "bit_size";
    j["direction"] = c->direction == CompareDirection::Bigger ? "bigger" : "smaller";
  } else if (const auto* t = p.tool_by_name()) {
    j["kind"] = "tool_by_name";
    j["fragment"] = t->fragment;
  } else if (p.is_done()) {
    j["kind"] = "done";
  } else {
    j["kind"] = "unknown";
  }
  return j;
}

}  // namespace replan
