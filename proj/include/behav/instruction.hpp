#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "behav/errors.hpp"
#include "behav/schema.hpp"
#include "behav/text.hpp"

namespace behav {

// The four sets an instruction decomposes into. Behavioral actions and
// targets are index-aligned pairs.
struct InstructionBundle {
  std::vector<std::string> nav_actions;
  std::vector<std::string> nav_landmarks;
  std::vector<std::string> behav_actions;
  std::vector<std::string> behav_targets;

  friend bool operator==(const InstructionBundle&, const InstructionBundle&) = default;
};

struct DesirabilityVector {
  std::vector<double> values;
};

struct BehaviorRule {
  std::string action;
  std::string target;
  double desirability = 0.5;
  double undesirability = 0.5;
};

inline BehaviorRule make_rule(std::string action, std::string target, double desirability) {
  return {std::move(action), std::move(target), desirability, 1.0 - desirability};
}

// Prompt templates. Placeholders: {instruction}, {actions}, {landmark}.
struct PromptSet {
  std::string decompose_prompt;
  std::string action_prompt;
  std::string frontier_prompt;
  std::string instruction;
};

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string render_decompose_prompt(const PromptSet& p) {
  return text::replace_all(p.decompose_prompt, "{instruction}", p.instruction);
}

inline std::string render_action_prompt(const PromptSet& p, const std::vector<std::string>& actions) {
  return text::replace_all(p.action_prompt, "{actions}", nlohmann::json(actions).dump());
}

inline std::string render_frontier_prompt(const PromptSet& p, std::string_view landmark) {
  return text::replace_all(p.frontier_prompt, "{landmark}", std::string(landmark));
}

// A text-completion backend. Implementations throw BackendUnavailable (or a
// subclass) when they cannot produce an answer.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::string complete(const std::string& prompt, SchemaId schema) = 0;
};

namespace detail {

inline std::vector<std::string> normalized_nonempty(const std::vector<std::string>& in,
                                                    const char* field) {
  std::vector<std::string> out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto s = text::normalize(in[i]);
    if (s.empty()) throw MalformedResponse(std::string(field) + "[" + std::to_string(i) + "]");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace detail

inline InstructionBundle decompose(const PromptSet& prompts, LanguageModel& backend) {
  if (text::normalize(prompts.instruction).empty()) return {};
  const auto r = validate_decompose(backend.complete(render_decompose_prompt(prompts),
                                                     SchemaId::decompose));
  return {detail::normalized_nonempty(r.nav_actions, "nav_actions"),
          detail::normalized_nonempty(r.nav_landmarks, "nav_landmarks"),
          detail::normalized_nonempty(r.behav_actions, "behav_actions"),
          detail::normalized_nonempty(r.behav_targets, "behav_targets")};
}

// ---------------------------------------------------------------------------
// Offline grammar

struct UnclassifiableClause {
  std::string clause;
};

struct FallbackResult {
  InstructionBundle bundle;
  std::vector<UnclassifiableClause> skipped;
};

inline const std::vector<std::string>& nav_verbs() {
  static const std::vector<std::string> v{"go forward until", "move forward until", "go to",
                                          "navigate to", "walk to"};
  return v;
}

inline const std::vector<std::string>& behav_verbs() {
  static const std::vector<std::string> v{"stay on",        "follow",    "stop for",
                                          "stay away from", "avoid",     "yield to",
                                          "use caution",    "watch your step"};
  return v;
}

namespace detail {

inline std::string_view longest_verb(std::string_view clause, const std::vector<std::string>& verbs) {
  std::string_view best;
  for (const auto& v : verbs)
    if (text::starts_with_word(clause, v) && v.size() > best.size()) best = v;
  return best;
}

inline bool starts_with_any_verb(std::string_view s) {
  return !longest_verb(s, nav_verbs()).empty() || !longest_verb(s, behav_verbs()).empty();
}

inline std::string strip_leading(std::string s, std::initializer_list<std::string_view> prefixes) {
  for (bool again = true; again;) {
    again = false;
    for (auto p : prefixes) {
      if (text::starts_with_word(s, p)) {
        s = std::string(text::trim(std::string_view(s).substr(p.size())));
        again = true;
      }
    }
  }
  return s;
}

inline std::string singular(std::string w) {
  if (w.size() <= 3) return w;
  if (w.ends_with("sses")) return w.substr(0, w.size() - 2);
  if (w.ends_with("ies")) return w.substr(0, w.size() - 3) + "y";
  if (w.ends_with("ss") || w.ends_with("us") || w.ends_with("is")) return w;
  if (w.ends_with('s')) w.pop_back();
  return w;
}

// Multi-word targets name countable objects ("stop signs" -> "stop sign");
// single words are usually surfaces or mass nouns and stay as written.
inline std::string canonical_target(std::string t) {
  auto words = text::split_words(t);
  if (words.size() < 2) return t;
  words.back() = singular(words.back());
  return text::join(words, " ");
}

inline std::vector<std::string> split_clauses(const std::string& instr) {
  std::vector<std::string> pieces;
  std::string cur;
  for (char c : instr) {
    if (c == ',' || c == ';') {
      pieces.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  pieces.push_back(cur);

  std::vector<std::string> clauses;
  for (auto& piece : pieces) {
    std::string rest = std::string(text::trim(piece));
    rest = strip_leading(rest, {"and", "then", "please"});
    // Split on "and" only where a new verb phrase starts.
    std::size_t search = 0;
    while (true) {
      const auto pos = rest.find(" and ", search);
      if (pos == std::string::npos) break;
      std::string tail = strip_leading(rest.substr(pos + 5), {"then", "please"});
      if (starts_with_any_verb(tail)) {
        clauses.push_back(rest.substr(0, pos));
        rest = tail;
        search = 0;
      } else {
        search = pos + 1;
      }
    }
    clauses.push_back(rest);
  }
  std::vector<std::string> out;
  for (auto& c : clauses) {
    auto n = text::normalize(c);
    if (!n.empty()) out.push_back(std::move(n));
  }
  return out;
}

}  // namespace detail

inline FallbackResult decompose_fallback(std::string_view instr) {
  FallbackResult result;
  auto& b = result.bundle;
  for (const auto& clause : detail::split_clauses(text::normalize(instr))) {
    const auto nav = detail::longest_verb(clause, nav_verbs());
    const auto beh = detail::longest_verb(clause, behav_verbs());
    if (!nav.empty() && nav.size() >= beh.size()) {
      b.nav_actions.emplace_back(nav);
      auto landmark = detail::strip_leading(std::string(text::trim(clause.substr(nav.size()))),
                                            {"you see", "you reach", "you find", "you get to"});
      if (!landmark.empty()) b.nav_landmarks.push_back(text::normalize(landmark));
      continue;
    }
    if (!beh.empty()) {
      auto target = detail::strip_leading(
          std::string(text::trim(clause.substr(beh.size()))),
          {"to follow", "to", "the", "a", "an", "on", "near", "around", "at", "for", "with", "of",
           "when on", "when crossing"});
      target = text::normalize(target);
      if (target.empty()) {
        result.skipped.push_back({clause});
        continue;
      }
      b.behav_actions.emplace_back(beh);
      b.behav_targets.push_back(detail::canonical_target(std::move(target)));
      continue;
    }
    result.skipped.push_back({clause});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Desirability

// Fallback desirability per behavioral verb. Values are configuration.
struct DesirabilityTable {
  std::map<std::string, double> entries{
      {"stay on", 0.9},        {"follow", 0.9},   {"use caution", 0.5},
      {"watch your step", 0.5}, {"yield to", 0.2}, {"stay away from", 0.1},
      {"avoid", 0.1},          {"stop for", 0.0},
  };
  double unknown = 0.5;

  static DesirabilityTable from_json(const nlohmann::json& j) {
    DesirabilityTable t;
    if (j.contains("entries")) {
      t.entries.clear();
      for (const auto& [k, v] : j.at("entries").items()) t.entries[text::normalize(k)] = v.get<double>();
    }
    if (j.contains("unknown")) t.unknown = j.at("unknown").get<double>();
    return t;
  }

  // Exact match, else the longest entry contained in the action.
  std::optional<double> lookup(std::string_view action) const {
    const auto a = text::normalize(action);
    if (auto it = entries.find(a); it != entries.end()) return it->second;
    const std::pair<const std::string, double>* best = nullptr;
    for (const auto& e : entries)
      if (a.find(e.first) != std::string::npos && (!best || e.first.size() > best->first.size()))
        best = &e;
    if (best) return best->second;
    return std::nullopt;
  }
};

inline DesirabilityVector score_desirability_fallback(const std::vector<std::string>& actions,
                                                      const DesirabilityTable& table = {},
                                                      std::vector<std::string>* unknown = nullptr) {
  DesirabilityVector out;
  out.values.reserve(actions.size());
  for (const auto& a : actions) {
    const auto v = table.lookup(a);
    if (!v && unknown) unknown->push_back(a);
    out.values.push_back(v.value_or(table.unknown));
  }
  return out;
}

inline DesirabilityVector score_desirability(const std::vector<std::string>& actions,
                                             const PromptSet& prompts, LanguageModel& backend) {
  if (actions.empty()) return {};
  const auto r = validate_desirability(
      backend.complete(render_action_prompt(prompts, actions), SchemaId::desirability));
  if (r.values.size() != actions.size())
    throw MalformedResponse("values length " + std::to_string(r.values.size()) + " != " +
                            std::to_string(actions.size()));
  DesirabilityVector out;
  for (double v : r.values) out.values.push_back(std::clamp(v, 0.0, 1.0));
  return out;
}

inline std::vector<BehaviorRule> pair_rules(const InstructionBundle& bundle,
                                            const DesirabilityVector& scores) {
  const auto n = bundle.behav_actions.size();
  if (bundle.behav_targets.size() != n || scores.values.size() != n)
    throw LengthMismatch("pair_rules: " + std::to_string(n) + " actions, " +
                         std::to_string(bundle.behav_targets.size()) + " targets, " +
                         std::to_string(scores.values.size()) + " scores");
  std::vector<BehaviorRule> rules;
  rules.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    rules.push_back(make_rule(bundle.behav_actions[i], bundle.behav_targets[i], scores.values[i]));
  return rules;
}

inline bool gait_caution_flag(const std::vector<std::string>& behav_actions) {
  return std::any_of(behav_actions.begin(), behav_actions.end(), [](const std::string& a) {
    const auto n = text::normalize(a);
    if (n.find("use caution") != std::string::npos) return true;
    const auto w = n.find("watch");
    return w != std::string::npos && n.find("step", w) != std::string::npos;
  });
}

// ---------------------------------------------------------------------------
// Mission-start pipeline: backend first, grammar/table on failure.

struct MissionRules {
  InstructionBundle bundle;
  DesirabilityVector scores;
  std::vector<BehaviorRule> rules;
  bool decompose_fell_back = false;
  bool scores_fell_back = false;
  std::vector<UnclassifiableClause> skipped;
  std::vector<std::string> unknown_actions;
};

inline MissionRules prepare_mission(const PromptSet& prompts, LanguageModel* backend,
                                    const DesirabilityTable& table = {},
                                    bool allow_fallback = true) {
  MissionRules m;
  auto fallback_decompose = [&] {
    auto fb = decompose_fallback(prompts.instruction);
    m.bundle = std::move(fb.bundle);
    m.skipped = std::move(fb.skipped);
    m.decompose_fell_back = true;
  };
  if (backend) {
    try {
      m.bundle = decompose(prompts, *backend);
    } catch (const BackendUnavailable&) {
      if (!allow_fallback) throw;
      fallback_decompose();
    } catch (const MalformedResponse&) {
      if (!allow_fallback) throw;
      fallback_decompose();
    }
  } else {
    fallback_decompose();
  }

  auto fallback_scores = [&] {
    m.scores = score_desirability_fallback(m.bundle.behav_actions, table, &m.unknown_actions);
    m.scores_fell_back = true;
  };
  if (backend) {
    try {
      m.scores = score_desirability(m.bundle.behav_actions, prompts, *backend);
    } catch (const BackendUnavailable&) {
      if (!allow_fallback) throw;
      fallback_scores();
    } catch (const MalformedResponse&) {
      if (!allow_fallback) throw;
      fallback_scores();
    }
  } else {
    fallback_scores();
  }
  m.rules = pair_rules(m.bundle, m.scores);
  return m;
}

}  // namespace behav
