#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "behav/errors.hpp"
#include "behav/geometry.hpp"

namespace behav {

// Response schemas accepted from language / vision backends.
enum class SchemaId { decompose, desirability, landmark };

inline std::string_view to_string(SchemaId id) {
  switch (id) {
    case SchemaId::decompose: return "decompose";
    case SchemaId::desirability: return "desirability";
    case SchemaId::landmark: return "landmark";
  }
  return "?";
}

struct DecomposeResponse {
  std::vector<std::string> nav_actions;
  std::vector<std::string> nav_landmarks;
  std::vector<std::string> behav_actions;
  std::vector<std::string> behav_targets;
};

struct DesirabilityResponse {
  std::vector<double> values;
};

struct LandmarkResponse {
  std::optional<Pixel> pixel;  // empty: landmark reported absent
};

using ValidatedResponse = std::variant<DecomposeResponse, DesirabilityResponse, LandmarkResponse>;

namespace detail {

// Models like to wrap JSON answers in markdown fences.
inline std::string_view strip_fences(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.starts_with("```")) {
    const auto nl = s.find('\n');
    s = nl == std::string_view::npos ? std::string_view{} : s.substr(nl + 1);
    if (const auto end = s.rfind("```"); end != std::string_view::npos) s = s.substr(0, end);
  }
  return s;
}

inline nlohmann::json parse_object(std::string_view body) {
  const auto doc = nlohmann::json::parse(strip_fences(body), nullptr, false);
  if (doc.is_discarded()) throw MalformedResponse("not valid JSON");
  if (!doc.is_object()) throw MalformedResponse("top level is not an object");
  return doc;
}

inline std::vector<std::string> string_list(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key)) throw MalformedResponse(std::string(key) + " missing");
  const auto& arr = doc.at(key);
  if (!arr.is_array()) throw MalformedResponse(std::string(key) + " is not a list");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string())
      throw MalformedResponse(std::string(key) + "[" + std::to_string(i) + "]");
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

}  // namespace detail

inline DecomposeResponse validate_decompose(std::string_view body) {
  const auto doc = detail::parse_object(body);
  static constexpr const char* kKeys[] = {"nav_actions", "nav_landmarks", "behav_actions",
                                          "behav_targets"};
  for (const auto& [key, _] : doc.items()) {
    if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* k) { return key == k; }) ==
        std::end(kKeys))
      throw MalformedResponse("unexpected key " + key);
  }
  DecomposeResponse r{detail::string_list(doc, "nav_actions"),
                      detail::string_list(doc, "nav_landmarks"),
                      detail::string_list(doc, "behav_actions"),
                      detail::string_list(doc, "behav_targets")};
  if (r.behav_actions.size() != r.behav_targets.size())
    throw MalformedResponse("behav_targets length " + std::to_string(r.behav_targets.size()) +
                            " != behav_actions length " + std::to_string(r.behav_actions.size()));
  return r;
}

inline DesirabilityResponse validate_desirability(std::string_view body) {
  const auto doc = detail::parse_object(body);
  if (!doc.contains("values")) throw MalformedResponse("values missing");
  const auto& arr = doc.at("values");
  if (!arr.is_array()) throw MalformedResponse("values is not a list");
  DesirabilityResponse r;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "values[" + std::to_string(i) + "]";
    if (!arr[i].is_number()) throw MalformedResponse(path);
    const double v = arr[i].get<double>();
    if (!(v >= -0.01 && v <= 1.01)) throw MalformedResponse(path);
    r.values.push_back(v);
  }
  return r;
}

inline LandmarkResponse validate_landmark(std::string_view body) {
  const auto doc = detail::parse_object(body);
  if (doc.contains("found")) {
    if (!doc.at("found").is_boolean()) throw MalformedResponse("found is not a boolean");
    if (!doc.at("found").get<bool>()) return {};
  }
  const bool has_x = doc.contains("x"), has_y = doc.contains("y");
  if (!has_x && !has_y) throw MalformedResponse("x and y missing");
  if (!has_x) throw MalformedResponse("x missing");
  if (!has_y) throw MalformedResponse("y missing");
  if (!doc.at("x").is_number()) throw MalformedResponse("x");
  if (!doc.at("y").is_number()) throw MalformedResponse("y");
  return {Pixel{doc.at("x").get<double>(), doc.at("y").get<double>()}};
}

inline ValidatedResponse validate(std::string_view body, SchemaId schema) {
  switch (schema) {
    case SchemaId::decompose: return validate_decompose(body);
    case SchemaId::desirability: return validate_desirability(body);
    case SchemaId::landmark: return validate_landmark(body);
  }
  throw InvalidArgument("unknown schema");
}

}  // namespace behav
