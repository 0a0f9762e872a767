#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include <httplib.h>
#include <json.hpp>

#include "behav/codec.hpp"
#include "behav/costmap.hpp"
#include "behav/errors.hpp"
#include "behav/instruction.hpp"
#include "behav/landmark.hpp"
#include "behav/random.hpp"
#include "behav/schema.hpp"
#include "behav/text.hpp"

namespace behav {

enum class BackendMode { live, record, replay };

inline BackendMode parse_backend_mode(std::string_view s) {
  if (s == "live") return BackendMode::live;
  if (s == "record") return BackendMode::record;
  if (s == "replay") return BackendMode::replay;
  throw InvalidArgument("unknown backend mode '" + std::string(s) + "'");
}

inline std::string_view to_string(BackendMode m) {
  switch (m) {
    case BackendMode::live: return "live";
    case BackendMode::record: return "record";
    case BackendMode::replay: return "replay";
  }
  return "?";
}

struct BackendEndpoint {
  std::string url;        // scheme://host[:port]/path
  std::string token_env;  // name of the environment variable holding a bearer token
  double timeout_s = 30.0;
  int retries = 3;        // extra attempts after the first
  BackendMode mode = BackendMode::replay;
  std::string fixture_path;
  double backoff_base_s = 0.25;
  double backoff_cap_s = 4.0;
  std::uint64_t jitter_seed = 0;

  void validate() const {
    if (!(timeout_s > 0)) throw InvalidArgument("endpoint: timeout must be positive");
    if (retries < 0) throw InvalidArgument("endpoint: retries must be >= 0");
    if (mode == BackendMode::replay && fixture_path.empty())
      throw InvalidArgument("endpoint: replay mode needs a fixture path");
    if (mode == BackendMode::record && fixture_path.empty())
      throw InvalidArgument("endpoint: record mode needs a fixture path");
    if (mode != BackendMode::replay && url.empty()) throw InvalidArgument("endpoint: url is empty");
  }
};

// ---------------------------------------------------------------------------
// Digests and fixtures

// Canonical text of a request: sorted keys, no whitespace, shortest
// round-trip float formatting.
inline std::string canonical_json(const nlohmann::json& j) { return j.dump(); }

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 15];
  }
  return out;
}

inline std::string request_digest(const nlohmann::json& request) { return sha256_hex(canonical_json(request)); }

struct FixtureRecord {
  std::string digest;
  nlohmann::json request;
  std::string response;
  double latency_s = 0.0;
};

class Fixture {
 public:
  Fixture() = default;

  static Fixture load(const std::string& path) {
    Fixture f;
    std::ifstream in(path);
    if (!in) return f;  // a missing file is an empty fixture
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("digest") || !j.contains("response"))
        throw InvalidArgument(path + ":" + std::to_string(lineno) + ": bad fixture record");
      FixtureRecord r;
      r.digest = j.at("digest").get<std::string>();
      r.request = j.value("request", nlohmann::json());
      r.response = j.at("response").get<std::string>();
      r.latency_s = j.value("latency_s", 0.0);
      if (f.index_.count(r.digest))
        throw InvalidArgument(path + ":" + std::to_string(lineno) + ": duplicate digest " + r.digest);
      f.add(std::move(r));
    }
    return f;
  }

  const FixtureRecord* find(const std::string& digest) const {
    auto it = index_.find(digest);
    return it == index_.end() ? nullptr : &records_[it->second];
  }

  // Later records with the same digest replace earlier ones in memory.
  void add(FixtureRecord r) {
    if (auto it = index_.find(r.digest); it != index_.end()) {
      records_[it->second] = std::move(r);
      return;
    }
    index_[r.digest] = records_.size();
    records_.push_back(std::move(r));
  }

  const std::vector<FixtureRecord>& records() const { return records_; }

  static nlohmann::json to_json(const FixtureRecord& r) {
    return {{"digest", r.digest}, {"request", r.request}, {"response", r.response}, {"latency_s", r.latency_s}};
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + path);
    for (const auto& r : records_) out << to_json(r).dump() << '\n';
  }

 private:
  std::vector<FixtureRecord> records_;
  std::map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Transport

struct CallResult {
  std::string body;
  double latency_s = 0.0;  // wall time (live) or recorded time (replay)
  int attempts = 0;
};

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidArgument("url without scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class Gateway {
 public:
  explicit Gateway(BackendEndpoint ep) : ep_(std::move(ep)), jitter_(mix_seed(ep_.jitter_seed, 0x6a77)) {
    ep_.validate();
    if (ep_.mode != BackendMode::live) fixture_ = Fixture::load(ep_.fixture_path);
  }

  const BackendEndpoint& endpoint() const { return ep_; }
  const Fixture& fixture() const { return fixture_; }

  CallResult call(const nlohmann::json& request) {
    const auto digest = request_digest(request);
    if (ep_.mode == BackendMode::replay) {
      const auto* r = fixture_.find(digest);
      if (!r) throw FixtureMiss("no fixture for digest " + digest + " in " + ep_.fixture_path);
      return {r->response, r->latency_s, 0};
    }
    auto res = post(canonical_json(request));
    if (ep_.mode == BackendMode::record) {
      std::lock_guard<std::mutex> lock(mu_);
      FixtureRecord rec{digest, request, res.body, res.latency_s};
      std::ofstream out(ep_.fixture_path, std::ios::app);
      if (!out) throw InvalidArgument("cannot append to " + ep_.fixture_path);
      out << Fixture::to_json(rec).dump() << '\n';
      fixture_.add(std::move(rec));
    }
    return res;
  }

 private:
  CallResult post(const std::string& body) {
    const auto url = parse_url(ep_.url);
    httplib::Client cli(url.origin);
    const auto whole = std::chrono::duration<double>(ep_.timeout_s);
    cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(whole));
    cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(whole));
    cli.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(whole));
    httplib::Headers headers;
    if (!ep_.token_env.empty())
      if (const char* tok = std::getenv(ep_.token_env.c_str()); tok && *tok)
        headers.emplace("Authorization", std::string("Bearer ") + tok);

    std::string last_error;
    bool last_timed_out = false;
    const int attempts = 1 + ep_.retries;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
      const auto t0 = std::chrono::steady_clock::now();
      auto res = cli.Post(url.path, headers, body, "application/json");
      const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (res && res->status >= 200 && res->status < 300) return {res->body, dt, attempt};
      if (res) {
        last_error = "HTTP " + std::to_string(res->status);
        last_timed_out = false;
        const bool retryable = res->status >= 500 || res->status == 429 || res->status == 408;
        if (!retryable) throw BackendUnavailable(ep_.url + ": " + last_error);
      } else {
        last_error = httplib::to_string(res.error());
        last_timed_out = res.error() == httplib::Error::Read || res.error() == httplib::Error::Write ||
                         res.error() == httplib::Error::ConnectionTimeout;
      }
      if (attempt < attempts) std::this_thread::sleep_for(std::chrono::duration<double>(backoff(attempt)));
    }
    const std::string msg = ep_.url + ": " + last_error + " after " + std::to_string(attempts) + " attempts";
    if (last_timed_out) throw TimedOut(msg);
    throw BackendUnavailable(msg);
  }

  // Exponential backoff, scaled by a jitter factor in [0.5, 1).
  double backoff(int attempt) {
    const double cap = std::min(ep_.backoff_cap_s, ep_.backoff_base_s * std::pow(2.0, attempt - 1));
    return jitter_.uniform(0.5, 1.0) * cap;
  }

  BackendEndpoint ep_;
  Fixture fixture_;
  Rng jitter_;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Request builders. "chat" speaks the OpenAI-compatible chat-completions
// format; "plain" posts {schema, prompt[, image]} and expects the structured
// answer as the response body.

enum class Provider { chat, plain };

inline Provider parse_provider(std::string_view s) {
  if (s == "chat") return Provider::chat;
  if (s == "plain") return Provider::plain;
  throw InvalidArgument("unknown provider '" + std::string(s) + "'");
}

inline nlohmann::json build_request(Provider provider, const std::string& model, SchemaId schema,
                                    const std::string& prompt, const std::string* image_png = nullptr) {
  if (provider == Provider::plain) {
    nlohmann::json j{{"schema", std::string(to_string(schema))}, {"prompt", prompt}};
    if (!model.empty()) j["model"] = model;
    if (image_png) j["image_png_base64"] = codec::base64_encode(*image_png);
    return j;
  }
  nlohmann::json content;
  if (image_png) {
    content = nlohmann::json::array(
        {{{"type", "text"}, {"text", prompt}},
         {{"type", "image_url"},
          {"image_url", {{"url", "data:image/png;base64," + codec::base64_encode(*image_png)}}}}});
  } else {
    content = prompt;
  }
  return {{"model", model},
          {"temperature", 0},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})}};
}

inline std::string extract_content(Provider provider, const std::string& body) {
  if (provider == Provider::plain) return body;
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw MalformedResponse("response is not a JSON object");
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    throw MalformedResponse("choices missing");
  const auto& msg = j["choices"][0];
  if (!msg.contains("message") || !msg["message"].contains("content") ||
      !msg["message"]["content"].is_string())
    throw MalformedResponse("choices[0].message.content missing");
  return msg["message"]["content"].get<std::string>();
}

struct ModelConfig {
  BackendEndpoint endpoint;
  Provider provider = Provider::chat;
  std::string model;
};

class RemoteLanguageModel : public LanguageModel {
 public:
  explicit RemoteLanguageModel(ModelConfig cfg) : cfg_(cfg), gw_(std::move(cfg.endpoint)) {}

  std::string complete(const std::string& prompt, SchemaId schema) override {
    const auto res = gw_.call(build_request(cfg_.provider, cfg_.model, schema, prompt));
    last_latency_ = res.latency_s;
    return extract_content(cfg_.provider, res.body);
  }

  double last_latency() const { return last_latency_; }

 private:
  ModelConfig cfg_;
  Gateway gw_;
  double last_latency_ = 0.0;
};

class RemoteLandmarkDetector : public LandmarkBackend {
 public:
  explicit RemoteLandmarkDetector(ModelConfig cfg) : cfg_(cfg), gw_(std::move(cfg.endpoint)) {}

  std::optional<Pixel> locate(const SensorFrame& frame, const std::string& /*landmark_text*/,
                              const std::string& prompt) override {
    const auto png = codec::frame_to_png(frame);
    const auto res = gw_.call(build_request(cfg_.provider, cfg_.model, SchemaId::landmark, prompt, &png));
    last_latency_ = res.latency_s;
    return validate_landmark(extract_content(cfg_.provider, res.body)).pixel;
  }

  double last_latency() const { return last_latency_; }

 private:
  ModelConfig cfg_;
  Gateway gw_;
  double last_latency_ = 0.0;
};

// Remote open-vocabulary segmentation. Request:
// {"labels": [...], "width": W, "height": H, "image_png_base64": ...};
// response: {"maps": [{"label": ..., "values": [W*H numbers, row-major]}]}.
class RemoteSegmenter : public SegmentationBackend {
 public:
  explicit RemoteSegmenter(BackendEndpoint ep) : gw_(std::move(ep)) {}

  std::vector<SegmentationMap> segment(const SensorFrame& frame,
                                       const std::vector<std::string>& labels) override {
    const nlohmann::json req{{"labels", labels},
                             {"width", frame.width()},
                             {"height", frame.height()},
                             {"image_png_base64", codec::base64_encode(codec::frame_to_png(frame))}};
    const auto res = gw_.call(req);
    const auto j = nlohmann::json::parse(res.body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("maps") || !j["maps"].is_array())
      throw MalformedResponse("maps missing");
    std::vector<SegmentationMap> out;
    const auto n = static_cast<std::size_t>(frame.width()) * frame.height();
    for (std::size_t k = 0; k < j["maps"].size(); ++k) {
      const auto& m = j["maps"][k];
      const std::string where = "maps[" + std::to_string(k) + "]";
      if (!m.contains("values") || !m["values"].is_array() || m["values"].size() != n)
        throw MalformedResponse(where + ".values");
      ProbRaster r(frame.width(), frame.height());
      for (std::size_t i = 0; i < n; ++i) {
        if (!m["values"][i].is_number()) throw MalformedResponse(where + ".values[" + std::to_string(i) + "]");
        r[i] = m["values"][i].get<double>();
      }
      out.push_back({std::move(r), m.value("label", k < labels.size() ? labels[k] : std::string())});
    }
    return out;
  }

 private:
  Gateway gw_;
};

}  // namespace behav
