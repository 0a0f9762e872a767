#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <gtest/gtest.h>

#include "behav/gateway.hpp"

using namespace behav;
namespace fs = std::filesystem;

namespace {

// Local HTTP server running on an ephemeral port for the test's lifetime.
class StubServer {
 public:
  explicit StubServer(httplib::Server::Handler handler) {
    svr_.Post("/v1/call", std::move(handler));
    port_ = svr_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { svr_.listen_after_bind(); });
    svr_.wait_until_ready();
  }
  ~StubServer() {
    svr_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/call"; }

 private:
  httplib::Server svr_;
  int port_ = 0;
  std::thread thread_;
};

BackendEndpoint live_endpoint(const std::string& url, int retries) {
  BackendEndpoint ep;
  ep.url = url;
  ep.mode = BackendMode::live;
  ep.retries = retries;
  ep.timeout_s = 2.0;
  ep.backoff_base_s = 0.01;
  ep.backoff_cap_s = 0.02;
  return ep;
}

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "behav_gateway_test";
  fs::create_directories(dir);
  const auto p = dir / name;
  fs::remove(p);
  return p;
}

void write_fixture(const fs::path& p, const std::vector<FixtureRecord>& recs) {
  std::ofstream out(p);
  for (const auto& r : recs) out << Fixture::to_json(r).dump() << '\n';
}

}  // namespace

TEST(Digest, CanonicalAndStable) {
  const nlohmann::json a{{"b", {1.5, "x"}}, {"a", 1}, {"c", {{"d", nullptr}}}};
  nlohmann::json b;
  b["c"]["d"] = nullptr;
  b["a"] = 1;
  b["b"] = {1.5, "x"};
  EXPECT_EQ(canonical_json(a), R"({"a":1,"b":[1.5,"x"],"c":{"d":null}})");
  EXPECT_EQ(request_digest(a), request_digest(b));
  EXPECT_EQ(request_digest(a), "dcbeae96628dbd6ab71552eab890c6506288a9a45779ff2374bd486411f8e784");
  EXPECT_NE(request_digest(a), request_digest(nlohmann::json{{"a", 2}}));
}

TEST(Replay, ReturnsRecordedResponseVerbatim) {
  const auto path = temp_file("replay.jsonl");
  const nlohmann::json req{{"prompt", "hello"}};
  write_fixture(path, {{request_digest(req), req, "  {\"values\": [0.9]}\n", 5.5}});
  BackendEndpoint ep;
  ep.url = "http://127.0.0.1:1/unreachable";
  ep.mode = BackendMode::replay;
  ep.fixture_path = path.string();
  Gateway gw(ep);
  const auto res = gw.call(req);
  EXPECT_EQ(res.body, "  {\"values\": [0.9]}\n");
  EXPECT_EQ(res.latency_s, 5.5);
  EXPECT_EQ(res.attempts, 0);
  EXPECT_THROW(gw.call(nlohmann::json{{"prompt", "other"}}), FixtureMiss);
}

TEST(Replay, NeverTouchesTheNetwork) {
  std::atomic<int> hits{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.set_content("live", "text/plain");
  });
  const auto path = temp_file("offline.jsonl");
  const nlohmann::json req{{"q", 1}};
  write_fixture(path, {{request_digest(req), req, "recorded", 0.0}});
  BackendEndpoint ep;
  ep.url = server.url();
  ep.mode = BackendMode::replay;
  ep.fixture_path = path.string();
  Gateway gw(ep);
  EXPECT_EQ(gw.call(req).body, "recorded");
  EXPECT_THROW(gw.call(nlohmann::json{{"q", 2}}), FixtureMiss);
  EXPECT_EQ(hits.load(), 0);
}

TEST(Fixture, DuplicateDigestIsRejected) {
  const auto path = temp_file("dup.jsonl");
  const nlohmann::json req{{"q", 1}};
  write_fixture(path, {{request_digest(req), req, "a", 0.0}, {request_digest(req), req, "b", 0.0}});
  EXPECT_THROW(Fixture::load(path.string()), InvalidArgument);
  std::ofstream(path) << "not json\n";
  EXPECT_THROW(Fixture::load(path.string()), InvalidArgument);
  EXPECT_TRUE(Fixture::load((path.string() + ".missing")).records().empty());
}

TEST(Endpoint, Validation) {
  BackendEndpoint ep;
  ep.mode = BackendMode::replay;
  EXPECT_THROW(ep.validate(), InvalidArgument);
  ep.fixture_path = "x.jsonl";
  EXPECT_NO_THROW(ep.validate());
  ep.timeout_s = 0;
  EXPECT_THROW(ep.validate(), InvalidArgument);
  EXPECT_EQ(parse_backend_mode("record"), BackendMode::record);
  EXPECT_THROW(parse_backend_mode("cloud"), InvalidArgument);
}

TEST(Live, RetriesServerErrorsUntilSuccess) {
  std::atomic<int> hits{0};
  StubServer server([&](const httplib::Request& req, httplib::Response& res) {
    if (++hits <= 2) {
      res.status = 500;
      return;
    }
    res.set_content("ok:" + req.body, "application/json");
  });
  Gateway gw(live_endpoint(server.url(), 3));
  const auto res = gw.call(nlohmann::json{{"n", 1}});
  EXPECT_EQ(res.body, R"(ok:{"n":1})");
  EXPECT_EQ(res.attempts, 3);
  EXPECT_EQ(hits.load(), 3);
}

TEST(Live, GivesUpAfterRetries) {
  std::atomic<int> hits{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  Gateway gw(live_endpoint(server.url(), 2));
  EXPECT_THROW(gw.call(nlohmann::json{{"n", 1}}), BackendUnavailable);
  EXPECT_EQ(hits.load(), 3);
}

TEST(Live, ClientErrorsAreNotRetried) {
  std::atomic<int> hits{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 400;
  });
  Gateway gw(live_endpoint(server.url(), 3));
  EXPECT_THROW(gw.call(nlohmann::json{{"n", 1}}), BackendUnavailable);
  EXPECT_EQ(hits.load(), 1);
}

TEST(Live, DeadlineRaisesTimedOut) {
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(800));
    res.set_content("late", "text/plain");
  });
  auto ep = live_endpoint(server.url(), 0);
  ep.timeout_s = 0.2;
  Gateway gw(ep);
  EXPECT_THROW(gw.call(nlohmann::json{{"n", 1}}), TimedOut);
}

TEST(Live, ConnectionRefusedIsUnavailable) {
  auto ep = live_endpoint("http://127.0.0.1:1/v1/call", 1);
  ep.timeout_s = 0.5;
  Gateway gw(ep);
  EXPECT_THROW(gw.call(nlohmann::json{{"n", 1}}), BackendUnavailable);
}

TEST(Live, SendsBearerTokenFromEnvironment) {
  std::string auth;
  StubServer server([&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    res.set_content("{}", "application/json");
  });
  ::setenv("BEHAV_LLM_TOKEN", "secret-123", 1);
  auto ep = live_endpoint(server.url(), 0);
  ep.token_env = "BEHAV_LLM_TOKEN";
  Gateway(ep).call(nlohmann::json{{"n", 1}});
  ::unsetenv("BEHAV_LLM_TOKEN");
  EXPECT_EQ(auth, "Bearer secret-123");
}

TEST(Record, AppendsToFixtureThenReplays) {
  StubServer server([&](const httplib::Request& req, httplib::Response& res) {
    res.set_content("echo " + req.body, "text/plain");
  });
  const auto path = temp_file("record.jsonl");
  auto ep = live_endpoint(server.url(), 0);
  ep.mode = BackendMode::record;
  ep.fixture_path = path.string();
  {
    Gateway gw(ep);
    gw.call(nlohmann::json{{"k", "a"}});
    gw.call(nlohmann::json{{"k", "b"}});
  }
  const auto f = Fixture::load(path.string());
  ASSERT_EQ(f.records().size(), 2u);
  EXPECT_EQ(f.records()[0].request, (nlohmann::json{{"k", "a"}}));
  ep.mode = BackendMode::replay;
  Gateway replay(ep);
  EXPECT_EQ(replay.call(nlohmann::json{{"k", "b"}}).body, R"(echo {"k":"b"})");
}

TEST(Codec, Base64AndPng) {
  EXPECT_EQ(codec::base64_encode("hello"), "aGVsbG8=");
  EXPECT_EQ(codec::base64_encode(""), "");
  std::string bytes;
  for (int i = 0; i < 256; ++i) bytes += static_cast<char>(i);
  EXPECT_EQ(codec::base64_decode(codec::base64_encode(bytes)), bytes);
  const auto png = codec::encode_png_rgb(3, 2, std::vector<std::uint8_t>(18, 200));
  ASSERT_GT(png.size(), 33u);
  EXPECT_EQ(png.substr(0, 8), std::string("\x89PNG\r\n\x1a\n", 8));
  EXPECT_EQ(png.substr(12, 4), "IHDR");
  EXPECT_EQ(static_cast<unsigned char>(png[19]), 3u);
  EXPECT_EQ(static_cast<unsigned char>(png[23]), 2u);
}

TEST(Requests, BuildAndExtract) {
  const auto plain = build_request(Provider::plain, "", SchemaId::desirability, "score it");
  EXPECT_EQ(plain["prompt"], "score it");
  EXPECT_FALSE(plain.contains("model"));
  const std::string img = "PNGDATA";
  const auto chat = build_request(Provider::chat, "m1", SchemaId::landmark, "where", &img);
  EXPECT_EQ(chat["model"], "m1");
  EXPECT_EQ(chat["temperature"], 0);
  const auto& content = chat["messages"][0]["content"];
  ASSERT_TRUE(content.is_array());
  EXPECT_EQ(content[0]["text"], "where");
  EXPECT_EQ(content[1]["image_url"]["url"], "data:image/png;base64," + codec::base64_encode(img));

  EXPECT_EQ(extract_content(Provider::plain, "raw"), "raw");
  EXPECT_EQ(extract_content(Provider::chat, R"({"choices":[{"message":{"content":"hi"}}]})"), "hi");
  EXPECT_THROW(extract_content(Provider::chat, R"({"choices":[]})"), MalformedResponse);
  EXPECT_THROW(extract_content(Provider::chat, "nope"), MalformedResponse);
}

TEST(RemoteModels, LanguageModelOverStub) {
  StubServer server([&](const httplib::Request& req, httplib::Response& res) {
    const auto j = nlohmann::json::parse(req.body);
    const std::string prompt = j["messages"][0]["content"];
    nlohmann::json out{{"choices", {{{"message", {{"content", R"({"values":[0.25])" + std::string("}")}}}}}}};
    res.set_content(prompt == "score" ? out.dump() : "{}", "application/json");
  });
  ModelConfig cfg;
  cfg.endpoint = live_endpoint(server.url(), 0);
  cfg.model = "stub";
  RemoteLanguageModel lm(cfg);
  EXPECT_EQ(lm.complete("score", SchemaId::desirability), R"({"values":[0.25]})");
  EXPECT_GE(lm.last_latency(), 0.0);
}
