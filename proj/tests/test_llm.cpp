#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "claimcheck/http_client.hpp"
#include "claimcheck/llm.hpp"
#include "support.hpp"

using namespace claimcheck;
using namespace claimcheck::llm;

namespace {

InferenceParams fast(Mode m = Mode::think, int retries = 3) {
  auto p = preset(m);
  p.max_retries = retries;
  return p;
}

std::unique_ptr<MockClient> scripted(const Json& script) {
  auto c = std::make_unique<MockClient>("mock", MockScript::from_json(script));
  c->set_retry_policy({std::chrono::milliseconds(0), 2.0, std::chrono::milliseconds(0)});
  return c;
}

// Local OpenAI-compatible server on an ephemeral port.
class FakeServer {
 public:
  explicit FakeServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

EndpointConfig http_endpoint(const std::string& base_url) {
  return EndpointConfig::from_json(
      "pg_large", Json{{"base_url", base_url}, {"model", "test-model"}, {"api_key", "sk-test"},
                       {"retry", {{"initial_backoff_ms", 1}, {"multiplier", 2.0}, {"max_backoff_ms", 4}}}});
}

std::string ok_body(const std::string& content) {
  return Json{{"id", "x"}, {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}}}
      .dump();
}

}  // namespace

TEST_CASE("inference presets") {
  const auto think = preset(Mode::think);
  CHECK(think.temperature == 0.6);
  CHECK(think.top_p == 0.95);
  CHECK(think.top_k == 20);
  CHECK(think.min_p == 0.0);
  CHECK(think.mode == Mode::think);
  const auto no_think = preset(Mode::no_think);
  CHECK(no_think.temperature == 0.7);
  CHECK(no_think.top_p == 0.8);
  CHECK(no_think.top_k == 20);
  CHECK(no_think.min_p == 0.0);
  CHECK_THROWS_AS(parse_mode("fast"), std::invalid_argument);
  CHECK(parse_mode("no_think") == Mode::no_think);
}

TEST_CASE("inference params parsing and validation") {
  const auto p = InferenceParams::from_json(Json{{"mode", "no_think"}, {"max_tokens", 512}, {"timeout_ms", 1000}});
  CHECK(p.temperature == 0.7);
  CHECK(p.max_tokens == 512);
  CHECK(p.timeout == std::chrono::milliseconds(1000));
  CHECK(InferenceParams::from_json(p.to_json()).to_json() == p.to_json());
  CHECK_THROWS_AS(InferenceParams::from_json(Json{{"mode", "other"}}), std::invalid_argument);
  CHECK_THROWS_AS(InferenceParams::from_json(Json{{"temperature", 2.5}}), std::invalid_argument);
  CHECK_THROWS_AS(InferenceParams::from_json(Json{{"top_k", -1}}), std::invalid_argument);
}

TEST_CASE("mode token is appended to the final user message") {
  const std::vector<ChatMessage> msgs = {{"system", "s"}, {"user", "first"}, {"assistant", "a"}, {"user", "last"}};
  const auto out = with_mode_token(msgs, Mode::think);
  CHECK(out[1].content == "first");
  CHECK(out[3].content == "last\n/think");
  CHECK(with_mode_token(msgs, Mode::no_think)[3].content == "last\n/no_think");
  CHECK_THROWS_AS(with_mode_token({{"system", "s"}}, Mode::think), std::invalid_argument);

  MockClient c("m", [](const MockCall&) { return AttemptResult::success("ok"); });
  c.complete("hello", fast(Mode::think));
  const auto calls = c.calls();
  REQUIRE(calls.size() == 1);
  const auto& sent = calls[0].messages.back().content;
  CHECK(sent.size() >= 6);
  CHECK(sent.substr(sent.size() - 6) == "/think");
  CHECK(calls[0].prompt == "hello");

  MockClient plain("m", [](const MockCall&) { return AttemptResult::success("ok"); });
  plain.set_send_mode_token(false);
  plain.complete("hello", fast());
  CHECK(plain.calls()[0].messages.back().content == "hello");
}

TEST_CASE("scripted mock replies by fingerprint") {
  auto c = scripted(Json{{"scripted", {{{"fingerprint", prompt_fingerprint("q1")}, {"replies", {"r1"}}}}}});
  const auto r = c->complete("q1", fast());
  CHECK(r.ok());
  CHECK(r.content == "r1");
  CHECK(r.attempt_count == 1);
  const auto miss = c->complete("other", fast());
  CHECK_FALSE(miss.ok());
  CHECK(miss.error == ErrorKind::http_status);
  CHECK(miss.attempt_count == 1);
}

TEST_CASE("retry contract: two transient failures then success") {
  auto c = scripted(Json{{"scripted",
                          {{{"fingerprint", prompt_fingerprint("q")},
                            {"replies", {"!error:http_status:503", "!error:timeout", "finally"}}}}}});
  const auto r = c->complete("q", fast(Mode::think, 3));
  CHECK(r.ok());
  CHECK(r.content == "finally");
  CHECK(r.attempt_count == 3);
}

TEST_CASE("retries exhaust and keep the first failure kind") {
  auto c = scripted(Json{{"scripted",
                          {{{"fingerprint", prompt_fingerprint("q")},
                            {"replies", {"!error:network", "!error:timeout"}}}}}});
  const auto r = c->complete("q", fast(Mode::think, 2));
  CHECK_FALSE(r.ok());
  CHECK(r.attempt_count == 3);
  CHECK(r.error == ErrorKind::network);
}

TEST_CASE("permanent failures are not retried") {
  auto c = scripted(Json{{"default", "!error:http_status:404"}});
  const auto r = c->complete("q", fast(Mode::think, 5));
  CHECK(r.attempt_count == 1);
  CHECK(r.error == ErrorKind::http_status);
  auto limited = scripted(Json{{"default", "!error:http_status:429"}});
  CHECK(limited->complete("q", fast(Mode::think, 2)).attempt_count == 3);
}

TEST_CASE("exceptions from a transport become permanent network errors") {
  MockClient c("m", [](const MockCall&) -> AttemptResult { throw std::runtime_error("socket"); });
  const auto r = c.complete("q", fast());
  CHECK(r.error == ErrorKind::network);
  CHECK(r.attempt_count == 1);
}

TEST_CASE("rule replies and templates") {
  auto c = scripted(Json{{"rules", {{{"contains", "STYLE"}, {"replies", {"echo: {{prompt_tail}}"}}}}},
                         {"default", "[{{prompt}}]"}});
  CHECK(c->complete("STYLE head\n\nbody text", fast()).content == "echo: body text");
  CHECK(c->complete("plain", fast()).content == "[plain]");
}

TEST_CASE("mock replies are deterministic across instances") {
  const Json script = {{"rules", {{{"contains", ""}, {"replies", {"a", "b", "c", "d"}}}}}};
  auto c1 = scripted(script);
  auto c2 = scripted(script);
  for (int i = 0; i < 20; ++i) {
    const auto p = "prompt " + std::to_string(i);
    CHECK(c1->complete(p, fast()).content == c2->complete(p, fast()).content);
  }
}

TEST_CASE("in-flight bound is respected") {
  std::atomic<int> current{0}, peak{0};
  MockClient c(
      "m",
      [&](const MockCall&) {
        const int now = ++current;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        --current;
        return AttemptResult::success("x");
      },
      2);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { c.complete("q", fast()); });
  for (auto& t : threads) t.join();
  CHECK(peak.load() <= 2);
  CHECK(c.call_count() == 8);
}

TEST_CASE("endpoint config") {
  ::setenv("CC_TEST_SECRET", "s3cret", 1);
  CHECK(expand_env("Bearer ${CC_TEST_SECRET}") == "Bearer s3cret");
  CHECK(expand_env("${CC_TEST_UNSET_VAR_X}x") == "x");
  const auto e = EndpointConfig::from_json(
      "ie1", Json{{"base_url", "http://h/v1"}, {"model", "m"}, {"api_key", "${CC_TEST_SECRET}"},
                  {"params", {{"mode", "no_think"}}}});
  CHECK(e.params.temperature == 0.7);
  const auto dumped = e.to_json().dump();
  CHECK(dumped.find("s3cret") == std::string::npos);
  CHECK(dumped.find("CC_TEST_SECRET") == std::string::npos);
  CHECK_THROWS_AS(EndpointConfig::from_json("x", Json{{"kind", "grpc"}}), std::invalid_argument);
  CHECK_THROWS_AS(EndpointConfig::from_json("x", Json{{"kind", "http"}}), std::invalid_argument);
  CHECK_THROWS_AS(EndpointConfig::from_json("x", Json{{"kind", "mock"}}), std::invalid_argument);
  CHECK_THROWS_AS(EndpointConfig::from_json("x", Json{{"base_url", "http://h"}, {"model", "m"},
                                                      {"params", {{"mode", "auto"}}}}),
                  std::invalid_argument);

  cctest::TempDir dir;
  cctest::write_file(dir / "script.json", R"({"default": "hi"})");
  const auto m = EndpointConfig::from_json("dr", Json{{"kind", "mock"}, {"mock_script", "script.json"}}, dir.path());
  auto client = make_client(m);
  CHECK(client->complete("q", fast()).content == "hi");
}

TEST_CASE("chat completion wire format") {
  const auto body = chat_completion_body("m", {{"user", "hello\n/think"}}, preset(Mode::think));
  CHECK(body.at("model") == "m");
  CHECK(body.at("messages")[0].at("role") == "user");
  CHECK(body.at("messages")[0].at("content") == "hello\n/think");
  CHECK(body.at("temperature") == 0.6);
  CHECK(body.at("top_p") == 0.95);
  CHECK(body.at("top_k") == 20);
  CHECK(body.at("min_p") == 0.0);
  CHECK(body.at("stream") == false);
  CHECK_FALSE(body.contains("max_tokens"));

  CHECK(parse_chat_completion(ok_body("x")) == std::optional<std::string>("x"));
  CHECK_FALSE(parse_chat_completion("{}").has_value());
  CHECK_FALSE(parse_chat_completion("not json").has_value());
  CHECK_FALSE(parse_chat_completion(R"({"choices":[]})").has_value());
}

TEST_CASE("http client against a local server") {
  std::atomic<int> hits{0};
  std::string seen_auth;
  Json seen_body;
  std::mutex mu;
  FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
    const int n = ++hits;
    {
      std::lock_guard lock(mu);
      seen_auth = req.get_header_value("Authorization");
      seen_body = Json::parse(req.body);
    }
    const std::string prompt = seen_body.at("messages").back().at("content");
    if (prompt.rfind("flaky", 0) == 0 && n == 1) {
      res.status = 503;
      res.set_content("busy", "text/plain");
      return;
    }
    if (prompt.rfind("forbidden", 0) == 0) {
      res.status = 403;
      return;
    }
    if (prompt.rfind("garbage", 0) == 0) {
      res.set_content("<html>", "text/html");
      return;
    }
    if (prompt.rfind("slow", 0) == 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(800));
    }
    res.set_content(ok_body("reply to " + prompt), "application/json");
  });

  auto client = make_client(http_endpoint(server.base_url()));

  SUBCASE("request shape and bearer token") {
    const auto r = client->complete("hello", fast(Mode::no_think));
    REQUIRE(r.ok());
    CHECK(r.content == "reply to hello\n/no_think");
    std::lock_guard lock(mu);
    CHECK(seen_auth == "Bearer sk-test");
    CHECK(seen_body.at("model") == "test-model");
    CHECK(seen_body.at("temperature") == 0.7);
    CHECK(seen_body.at("top_p") == 0.8);
  }
  SUBCASE("5xx is retried") {
    const auto r = client->complete("flaky", fast());
    CHECK(r.ok());
    CHECK(r.attempt_count == 2);
  }
  SUBCASE("4xx is permanent") {
    const auto r = client->complete("forbidden", fast());
    CHECK(r.error == ErrorKind::http_status);
    CHECK(r.attempt_count == 1);
  }
  SUBCASE("malformed body") {
    const auto r = client->complete("garbage", fast());
    CHECK(r.error == ErrorKind::malformed_body);
    CHECK(r.attempt_count == 1);
  }
  SUBCASE("read timeout") {
    auto p = fast(Mode::think, 0);
    p.timeout = std::chrono::milliseconds(200);
    const auto r = client->complete("slow", p);
    CHECK(r.error == ErrorKind::timeout);
  }
}

TEST_CASE("http client reports unreachable endpoints as network errors") {
  // Bind then close a socket so nothing listens on its port.
  int port = 0;
  {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    port = ntohs(addr.sin_port);
    ::close(fd);
  }
  auto client = make_client(http_endpoint("http://127.0.0.1:" + std::to_string(port) + "/v1"));
  auto p = fast(Mode::think, 1);
  p.timeout = std::chrono::milliseconds(2000);
  const auto r = client->complete("q", p);
  CHECK(r.error == ErrorKind::network);
  CHECK(r.attempt_count == 2);
}
