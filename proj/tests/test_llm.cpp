#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <random>
#include <thread>

#include "facadepv/llm.hpp"
#include "test_support.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

using namespace facadepv;
using facadepv::testing::data_path;
using facadepv::testing::error_kind_of;

namespace {

FacadeDescription reference_facade() { return load_facade(data_path("tianjin_lowrise.json")); }

std::string valid_answer(const FacadeDescription& f) {
  return "Here is the layout:\n```json\n" + layout_to_json(deterministic_layout(f, {}).rectangles).dump(2) + "\n```";
}

bool same_layout(const LayoutResult& a, const LayoutResult& b) {
  return a.rectangles == b.rectangles && a.total_area_m2 == b.total_area_m2 && a.module_count == b.module_count &&
         a.modules_by_area == b.modules_by_area && a.provenance == b.provenance;
}

}  // namespace

TEST_SUITE("llm") {
  TEST_CASE("prompt rendering") {
    const auto p = build_prompt(reference_facade(), {});
    CHECK(p.system_role.find("Building-Integrated Photovoltaics") != std::string::npos);
    CHECK(p.task_text.find("width = 12 meters, height = 6 meters") != std::string::npos);
    CHECK(p.task_text.find("width = 1200 pixels, height = 800 pixels") != std::string::npos);
    CHECK(p.task_text.find("x-direction: 12 meters/1200, y-direction: 6 meters/800") != std::string::npos);
    CHECK(p.task_text.find("wall1: [0,0,1200,800]") != std::string::npos);
    CHECK(p.task_text.find("Windows: [[50,200,250,400], [300,200,450,400], [850,100,1150,500]]") != std::string::npos);
    CHECK(p.task_text.find("Doors: [[600,520,750,800]]") != std::string::npos);
    CHECK(p.task_text.find("Balconies: []") != std::string::npos);
    CHECK(p.task_text.find("at least 1 meters") != std::string::npos);
    CHECK(p.task_text.find("at least 1.2 meters") != std::string::npos);
    CHECK(p.task_text.find("[150, 50, 300, 400]") != std::string::npos);
    CHECK(p.task_text.find("\"installable_rectangles\": []") != std::string::npos);
    // describe -> transcribe -> partition -> qualify order
    const auto s1 = p.task_text.find("Step 1"), s2 = p.task_text.find("Step 2"), s3 = p.task_text.find("Step 3"),
               s4 = p.task_text.find("Step 4");
    CHECK((s1 < s2 && s2 < s3 && s3 < s4));
    CHECK(!has_unresolved_placeholder(p.task_text));
    CHECK(has_unresolved_placeholder("width {w_m}"));
    CHECK(!has_unresolved_placeholder("{\"a\": 1}"));

    auto f = reference_facade();
    f.scale.reset();
    CHECK(error_kind_of([&] { build_prompt(f, {}); }) == ErrorKind::MissingScale);
  }

  TEST_CASE("chat wire format") {
    const ChatRequest req{"gpt-4", "sys", "user text", 0.0, 1000};
    const auto body = chat_request_body(req);
    CHECK(body["model"] == "gpt-4");
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][1]["content"] == "user text");
    CHECK(body["temperature"] == 0.0);
    CHECK(body["max_tokens"] == 1000);
    CHECK(chat_response_content(R"({"choices":[{"message":{"role":"assistant","content":"hi"}}]})") == "hi");
    CHECK(error_kind_of([] { chat_response_content("oops"); }) == ErrorKind::TransportError);
    CHECK(error_kind_of([] { chat_response_content(R"({"choices":[]})"); }) == ErrorKind::TransportError);
  }

  TEST_CASE("response parsing") {
    CHECK(parse_layout(R"({"installable_rectangles": [[0,0,10,10]]})") == std::vector<BoundingBox>{{0, 0, 10, 10}});
    CHECK(parse_layout("Sure! {\"note\": \"{\"} then {\"installable_rectangles\": []} bye").empty());
    CHECK(parse_layout("```json\n{\"analysis\": {\"x\": 1}, \"installable_rectangles\": [[1,2,3,4]]}\n```") ==
          std::vector<BoundingBox>{{1, 2, 3, 4}});
    CHECK(error_kind_of([] { parse_layout("no json here"); }) == ErrorKind::MalformedResponse);
    CHECK(error_kind_of([] { parse_layout("{\"rectangles\": []}"); }) == ErrorKind::MalformedResponse);
    CHECK(error_kind_of([] { parse_layout("{\"installable_rectangles\": [[1,2,3]]}"); }) ==
          ErrorKind::SchemaViolation);
    CHECK(error_kind_of([] { parse_layout("{\"installable_rectangles\": [[5,2,3,4]]}"); }) ==
          ErrorKind::SchemaViolation);
  }

  TEST_CASE("validation verdicts") {
    const auto f = reference_facade();
    auto kinds = [&](std::vector<BoundingBox> rects) {
      std::vector<ViolationKind> out;
      const auto v = validate_layout(rects, f, {});
      if (const auto* list = std::get_if<std::vector<Violation>>(&v))
        for (const auto& x : *list) out.push_back(x.kind);
      return out;
    };
    CHECK(kinds({{0, 0, 850, 200}}).empty());
    CHECK(kinds({{-100, 0, 800, 200}}) == std::vector{ViolationKind::OutOfBounds});
    CHECK(kinds({{0, 150, 400, 300}}) ==
          std::vector{ViolationKind::OverlapsObstruction, ViolationKind::OverlapsObstruction});
    CHECK(kinds({{0, 0, 600, 200}, {500, 0, 800, 200}}) == std::vector{ViolationKind::OverlapsSibling});
    CHECK(kinds({{0, 0, 50, 800}}) == std::vector{ViolationKind::BelowMinimumSize});
    // touching edges are fine
    CHECK(kinds({{0, 0, 600, 200}, {600, 0, 850, 200}}).empty());

    const auto ok = validate_layout(std::vector<BoundingBox>{{0, 0, 850, 200}}, f, {});
    REQUIRE(std::holds_alternative<LayoutResult>(ok));
    CHECK(std::get<LayoutResult>(ok).provenance == Provenance::LlmValidated);
    CHECK(std::get<LayoutResult>(ok).total_area_m2 == doctest::Approx(8.5 * 1.5));
    CHECK(Violation{ViolationKind::OverlapsSibling, 1, 3}.describe() == "rectangle 1 overlaps rectangle 3");
  }

  TEST_CASE("retry then accept") {
    const auto f = reference_facade();
    MockTransport mock({"I think the answer is obvious.", "{\"installable_rectangles\": [[0,0,10", valid_answer(f)});
    const auto out = reason_layout(f, {}, {}, mock);
    CHECK(out.attempts_used == 3);
    CHECK(out.requests_sent == 3);
    CHECK(!out.fell_back);
    REQUIRE(out.layout);
    CHECK(out.layout->provenance == Provenance::LlmValidated);
    CHECK(out.layout->rectangles == deterministic_layout(f, {}).rectangles);
    CHECK(out.failure_log.size() == 2);
    const auto reqs = mock.requests();
    REQUIRE(reqs.size() == 3);
    CHECK(reqs[0].user.find("previous answer was rejected") == std::string::npos);
    CHECK(reqs[1].user.find("previous answer was rejected (MalformedResponse") != std::string::npos);
    CHECK(reqs[0].model == "gpt-4");
    CHECK(reqs[0].temperature == 0.0);
  }

  TEST_CASE("constraint violations are fed back") {
    const auto f = reference_facade();
    MockTransport mock({R"({"installable_rectangles": [[0,150,300,300]]})", valid_answer(f)});
    const auto out = reason_layout(f, {}, {}, mock);
    CHECK(out.attempts_used == 2);
    CHECK(mock.requests()[1].user.find("overlaps obstruction") != std::string::npos);
  }

  TEST_CASE("exhaustion falls back to the deterministic layout") {
    const auto f = reference_facade();
    std::vector<std::string> junk(6, "nope");
    junk[2] = std::string(MockTransport::kTransportFailure);
    MockTransport mock(junk);
    const auto out = reason_layout(f, {}, {}, mock);
    CHECK(out.fell_back);
    CHECK(out.attempts_used == 6);
    CHECK(out.requests_sent == 6);
    REQUIRE(out.layout);
    CHECK(same_layout(*out.layout, deterministic_layout(f, {})));
    CHECK(out.failure_log[2].reason.find("TransportError") != std::string::npos);

    MockTransport empty({});
    LlmConfig two;
    two.max_attempts = 2;
    const auto dry = reason_layout(f, {}, two, empty);
    CHECK(dry.fell_back);
    CHECK(dry.requests_sent == 2);
  }

  TEST_CASE("walls are reasoned separately") {
    FacadeDescription f;
    f.building_id = "two";
    f.width_px = 400;
    f.height_px = 200;
    f.scale = compute_scale(8.0, 400.0);
    f.components = {{ComponentClass::Wall, {0, 0, 200, 200}},
                    {ComponentClass::Wall, {200, 0, 400, 200}},
                    {ComponentClass::Window, {250, 50, 350, 150}}};
    MockTransport mock({R"({"installable_rectangles": [[0,0,200,200]]})", "bad", "bad"});
    LlmConfig cfg;
    cfg.max_attempts = 2;
    const auto out = reason_layout(f, {}, cfg, mock);
    CHECK(out.requests_sent == 3);
    CHECK(out.attempts_used == 2);
    CHECK(out.fell_back);
    REQUIRE(out.layout);
    CHECK(out.layout->provenance == Provenance::Deterministic);
    CHECK(std::find(out.layout->rectangles.begin(), out.layout->rectangles.end(), BoundingBox{0, 0, 200, 200}) !=
          out.layout->rectangles.end());
    CHECK(std::holds_alternative<LayoutResult>(validate_layout(out.layout->rectangles, f, {})));
  }

  TEST_CASE("adversarial responses never yield an invalid layout") {
    const auto f = reference_facade();
    std::mt19937 rng(1234);
    std::uniform_int_distribution<int> coord(-100, 1300), kind(0, 5), count(0, 5);
    std::vector<std::string> script;
    for (int i = 0; i < 300; ++i) {
      std::string body;
      switch (kind(rng)) {
        case 0: body = "garbage " + std::to_string(rng()); break;
        case 1: body = "{\"installable_rectangles\": [[1,2,3]]}"; break;
        case 2: body = std::string(MockTransport::kTransportFailure); break;
        default: {
          nlohmann::json rects = nlohmann::json::array();
          for (int k = count(rng); k > 0; --k) {
            int a = coord(rng), b = coord(rng), c = coord(rng), d = coord(rng);
            rects.push_back({std::min(a, c), std::min(b, d), std::max(a, c) + 1, std::max(b, d) + 1});
          }
          body = nlohmann::json{{"installable_rectangles", rects}}.dump();
        }
      }
      script.push_back(body);
    }
    MockTransport mock(script);
    LlmConfig cfg;
    cfg.max_attempts = 3;
    for (int run = 0; run < 100; ++run) {
      const auto out = reason_layout(f, {}, cfg, mock);
      REQUIRE(out.layout);
      CHECK(std::holds_alternative<LayoutResult>(validate_layout(out.layout->rectangles, f, {})));
    }
  }

  TEST_CASE("throttle caps concurrency") {
    struct Slow final : ChatTransport {
      std::atomic<int> live{0}, peak{0};
      std::string complete(const ChatRequest&) override {
        const int now = ++live;
        int p = peak.load();
        while (now > p && !peak.compare_exchange_weak(p, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        --live;
        return "{}";
      }
    } slow;
    ThrottledTransport throttled(slow, 2);
    std::vector<std::jthread> threads;
    for (int i = 0; i < 8; ++i) threads.emplace_back([&] { throttled.complete({}); });
    threads.clear();
    CHECK(slow.peak.load() <= 2);
    CHECK(slow.peak.load() >= 1);
  }

  TEST_CASE("mock script file") {
    const auto dir = facadepv::testing::scratch_dir("mock_script");
    const auto path = (dir / "script.json").string();
    {
      std::ofstream(path) << R"(["a", "<transport-error>"])";
    }
    MockTransport mock(MockTransport::load_script(path));
    CHECK(mock.complete({}) == "a");
    CHECK(error_kind_of([&] { mock.complete({}); }) == ErrorKind::TransportError);
    CHECK(error_kind_of([&] { mock.complete({}); }) == ErrorKind::TransportError);
    CHECK(mock.calls() == 3);
    {
      std::ofstream(path) << R"({"not": "an array"})";
    }
    CHECK(error_kind_of([&] { MockTransport::load_script(path); }) == ErrorKind::SchemaViolation);
    CHECK(error_kind_of([&] { MockTransport::load_script(path + ".missing"); }) == ErrorKind::IoError);
  }

  TEST_CASE("http transport against a local endpoint") {
    httplib::Server server;
    std::string seen_auth, seen_body;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
      seen_auth = req.get_header_value("Authorization");
      seen_body = req.body;
      res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"pong"}}]})", "application/json");
    });
    server.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread runner([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("FACADEPV_TEST_TOKEN", "secret", 1);
    LlmConfig cfg;
    cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.auth_token_env = "FACADEPV_TEST_TOKEN";
    cfg.timeout_s = 5.0;
    HttpChatTransport http(cfg);
    CHECK(http.complete({"m", "s", "ping", 0.0, 10}) == "pong");
    CHECK(seen_auth == "Bearer secret");
    const auto body = nlohmann::json::parse(seen_body);
    CHECK(body["messages"][1]["content"] == "ping");
    CHECK(body["model"] == "m");

    cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/broken";
    HttpChatTransport broken(cfg);
    CHECK(error_kind_of([&] { broken.complete({}); }) == ErrorKind::TransportError);

    server.stop();
    runner.join();

    cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.timeout_s = 1.0;
    HttpChatTransport gone(cfg);
    CHECK(error_kind_of([&] { gone.complete({}); }) == ErrorKind::TransportError);
    CHECK(error_kind_of([] { HttpChatTransport(LlmConfig{"ftp://x/y"}); }) == ErrorKind::InvalidArgument);
  }

  TEST_CASE("config validation") {
    LlmConfig cfg;
    cfg.max_attempts = 0;
    CHECK(error_kind_of([&] { cfg.validate(); }) == ErrorKind::InvalidArgument);
  }
}
