#include "doctest.h"

#include "dei/common.hpp"
#include "dei/mutation.hpp"
#include "httplib.h"

#include <thread>

using namespace dei::mutation;
using dei::redcode::Opcode;
using dei::redcode::parse;

namespace {

const Warrior kImp = parse("MOV 0, 1");

// Answers from a fixed script and records what it was asked.
class ScriptedClient final : public ChatClient {
public:
    explicit ScriptedClient(std::vector<std::string> replies) : replies_(std::move(replies)) {}
    std::string complete(const ChatRequest& request) override {
        requests.push_back(request);
        if (next_ >= replies_.size()) throw TransportError("script exhausted");
        return replies_[next_++];
    }
    std::vector<ChatRequest> requests;

private:
    std::vector<std::string> replies_;
    std::size_t next_ = 0;
};

LlmEndpointConfig endpoint() {
    LlmEndpointConfig cfg;
    cfg.model = "test-model";
    cfg.base_url = "http://127.0.0.1:1/v1";
    cfg.max_retries = 2;
    return cfg;
}

// Upper 1% points of the chi-squared distribution, df = 1..15.
constexpr double kChi2Crit01[] = {6.635,  9.210,  11.345, 13.277, 15.086, 16.812, 18.475, 20.090,
                                  21.666, 23.209, 24.725, 26.217, 27.688, 29.141, 30.578};

}  // namespace

TEST_CASE("render substitutes known placeholders in one pass") {
    CHECK(render("a {x} b {y} {unknown} { x} {}", {{"x", "1"}, {"y", "{x}"}}) ==
          "a 1 b {x} {unknown} { x} {}");
}

TEST_CASE("prompts") {
    const PromptTemplates t = PromptTemplates::load_default();
    const std::string rules = t.rules_digest(dei::mars::MarsConfig{});
    CHECK(rules.find("8000 cells") != std::string::npos);
    CHECK(rules.find("{ A-predecrement") != std::string::npos);

    const std::string mutate = build_prompt(PromptContext::mutate(kImp, 1.0, {80000.0, 1.0}, rules), t);
    CHECK(mutate.find("MOV.I $0, $1") != std::string::npos);
    CHECK(mutate.find("1.000") != std::string::npos);
    CHECK(mutate.find("80000.000") != std::string::npos);
    CHECK(mutate.find("MC = 1.000") != std::string::npos);
    CHECK(mutate.find(rules) != std::string::npos);

    const std::string fresh = build_prompt(PromptContext::fresh(rules, "3 elites"), t);
    CHECK(fresh.find(rules) != std::string::npos);
    CHECK(fresh.find("3 elites") != std::string::npos);
    CHECK(fresh.find("{parent_code}") == std::string::npos);

    PromptContext broken;
    broken.mode = PromptMode::Mutate;
    CHECK_THROWS_AS(build_prompt(broken, t), dei::PreconditionError);
}

TEST_CASE("mock operator: deterministic, valid, one edit") {
    MockOperator op(mock_profile("bomber"));
    CHECK(op.identity().tag() == "mock:bomber");
    const auto fresh = PromptContext::fresh("rules");
    for (std::uint64_t s = 0; s < 100; ++s) {
        const Warrior w = op.generate(fresh, s);
        CHECK(w == op.generate(fresh, s));
        CHECK(w.length() >= 1);
        CHECK(w.length() <= 100);
        CHECK(w.origin == "mock:bomber");
        CHECK_NOTHROW(dei::redcode::validate(w));
    }
    const auto ctx = PromptContext::mutate(kImp, 1.0, {1.0, 0.5}, "rules");
    for (std::uint64_t s = 0; s < 100; ++s) {
        const Warrior w = op.mutate(ctx, s);
        CHECK(w == op.mutate(ctx, s));
        CHECK(w.length() <= 2);
        CHECK(w.origin == "mock:bomber");
    }
    CHECK_THROWS_AS(op.mutate(fresh, 1), dei::PreconditionError);
    CHECK_THROWS_AS(mock_profile("nope"), dei::PreconditionError);
}

TEST_CASE("bias JSON round trip and profile references") {
    for (const auto& name : mock_profile_names()) {
        const auto b = mock_profile(name);
        const auto back = bias_from_json(bias_to_json(b));
        CHECK(back.name == b.name);
        CHECK(back.opcode_weights == b.opcode_weights);
        CHECK(back.mode_weights == b.mode_weights);
        CHECK(back.edit_weights == b.edit_weights);
        CHECK(back.value_span == b.value_span);
        CHECK(bias_from_json(nlohmann::json(name)).name == name);
    }
    const auto custom = bias_from_json({{"base", "scanner"}, {"name", "mine"}, {"value_span", 7}});
    CHECK(custom.name == "mine");
    CHECK(custom.value_span == 7);
    CHECK(custom.opcode_weights == mock_profile("scanner").opcode_weights);
}

TEST_CASE("distinct profiles give distinguishable opcode distributions") {
    const auto names = mock_profile_names();
    const auto fresh = PromptContext::fresh("rules");
    constexpr int kSamples = 10000;
    std::vector<std::array<double, 16>> hist;
    for (const auto& name : names) {
        MockOperator op(mock_profile(name));
        std::array<double, 16> h{};
        int drawn = 0;
        for (std::uint64_t s = 0; drawn < kSamples; ++s) {
            for (const auto& in : op.generate(fresh, s).instructions) {
                if (drawn == kSamples) break;
                h[static_cast<std::size_t>(in.opcode)] += 1;
                ++drawn;
            }
        }
        hist.push_back(h);
    }
    for (std::size_t a = 0; a < hist.size(); ++a) {
        for (std::size_t b = a + 1; b < hist.size(); ++b) {
            double chi2 = 0.0;
            int used = 0;
            for (std::size_t k = 0; k < 16; ++k) {
                const double col = hist[a][k] + hist[b][k];
                if (col == 0) continue;
                ++used;
                const double expect = col / 2.0;
                chi2 += (hist[a][k] - expect) * (hist[a][k] - expect) / expect;
                chi2 += (hist[b][k] - expect) * (hist[b][k] - expect) / expect;
            }
            CAPTURE(names[a]);
            CAPTURE(names[b]);
            REQUIRE(used >= 2);
            CHECK(chi2 > kChi2Crit01[used - 2]);
        }
    }
}

TEST_CASE("extract_warrior") {
    CHECK(extract_warrior("Here you go:\n```redcode\nMOV 0, 1\n```\n").warrior == kImp);
    CHECK(extract_warrior("```\nMOV 0, 1 ; imp\n```").warrior == kImp);
    const auto two = extract_warrior("```\nthis is not code\n```\ntext\n```redcode\nMOV 0, 1\n```\n"
                                     "```redcode\nDAT 0, 0\n```");
    CHECK(two.warrior == kImp);
    CHECK(extract_warrior("MOV 0, 1").warrior == kImp);
    const auto prose = extract_warrior("I cannot help with that.");
    CHECK_FALSE(prose.warrior.has_value());
    CHECK_FALSE(prose.error.empty());
}

TEST_CASE("LLM operator: fences stripped, retries, failure") {
    const PromptTemplates t = PromptTemplates::load_default();
    auto ok = std::make_shared<ScriptedClient>(std::vector<std::string>{"```redcode\nMOV 0, 1\n```"});
    LlmOperator op(endpoint(), ok, t);
    const Warrior w = op.generate(PromptContext::fresh("rules"), 42);
    CHECK(dei::redcode::same_program(w, kImp));
    CHECK(w.origin == "test-model:http://127.0.0.1:1/v1");
    REQUIRE(ok->requests.size() == 1);
    CHECK(ok->requests[0].seed == 42u);

    auto second = std::make_shared<ScriptedClient>(
        std::vector<std::string>{"no code here", "```\nSPL 0\nMOV 0, 1\n```"});
    LlmOperator retry(endpoint(), second, t);
    CHECK(retry.mutate(PromptContext::mutate(kImp, 1.0, {1, 1}, "r"), 1).length() == 2);
    REQUIRE(second->requests.size() == 2);
    CHECK(second->requests[1].messages.size() == 3);
    CHECK(second->requests[1].messages[2].content.find("does not assemble") != std::string::npos);

    auto prose = std::make_shared<ScriptedClient>(std::vector<std::string>{"no", "still no", "nope"});
    LlmOperator failing(endpoint(), prose, t);
    CHECK_THROWS_AS(failing.generate(PromptContext::fresh("r"), 1), OperatorFailure);
    CHECK(prose->requests.size() == 3);
}

TEST_CASE("HTTP chat client against a local endpoint, with record and replay") {
    httplib::Server server;
    std::string seen_auth;
    std::string seen_body;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        seen_body = req.body;
        const auto j = nlohmann::json::parse(req.body);
        const std::string text = "```redcode\nMOV 0, 1\n```\n(" + j.at("model").get<std::string>() + ")";
        res.set_content(nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump(),
                        "application/json");
    });
    server.Post("/bad/chat/completions", [](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
        res.set_content("boom", "text/plain");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("DEI_TEST_KEY", "sekrit", 1);
    LlmEndpointConfig cfg = endpoint();
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/";
    cfg.api_key_env = "DEI_TEST_KEY";
    cfg.timeout = std::chrono::milliseconds(5000);
    auto http = std::make_shared<HttpChatClient>(cfg);

    ChatRequest req;
    req.model = "test-model";
    req.messages = {{"user", "hi"}};
    req.seed = 9;
    CHECK(http->complete(req) == "```redcode\nMOV 0, 1\n```\n(test-model)");
    CHECK(seen_auth == "Bearer sekrit");
    CHECK(nlohmann::json::parse(seen_body).at("seed") == 9);

    const auto session = std::filesystem::temp_directory_path() / "dei_test_session.jsonl";
    std::filesystem::remove(session);
    auto recorder = std::make_shared<RecordingChatClient>(http, session);
    LlmOperator live(cfg, recorder, PromptTemplates::load_default());
    const Warrior a = live.generate(PromptContext::fresh("r"), 1);
    const Warrior b = live.mutate(PromptContext::mutate(kImp, 0.5, {2, 0.1}, "r"), 2);
    server.stop();
    th.join();

    auto replay = std::make_shared<ReplayChatClient>(session);
    CHECK(replay->remaining() == 2);
    LlmOperator offline(cfg, replay, PromptTemplates::load_default());
    CHECK(offline.generate(PromptContext::fresh("r"), 1) == a);
    CHECK(offline.mutate(PromptContext::mutate(kImp, 0.5, {2, 0.1}, "r"), 2) == b);
    CHECK(replay->remaining() == 0);
    CHECK_THROWS_AS(replay->complete(req), TransportError);
    std::filesystem::remove(session);

    // Server is gone: connection failure surfaces as TransportError.
    CHECK_THROWS_AS(http->complete(req), TransportError);
}

TEST_CASE("endpoint config validation") {
    LlmEndpointConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.max_retries = -1;
    CHECK_THROWS_AS(cfg.validate(), dei::PreconditionError);
    cfg = LlmEndpointConfig{};
    cfg.timeout = std::chrono::milliseconds(0);
    CHECK_THROWS_AS(cfg.validate(), dei::PreconditionError);
    cfg = LlmEndpointConfig{};
    cfg.base_url = "localhost:8000";
    CHECK_THROWS_AS(HttpChatClient{cfg}, dei::PreconditionError);
}
