#include "dei/mutation.hpp"

#include "dei/common.hpp"

#include <cctype>
#include <cstdio>
#include <random>

namespace dei::mutation {

using redcode::OperatorBias;

namespace {

std::string fixed3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

}  // namespace

// --- Prompts ---------------------------------------------------------------

PromptContext PromptContext::fresh(std::string rules, std::string archive_summary) {
    PromptContext c;
    c.mode = PromptMode::New;
    c.rules_digest = std::move(rules);
    c.archive_summary = std::move(archive_summary);
    return c;
}

PromptContext PromptContext::mutate(Warrior parent, double fitness, BehavioralCharacteristic bc,
                                    std::string rules) {
    PromptContext c;
    c.mode = PromptMode::Mutate;
    c.parent = std::move(parent);
    c.parent_fitness = fitness;
    c.parent_bc = bc;
    c.rules_digest = std::move(rules);
    return c;
}

void PromptContext::validate() const {
    if (mode == PromptMode::Mutate && (!parent || !parent_fitness || !parent_bc)) {
        throw PreconditionError("mutate prompt needs parent, fitness and BC");
    }
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
    PromptTemplates t;
    t.new_warrior = read_file(dir / "new_warrior.txt");
    t.mutate_warrior = read_file(dir / "mutate_warrior.txt");
    t.rules = read_file(dir / "rules.txt");
    return t;
}

PromptTemplates PromptTemplates::load_default() { return load(data_dir() / "prompts"); }

std::string PromptTemplates::rules_digest(const mars::MarsConfig& cfg) const {
    return render(rules, {{"core_size", std::to_string(cfg.core_size)},
                          {"max_cycles", std::to_string(cfg.max_cycles)},
                          {"max_length", std::to_string(cfg.max_warrior_length)}});
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            std::size_t j = i + 1;
            while (j < tmpl.size() && is_ident_char(tmpl[j])) ++j;
            if (j < tmpl.size() && tmpl[j] == '}' && j > i + 1) {
                const auto it = values.find(std::string(tmpl.substr(i + 1, j - i - 1)));
                if (it != values.end()) {
                    out += it->second;
                    i = j + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

std::string build_prompt(const PromptContext& ctx, const PromptTemplates& templates,
                         int core_size) {
    ctx.validate();
    if (ctx.mode == PromptMode::New) {
        return render(templates.new_warrior,
                      {{"rules", ctx.rules_digest},
                       {"archive", ctx.archive_summary.empty() ? "empty" : ctx.archive_summary}});
    }
    Warrior bare = *ctx.parent;
    bare.origin.clear();
    return render(templates.mutate_warrior, {{"rules", ctx.rules_digest},
                                             {"parent_code", redcode::serialize(bare, core_size)},
                                             {"fitness", fixed3(*ctx.parent_fitness)},
                                             {"tsp", fixed3(ctx.parent_bc->tsp)},
                                             {"mc", fixed3(ctx.parent_bc->mc)}});
}

// --- Offline operators -----------------------------------------------------

namespace {

// Order: DAT MOV ADD SUB MUL DIV MOD JMP JMZ JMN DJN SEQ SNE SLT SPL NOP
// Modes: # $ @ < > * { }
// Edits: point insert delete swap
OperatorBias make_profile(std::string name, std::array<double, 16> ops, std::array<double, 8> modes,
                          std::array<double, 4> edits, int span, std::size_t lo, std::size_t hi) {
    OperatorBias b;
    b.name = std::move(name);
    b.opcode_weights = ops;
    b.mode_weights = modes;
    b.edit_weights = edits;
    b.value_span = span;
    b.min_length = lo;
    b.max_length = hi;
    return b;
}

}  // namespace

OperatorBias mock_profile(std::string_view name) {
    if (name == "uniform") return OperatorBias::uniform();
    if (name == "bomber") {
        return make_profile("bomber",
                            {3, 6, 5, 1, 0.2, 0.1, 0.1, 4, 0.5, 0.5, 1, 0.2, 0.2, 0.2, 0.3, 0.1},
                            {5, 3, 4, 1, 1, 0.5, 0.2, 0.2}, {6, 2, 1, 1}, 400, 3, 6);
    }
    if (name == "replicator") {
        return make_profile("replicator",
                            {1, 6, 1, 0.5, 0.1, 0.1, 0.1, 1, 1.5, 1.5, 2, 0.2, 0.2, 0.2, 6, 0.1},
                            {2, 2, 1, 3, 3, 1, 2, 3}, {5, 3, 1, 1}, 2000, 4, 10);
    }
    if (name == "scanner") {
        return make_profile("scanner",
                            {1, 3, 3, 1, 0.2, 0.2, 0.2, 3, 1, 1, 1, 4, 3, 3, 0.5, 0.3},
                            {2, 4, 3, 0.5, 1, 3, 0.5, 1}, {5, 2, 1, 2}, 60, 5, 12);
    }
    if (name == "imp") {
        return make_profile("imp",
                            {0.5, 8, 0.5, 0.2, 0.1, 0.1, 0.1, 3, 0.2, 0.2, 0.5, 0.1, 0.1, 0.1, 3, 1},
                            {1, 6, 1, 0.3, 0.3, 0.3, 0.3, 0.3}, {6, 1, 2, 1}, 3, 1, 3);
    }
    throw PreconditionError("unknown mock profile '" + std::string(name) + "'");
}

std::vector<std::string> mock_profile_names() {
    return {"uniform", "bomber", "replicator", "scanner", "imp"};
}

nlohmann::json bias_to_json(const OperatorBias& b) {
    return {{"name", b.name},
            {"opcode_weights", b.opcode_weights},
            {"mode_weights", b.mode_weights},
            {"edit_weights", b.edit_weights},
            {"value_span", b.value_span},
            {"min_length", b.min_length},
            {"max_length", b.max_length}};
}

OperatorBias bias_from_json(const nlohmann::json& j) {
    if (j.is_string()) return mock_profile(j.get<std::string>());
    OperatorBias b = j.contains("base") ? mock_profile(j.at("base").get<std::string>())
                                        : OperatorBias::uniform();
    b.name = j.value("name", b.name);
    if (j.contains("opcode_weights")) b.opcode_weights = j.at("opcode_weights").get<decltype(b.opcode_weights)>();
    if (j.contains("mode_weights")) b.mode_weights = j.at("mode_weights").get<decltype(b.mode_weights)>();
    if (j.contains("edit_weights")) b.edit_weights = j.at("edit_weights").get<decltype(b.edit_weights)>();
    b.value_span = j.value("value_span", b.value_span);
    b.min_length = j.value("min_length", b.min_length);
    b.max_length = j.value("max_length", b.max_length);
    b.validate();
    return b;
}

MockOperator::MockOperator(OperatorBias bias, redcode::ParseOptions options)
    : bias_(std::move(bias)), options_(options), identity_{"mock", bias_.name} {
    bias_.validate();
}

Warrior MockOperator::generate(const PromptContext& ctx, std::uint64_t seed) {
    ctx.validate();
    Warrior w = redcode::random_warrior(seed, bias_, options_);
    w.name = "mock-" + to_hex(redcode::content_hash(w)).substr(0, 8);
    w.origin = identity_.tag();
    return w;
}

Warrior MockOperator::mutate(const PromptContext& ctx, std::uint64_t seed) {
    if (ctx.mode != PromptMode::Mutate) throw PreconditionError("mutate needs a mutate-mode context");
    ctx.validate();
    Warrior w = redcode::random_perturb(*ctx.parent, seed, bias_, options_);
    w.origin = identity_.tag();
    return w;
}

// --- Chat plumbing ---------------------------------------------------------

void LlmEndpointConfig::validate() const {
    if (base_url.empty()) throw PreconditionError("base_url is empty");
    if (model.empty()) throw PreconditionError("model is empty");
    if (max_retries < 0) throw PreconditionError("max_retries must be >= 0");
    if (timeout.count() <= 0) throw PreconditionError("timeout must be positive");
}

nlohmann::json ChatRequest::to_json() const {
    nlohmann::json msgs = nlohmann::json::array();
    for (const ChatMessage& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    nlohmann::json j{{"model", model}, {"messages", msgs}, {"temperature", temperature}};
    if (seed) j["seed"] = *seed;
    return j;
}

ChatRequest ChatRequest::from_json(const nlohmann::json& j) {
    ChatRequest r;
    r.model = j.at("model").get<std::string>();
    for (const auto& m : j.at("messages")) {
        r.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    }
    r.temperature = j.value("temperature", 1.0);
    if (j.contains("seed")) r.seed = j.at("seed").get<std::uint64_t>();
    return r;
}

RecordingChatClient::RecordingChatClient(std::shared_ptr<ChatClient> inner,
                                         std::filesystem::path session)
    : inner_(std::move(inner)), session_(std::move(session)) {
    if (session_.has_parent_path()) std::filesystem::create_directories(session_.parent_path());
}

std::string RecordingChatClient::complete(const ChatRequest& request) {
    std::string response = inner_->complete(request);
    const std::string line =
        nlohmann::json{{"request", request.to_json()}, {"response", response}}.dump() + "\n";
    std::lock_guard lock(mutex_);
    std::FILE* f = std::fopen(session_.string().c_str(), "ab");
    if (f == nullptr) throw TransportError("cannot append to session " + session_.string());
    std::fwrite(line.data(), 1, line.size(), f);
    std::fclose(f);
    return response;
}

ReplayChatClient::ReplayChatClient(const std::filesystem::path& session) {
    const std::string text = read_file(session);
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        const std::string_view line(text.data() + start, end - start);
        if (!line.empty()) {
            const auto j = nlohmann::json::parse(line);
            responses_[j.at("request").dump()].push_back(j.at("response").get<std::string>());
        }
        start = end + 1;
    }
}

std::string ReplayChatClient::complete(const ChatRequest& request) {
    std::lock_guard lock(mutex_);
    auto it = responses_.find(request.to_json().dump());
    if (it == responses_.end() || it->second.empty()) {
        throw TransportError("request not found in the replay session");
    }
    std::string r = std::move(it->second.front());
    it->second.pop_front();
    return r;
}

std::size_t ReplayChatClient::remaining() const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& [k, q] : responses_) n += q.size();
    return n;
}

Extraction extract_warrior(std::string_view response, const redcode::ParseOptions& options) {
    std::vector<std::string_view> blocks;
    std::size_t pos = 0;
    while (true) {
        const std::size_t open = response.find("```", pos);
        if (open == std::string_view::npos) break;
        const std::size_t body = response.find('\n', open);
        if (body == std::string_view::npos) break;
        const std::size_t close = response.find("```", body + 1);
        if (close == std::string_view::npos) {
            blocks.push_back(response.substr(body + 1));
            break;
        }
        blocks.push_back(response.substr(body + 1, close - body - 1));
        pos = close + 3;
    }
    if (blocks.empty()) blocks.push_back(response);

    Extraction out;
    for (std::string_view b : blocks) {
        try {
            out.warrior = redcode::parse(b, options);
            out.error.clear();
            return out;
        } catch (const redcode::SyntaxError& e) {
            out.error = e.what();
        }
    }
    return out;
}

LlmOperator::LlmOperator(LlmEndpointConfig cfg, std::shared_ptr<ChatClient> client,
                         PromptTemplates templates, redcode::ParseOptions options)
    : cfg_(std::move(cfg)),
      client_(std::move(client)),
      templates_(std::move(templates)),
      options_(options),
      identity_{cfg_.model, cfg_.base_url} {
    cfg_.validate();
    if (!client_) throw PreconditionError("LlmOperator needs a chat client");
}

Warrior LlmOperator::generate(const PromptContext& ctx, std::uint64_t seed) {
    if (ctx.mode != PromptMode::New) throw PreconditionError("generate needs a new-mode context");
    return run(ctx, seed);
}

Warrior LlmOperator::mutate(const PromptContext& ctx, std::uint64_t seed) {
    if (ctx.mode != PromptMode::Mutate) throw PreconditionError("mutate needs a mutate-mode context");
    return run(ctx, seed);
}

Warrior LlmOperator::run(const PromptContext& ctx, std::uint64_t seed) {
    ChatRequest req;
    req.model = cfg_.model;
    req.temperature = cfg_.temperature;
    req.seed = seed;
    req.messages.push_back({"user", build_prompt(ctx, templates_, options_.core_size)});

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        std::string reply;
        try {
            reply = client_->complete(req);
        } catch (const TransportError& e) {
            last_error = e.what();
            continue;
        }
        Extraction ex = extract_warrior(reply, options_);
        if (ex.warrior) {
            ex.warrior->origin = identity_.tag();
            return std::move(*ex.warrior);
        }
        last_error = ex.error;
        req.messages.push_back({"assistant", reply});
        req.messages.push_back(
            {"user", "That program does not assemble: " + ex.error +
                         "\nReply with one corrected Redcode program in a ```redcode block."});
    }
    throw OperatorFailure("no valid program after " + std::to_string(cfg_.max_retries + 1) +
                          " attempts: " + last_error);
}

}  // namespace dei::mutation
