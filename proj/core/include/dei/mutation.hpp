#pragma once

// Mutation operators: fresh generation and mutation of warriors, either by a
// chat-completions LLM endpoint or by a seeded offline bias table.

#include "dei/mars.hpp"
#include "dei/redcode.hpp"

#include <chrono>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dei::mutation {

using mars::BehavioralCharacteristic;
using redcode::Warrior;

// The operator could not produce a parseable program within its retry budget.
class OperatorFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The chat endpoint was unreachable, timed out or answered with an error.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --- Prompts ---------------------------------------------------------------

enum class PromptMode { New, Mutate };

struct PromptContext {
    PromptMode mode = PromptMode::New;
    std::optional<Warrior> parent;
    std::optional<double> parent_fitness;
    std::optional<BehavioralCharacteristic> parent_bc;
    std::string rules_digest;
    // One-line description of the archive, for new-warrior prompts.
    std::string archive_summary;

    static PromptContext fresh(std::string rules, std::string archive_summary = {});
    static PromptContext mutate(Warrior parent, double fitness, BehavioralCharacteristic bc,
                                std::string rules);
    // Mutate mode needs parent, fitness and BC.
    void validate() const;
};

struct PromptTemplates {
    std::string new_warrior;
    std::string mutate_warrior;
    std::string rules;

    // Reads new_warrior.txt, mutate_warrior.txt and rules.txt.
    static PromptTemplates load(const std::filesystem::path& dir);
    static PromptTemplates load_default();

    // Rules text with the simulator parameters filled in.
    std::string rules_digest(const mars::MarsConfig& cfg) const;
};

// Single-pass substitution of {name} placeholders. Unknown names and braces
// that are not placeholders are copied through untouched.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values);

std::string build_prompt(const PromptContext& ctx, const PromptTemplates& templates,
                         int core_size = redcode::kDefaultCoreSize);

// --- Operator interface ----------------------------------------------------

struct OperatorIdentity {
    std::string name;        // "mock", or the model name
    std::string provenance;  // bias profile or endpoint

    std::string tag() const { return provenance.empty() ? name : name + ":" + provenance; }
    bool operator==(const OperatorIdentity&) const = default;
};

class MutationOperator {
public:
    virtual ~MutationOperator() = default;

    virtual const OperatorIdentity& identity() const = 0;
    // Both return a parseable warrior whose origin is identity().tag(), or
    // throw OperatorFailure.
    virtual Warrior generate(const PromptContext& ctx, std::uint64_t seed) = 0;
    virtual Warrior mutate(const PromptContext& ctx, std::uint64_t seed) = 0;
};

// --- Offline operators -----------------------------------------------------

// Named bias tables: "uniform", "bomber", "replicator", "scanner", "imp".
redcode::OperatorBias mock_profile(std::string_view name);
std::vector<std::string> mock_profile_names();

nlohmann::json bias_to_json(const redcode::OperatorBias& b);
redcode::OperatorBias bias_from_json(const nlohmann::json& j);

class MockOperator final : public MutationOperator {
public:
    explicit MockOperator(redcode::OperatorBias bias, redcode::ParseOptions options = {});

    const OperatorIdentity& identity() const override { return identity_; }
    const redcode::OperatorBias& bias() const noexcept { return bias_; }
    Warrior generate(const PromptContext& ctx, std::uint64_t seed) override;
    Warrior mutate(const PromptContext& ctx, std::uint64_t seed) override;

private:
    redcode::OperatorBias bias_;
    redcode::ParseOptions options_;
    OperatorIdentity identity_;
};

// --- Chat-completions client -----------------------------------------------

struct LlmEndpointConfig {
    std::string base_url = "http://127.0.0.1:8000/v1";
    std::string model = "gpt-4o-mini";
    // Name of the environment variable holding the API key; may be empty.
    std::string api_key_env = "OPENAI_API_KEY";
    double temperature = 1.0;
    int max_retries = 3;
    std::chrono::milliseconds timeout{60000};

    void validate() const;
};

struct ChatMessage {
    std::string role;
    std::string content;
    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 1.0;
    std::optional<std::uint64_t> seed;

    nlohmann::json to_json() const;
    static ChatRequest from_json(const nlohmann::json& j);
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    // Text of the first choice. Throws TransportError.
    virtual std::string complete(const ChatRequest& request) = 0;
};

// POST {base_url}/chat/completions. One connection per call, so a single
// instance may be shared between threads.
class HttpChatClient final : public ChatClient {
public:
    explicit HttpChatClient(LlmEndpointConfig cfg);
    std::string complete(const ChatRequest& request) override;

private:
    LlmEndpointConfig cfg_;
    std::string origin_;  // scheme://host[:port]
    std::string path_;    // path prefix, e.g. /v1
};

// Forwards to `inner` and appends every exchange to a JSON-lines session file.
class RecordingChatClient final : public ChatClient {
public:
    RecordingChatClient(std::shared_ptr<ChatClient> inner, std::filesystem::path session);
    std::string complete(const ChatRequest& request) override;

private:
    std::shared_ptr<ChatClient> inner_;
    std::filesystem::path session_;
    std::mutex mutex_;
};

// Serves responses from a recorded session. Identical requests are answered
// in recording order; an unrecorded request raises TransportError.
class ReplayChatClient final : public ChatClient {
public:
    explicit ReplayChatClient(const std::filesystem::path& session);
    std::string complete(const ChatRequest& request) override;
    std::size_t remaining() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::deque<std::string>> responses_;
};

// Candidate programs are taken from fenced blocks in order; the first that
// assembles wins. Without fences the whole text is tried. On failure the
// returned error explains the last problem.
struct Extraction {
    std::optional<Warrior> warrior;
    std::string error;
};
Extraction extract_warrior(std::string_view response, const redcode::ParseOptions& options = {});

class LlmOperator final : public MutationOperator {
public:
    LlmOperator(LlmEndpointConfig cfg, std::shared_ptr<ChatClient> client,
                PromptTemplates templates, redcode::ParseOptions options = {});

    const OperatorIdentity& identity() const override { return identity_; }
    Warrior generate(const PromptContext& ctx, std::uint64_t seed) override;
    Warrior mutate(const PromptContext& ctx, std::uint64_t seed) override;

private:
    Warrior run(const PromptContext& ctx, std::uint64_t seed);

    LlmEndpointConfig cfg_;
    std::shared_ptr<ChatClient> client_;
    PromptTemplates templates_;
    redcode::ParseOptions options_;
    OperatorIdentity identity_;
};

}  // namespace dei::mutation
