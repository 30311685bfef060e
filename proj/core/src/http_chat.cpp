#include "dei/mutation.hpp"

#include "dei/common.hpp"

#include "httplib.h"

#include <cstdlib>

namespace dei::mutation {

namespace {

// Splits "http://host:port/v1" into ("http://host:port", "/v1").
std::pair<std::string, std::string> split_url(const std::string& url) {
    const std::size_t scheme = url.find("://");
    if (scheme == std::string::npos) throw PreconditionError("base_url needs a scheme: " + url);
    const std::size_t path = url.find('/', scheme + 3);
    if (path == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path), prefix};
}

}  // namespace

HttpChatClient::HttpChatClient(LlmEndpointConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::tie(origin_, path_) = split_url(cfg_.base_url);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (origin_.rfind("https://", 0) == 0) {
        throw PreconditionError("built without TLS support; cannot use " + cfg_.base_url);
    }
#endif
}

std::string HttpChatClient::complete(const ChatRequest& request) {
    httplib::Client cli(origin_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    if (!cfg_.api_key_env.empty()) {
        if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key != nullptr && *key != '\0') {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
    }
    const auto res = cli.Post(path_ + "/chat/completions", headers, request.to_json().dump(),
                              "application/json");
    if (!res) {
        throw TransportError("POST " + cfg_.base_url + "/chat/completions failed: " +
                             httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw TransportError("chat endpoint returned HTTP " + std::to_string(res->status) + ": " +
                             res->body.substr(0, 200));
    }
    try {
        const auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("malformed chat response: ") + e.what());
    }
}

}  // namespace dei::mutation
