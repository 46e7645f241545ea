// Copyright 2026 The GeoRAG Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Client for chat-completions compatible multimodal endpoints.
//
// The client owns request construction, retry policy and response parsing.
// Bytes move through a Transport: HttpTransport (http_transport.hpp) talks to
// a live server, MockTransport replays a script in-process.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "georag/coordparse.hpp"
#include "georag/error.hpp"
#include "georag/hashing.hpp"
#include "georag/promptgen.hpp"

namespace georag {

inline constexpr double kDefaultTemperature = 0.1;
inline constexpr double kDefaultTopP = 0.1;
inline constexpr std::uint32_t kDefaultMaxTokens = 512;
inline constexpr char kApiKeyEnv[] = "GEORAG_API_KEY";

struct ModelConfig {
    std::string base_url = "http://127.0.0.1:8000/v1";
    std::string model_name = "Qwen/Qwen2-VL-72B-Instruct-AWQ";
    double temperature = kDefaultTemperature;
    double top_p = kDefaultTopP;
    std::uint32_t max_tokens = kDefaultMaxTokens;
    std::uint32_t request_timeout_s = 120;
    std::uint32_t max_retries = 3;
    double retry_backoff_s = 2.0;  // doubled after every failed attempt
    std::size_t max_image_bytes = 20u << 20;
    std::string api_key;           // sent as a bearer token when non-empty

    void validate() const {
        if (!(temperature >= 0.0 && temperature <= 2.0)) {
            throw Error(ErrorCode::kConfig, "temperature must be in [0, 2], got " + std::to_string(temperature));
        }
        if (!(top_p > 0.0 && top_p <= 1.0)) {
            throw Error(ErrorCode::kConfig, "top_p must be in (0, 1], got " + std::to_string(top_p));
        }
        if (max_tokens < 1) throw Error(ErrorCode::kConfig, "max_tokens must be >= 1");
        if (request_timeout_s < 1) throw Error(ErrorCode::kConfig, "request_timeout_s must be >= 1");
        if (!(retry_backoff_s >= 0.0) || !std::isfinite(retry_backoff_s)) {
            throw Error(ErrorCode::kConfig, "retry_backoff_s must be a non-negative number");
        }
        if (model_name.empty()) throw Error(ErrorCode::kConfig, "model_name is empty");
        if (base_url.empty()) throw Error(ErrorCode::kConfig, "base_url is empty");
    }

    /// Fills api_key from GEORAG_API_KEY when the variable is set.
    void apply_environment() {
        if (const char* key = std::getenv(kApiKeyEnv); key != nullptr && *key != '\0') api_key = key;
    }
};

enum class TransportKind : std::uint8_t { kLive, kMock };

inline std::string_view to_string(TransportKind kind) { return kind == TransportKind::kLive ? "LIVE" : "MOCK"; }

struct HttpRequest {
    std::string path;  // relative to base_url, e.g. "/chat/completions"
    std::string body;
    std::vector<std::pair<std::string, std::string>> headers;
    std::chrono::milliseconds timeout{0};
};

struct HttpResponse {
    int status = 0;  // 0: no response received
    std::string body;
    bool timed_out = false;
    std::string error;  // transport-level failure description
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const HttpRequest& request) = 0;
    virtual TransportKind kind() const = 0;
};

/// Error raised by the client. `status` is the last HTTP status seen (0 when
/// no response arrived).
class ModelError : public Error {
public:
    ModelError(ErrorCode code, const std::string& what, int status, std::uint32_t attempts)
        : Error(code, what), status_(status), attempts_(attempts) {}

    int status() const noexcept { return status_; }
    std::uint32_t attempts() const noexcept { return attempts_; }

private:
    int status_;
    std::uint32_t attempts_;
};

struct ModelResponse {
    std::string raw_text;
    std::uint64_t latency_ms = 0;
    std::uint32_t attempt_count = 0;
    TransportKind transport = TransportKind::kMock;
    std::string model;  // as echoed by the server, empty if absent
};

struct HealthReport {
    bool ok = false;
    std::string model;
    std::uint64_t latency_ms = 0;
    std::uint32_t attempt_count = 0;
};

inline std::string data_url(const ImageAttachment& image) {
    return "data:" + image.media_type + ";base64," + base64_encode(image.bytes);
}

/// Serialized chat-completions body. Key order is fixed so identical inputs
/// produce identical bytes.
inline std::string chat_request_body(const PromptBundle& bundle, const ModelConfig& config) {
    nlohmann::ordered_json body;
    body["model"] = config.model_name;
    body["messages"] = nlohmann::ordered_json::array(
        {{{"role", "user"},
          {"content", nlohmann::ordered_json::array({{{"type", "text"}, {"text", bundle.text}},
                                                     {{"type", "image_url"},
                                                      {"image_url", {{"url", data_url(bundle.image)}}}}})}}});
    body["temperature"] = config.temperature;
    body["top_p"] = config.top_p;
    body["max_tokens"] = config.max_tokens;
    return body.dump();
}

inline std::string healthcheck_request_body(const ModelConfig& config) {
    nlohmann::ordered_json body;
    body["model"] = config.model_name;
    body["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", "ping"}}});
    body["temperature"] = config.temperature;
    body["top_p"] = config.top_p;
    body["max_tokens"] = 1;
    return body.dump();
}

/// Assistant text from a chat-completions response body; nullopt if the body
/// does not have that shape.
inline std::optional<std::pair<std::string, std::string>> parse_chat_response(std::string_view body) {
    auto doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
    auto choices = doc.find("choices");
    if (choices == doc.end() || !choices->is_array() || choices->empty()) return std::nullopt;
    const auto& msg = (*choices)[0].value("message", nlohmann::json::object());
    auto content = msg.find("content");
    if (content == msg.end()) return std::nullopt;
    std::string text;
    if (content->is_string()) {
        text = content->get<std::string>();
    } else if (content->is_array()) {
        for (const auto& part : *content) {
            if (part.is_object() && part.value("type", "") == "text") text += part.value("text", "");
        }
    } else if (!content->is_null()) {
        return std::nullopt;
    }
    std::string model = doc.contains("model") && doc["model"].is_string() ? doc["model"].get<std::string>() : "";
    return std::make_pair(std::move(text), std::move(model));
}

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

/// Shareable across threads; holds no mutable state of its own.
class MllmClient {
public:
    MllmClient(ModelConfig config, std::shared_ptr<Transport> transport, Sleeper sleeper = real_sleeper())
        : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
        config_.validate();
        if (!transport_) throw Error(ErrorCode::kConfig, "no transport installed");
    }

    const ModelConfig& config() const { return config_; }
    TransportKind transport_kind() const { return transport_->kind(); }

    ModelResponse complete(const PromptBundle& bundle) const {
        if (bundle.image.bytes.empty()) throw ModelError(ErrorCode::kPreflight, "image attachment is empty", 0, 0);
        if (bundle.image.bytes.size() > config_.max_image_bytes) {
            throw ModelError(ErrorCode::kPreflight,
                             "image of " + std::to_string(bundle.image.bytes.size()) + " bytes exceeds the " +
                                 std::to_string(config_.max_image_bytes) + "-byte limit",
                             0, 0);
        }
        auto [text, model, attempts, latency] = send(chat_request_body(bundle, config_));
        return {std::move(text), latency, attempts, transport_->kind(), std::move(model)};
    }

    HealthReport healthcheck() const {
        auto [text, model, attempts, latency] = send(healthcheck_request_body(config_));
        return {true, model.empty() ? config_.model_name : model, latency, attempts};
    }

private:
    struct Sent {
        std::string text;
        std::string model;
        std::uint32_t attempts;
        std::uint64_t latency_ms;
    };

    Sent send(std::string body) const {
        HttpRequest request;
        request.path = "/chat/completions";
        request.body = std::move(body);
        request.headers.emplace_back("Content-Type", "application/json");
        if (!config_.api_key.empty()) request.headers.emplace_back("Authorization", "Bearer " + config_.api_key);
        request.timeout = std::chrono::seconds(config_.request_timeout_s);

        const auto started = std::chrono::steady_clock::now();
        int last_status = 0;
        std::string last_problem;
        for (std::uint32_t attempt = 1;; ++attempt) {
            const HttpResponse resp = transport_->post(request);
            last_status = resp.status;
            if (resp.status >= 200 && resp.status < 300) {
                if (auto parsed = parse_chat_response(resp.body)) {
                    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - started);
                    return {std::move(parsed->first), std::move(parsed->second), attempt,
                            static_cast<std::uint64_t>(elapsed.count())};
                }
                last_problem = "response is not a chat completion";
            } else if (resp.status >= 400 && resp.status < 500) {
                throw ModelError(ErrorCode::kRequest,
                                 "endpoint rejected request for model \"" + config_.model_name + "\" with HTTP " +
                                     std::to_string(resp.status) + ": " + resp.body.substr(0, 512),
                                 resp.status, attempt);
            } else if (resp.timed_out) {
                last_problem = "timed out after " + std::to_string(config_.request_timeout_s) + " s";
            } else if (resp.status == 0) {
                last_problem = resp.error.empty() ? "no response" : resp.error;
            } else {
                last_problem = "HTTP " + std::to_string(resp.status);
            }
            if (attempt > config_.max_retries) {
                throw ModelError(ErrorCode::kTransport,
                                 "giving up after " + std::to_string(attempt) + " attempts (last status " +
                                     std::to_string(last_status) + "): " + last_problem,
                                 last_status, attempt);
            }
            const double backoff_s = config_.retry_backoff_s * std::pow(2.0, attempt - 1);
            sleeper_(std::chrono::milliseconds(static_cast<std::int64_t>(backoff_s * 1000.0)));
        }
    }

    ModelConfig config_;
    std::shared_ptr<Transport> transport_;
    Sleeper sleeper_;
};

/// Wraps assistant text into a minimal chat-completions response body.
inline std::string chat_response_body(std::string_view content, std::string_view model = "mock") {
    nlohmann::ordered_json body;
    body["object"] = "chat.completion";
    body["model"] = model;
    body["choices"] = nlohmann::ordered_json::array(
        {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}, {"finish_reason", "stop"}}});
    return body.dump();
}

struct MockStep {
    std::uint32_t delay_ms = 0;
    int status = 200;
    std::string body;

    static MockStep reply(std::string_view content) { return {0, 200, chat_response_body(content)}; }
    static MockStep fail(int status) { return {0, status, R"({"error":{"message":"mock failure"}})"}; }
    static MockStep timeout() { return {std::numeric_limits<std::uint32_t>::max(), 0, ""}; }
};

/// Decoded view of a captured chat request.
struct ChatRequestView {
    std::string model;
    std::string text;
    std::vector<std::uint8_t> image;
};

inline std::optional<ChatRequestView> view_chat_request(std::string_view body) {
    auto doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
    ChatRequestView view;
    view.model = doc.value("model", "");
    const auto& messages = doc.value("messages", nlohmann::json::array());
    for (const auto& m : messages) {
        const auto& content = m.value("content", nlohmann::json());
        if (content.is_string()) {
            view.text += content.get<std::string>();
            continue;
        }
        if (!content.is_array()) continue;
        for (const auto& part : content) {
            const auto type = part.value("type", "");
            if (type == "text") {
                view.text += part.value("text", "");
            } else if (type == "image_url" && part.contains("image_url")) {
                const std::string url = part["image_url"].value("url", "");
                const auto comma = url.find(',');
                if (url.rfind("data:", 0) == 0 && comma != std::string::npos) {
                    if (auto bytes = base64_decode(std::string_view(url).substr(comma + 1))) view.image = std::move(*bytes);
                }
            }
        }
    }
    return view;
}

using MockResponder = std::function<MockStep(const HttpRequest&)>;

/// In-process transport. Request i is answered by script step i; requests
/// past the end of the script go to the responder if one is set, otherwise
/// repeat the last step. A step whose delay reaches the request timeout is
/// reported as a timeout without sleeping.
class MockTransport : public Transport {
public:
    MockTransport() = default;
    explicit MockTransport(std::vector<MockStep> script, MockResponder responder = {})
        : script_(std::move(script)), responder_(std::move(responder)) {}

    static std::shared_ptr<MockTransport> replying(std::string content) {
        return std::make_shared<MockTransport>(std::vector<MockStep>{MockStep::reply(content)});
    }

    /// Rejects requests naming any other model with a 404.
    void set_accepted_model(std::string model) { accepted_model_ = std::move(model); }

    HttpResponse post(const HttpRequest& request) override {
        std::size_t index;
        {
            std::lock_guard lock(mu_);
            index = captured_.size();
            captured_.push_back(request);
        }
        if (accepted_model_) {
            auto view = view_chat_request(request.body);
            if (!view || view->model != *accepted_model_) {
                const std::string name = view ? view->model : "";
                return {404, R"({"error":{"message":"The model `)" + name + R"(` does not exist."}})", false, ""};
            }
        }
        MockStep step;
        if (index < script_.size()) {
            step = script_[index];
        } else if (responder_) {
            step = responder_(request);
        } else if (!script_.empty()) {
            step = script_.back();
        } else {
            return {0, "", false, "mock script is empty"};
        }
        const auto timeout_ms = static_cast<std::uint64_t>(request.timeout.count());
        if (step.delay_ms == std::numeric_limits<std::uint32_t>::max() ||
            (timeout_ms > 0 && step.delay_ms >= timeout_ms)) {
            return {0, "", true, "timed out"};
        }
        if (step.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(step.delay_ms));
        return {step.status, step.body, false, ""};
    }

    TransportKind kind() const override { return TransportKind::kMock; }

    std::vector<HttpRequest> captured() const {
        std::lock_guard lock(mu_);
        return captured_;
    }
    std::size_t request_count() const {
        std::lock_guard lock(mu_);
        return captured_.size();
    }

private:
    std::vector<MockStep> script_;
    MockResponder responder_;
    std::optional<std::string> accepted_model_;
    mutable std::mutex mu_;
    std::vector<HttpRequest> captured_;
};

/// Answers with the first coordinate line of the prompt, i.e. the location
/// of the nearest gallery neighbor.
inline MockResponder echo_nearest_responder() {
    return [](const HttpRequest& request) {
        auto view = view_chat_request(request.body);
        if (view) {
            std::string_view text = view->text;
            std::size_t pos = 0;
            while (pos < text.size()) {
                auto end = text.find('\n', pos);
                if (end == std::string_view::npos) end = text.size();
                const auto line = text.substr(pos, end - pos);
                const auto parsed = parse_coordinates(line);
                if (parsed.coord && parsed.matched_span->begin == 0 && parsed.matched_span->end == line.size()) {
                    return MockStep::reply(line);
                }
                pos = end + 1;
            }
        }
        return MockStep::reply("I cannot determine the location.");
    };
}

/// Looks up the reply by SHA-256 (hex) of the attached image bytes.
inline MockResponder by_image_responder(std::map<std::string, std::string> replies, std::string fallback) {
    return [replies = std::move(replies), fallback = std::move(fallback)](const HttpRequest& request) {
        auto view = view_chat_request(request.body);
        if (view) {
            const std::string digest =
                sha256_hex({reinterpret_cast<const char*>(view->image.data()), view->image.size()});
            if (auto it = replies.find(digest); it != replies.end()) return MockStep::reply(it->second);
        }
        return MockStep::reply(fallback);
    };
}

/// Builds a mock from a JSON script:
///   {"steps": [{"delay_ms": 0, "status": 200, "content": "48.8, 2.3"}, ...],
///    "responder": "echo_nearest" | "by_image",
///    "by_image": {"<sha256 of image bytes>": "reply", ...},
///    "default_content": "reply when no by_image entry matches",
///    "accepted_model": "name"}
/// A step may give "body" (raw HTTP body) instead of "content"; "timeout": true
/// makes the step time out.
inline std::shared_ptr<MockTransport> mock_from_script(const nlohmann::json& script) {
    try {
        std::vector<MockStep> steps;
        for (const auto& s : script.value("steps", nlohmann::json::array())) {
            MockStep step;
            step.delay_ms = s.value("delay_ms", 0u);
            step.status = s.value("status", 200);
            if (s.value("timeout", false)) step = MockStep::timeout();
            if (s.contains("body")) {
                step.body = s.at("body").get<std::string>();
            } else if (s.contains("content")) {
                step.body = chat_response_body(s.at("content").get<std::string>());
            }
            steps.push_back(std::move(step));
        }
        MockResponder responder;
        const std::string kind = script.value("responder", "");
        if (kind == "echo_nearest") {
            responder = echo_nearest_responder();
        } else if (kind == "by_image") {
            responder = by_image_responder(script.value("by_image", std::map<std::string, std::string>{}),
                                           script.value("default_content", ""));
        } else if (!kind.empty()) {
            throw Error(ErrorCode::kConfig, "unknown mock responder \"" + kind + "\"");
        }
        if (steps.empty() && !responder) throw Error(ErrorCode::kConfig, "mock script has no steps and no responder");
        auto mock = std::make_shared<MockTransport>(std::move(steps), std::move(responder));
        if (script.contains("accepted_model")) mock->set_accepted_model(script.at("accepted_model").get<std::string>());
        return mock;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kConfig, std::string("malformed mock script: ") + e.what());
    }
}

}  // namespace georag
