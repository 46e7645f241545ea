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

// Live HTTP transport for MllmClient, backed by cpp-httplib.

#include <chrono>
#include <string>

#include "httplib.h"

#include "georag/error.hpp"
#include "georag/mllm_client.hpp"

namespace georag {

struct ParsedUrl {
    std::string scheme_host_port;  // "http://host:port"
    std::string path_prefix;       // "/v1", or empty
};

inline ParsedUrl split_base_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::kConfig, "base_url \"" + url + "\" has no scheme");
    }
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw Error(ErrorCode::kConfig, "base_url scheme must be http or https, got \"" + scheme + "\"");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    out.scheme_host_port = url.substr(0, path_start);
    if (path_start != std::string::npos) out.path_prefix = url.substr(path_start);
    while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
    if (out.scheme_host_port.size() <= scheme_end + 3) {
        throw Error(ErrorCode::kConfig, "base_url \"" + url + "\" has no host");
    }
    return out;
}

/// One connection per request, so concurrent posts share nothing.
class HttpTransport : public Transport {
public:
    explicit HttpTransport(const std::string& base_url) : url_(split_base_url(base_url)) {}

    HttpResponse post(const HttpRequest& request) override {
        httplib::Client client(url_.scheme_host_port);
        const auto timeout = std::chrono::duration_cast<std::chrono::seconds>(request.timeout).count();
        client.set_connection_timeout(timeout > 0 ? timeout : 120, 0);
        client.set_read_timeout(timeout > 0 ? timeout : 120, 0);
        client.set_write_timeout(timeout > 0 ? timeout : 120, 0);
        httplib::Headers headers;
        std::string content_type = "application/json";
        for (const auto& [k, v] : request.headers) {
            if (k == "Content-Type") {
                content_type = v;
            } else {
                headers.emplace(k, v);
            }
        }
        auto result = client.Post(url_.path_prefix + request.path, headers, request.body, content_type);
        if (!result) {
            const auto err = result.error();
            const bool timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
            return {0, "", timed_out, httplib::to_string(err)};
        }
        return {result->status, result->body, false, ""};
    }

    TransportKind kind() const override { return TransportKind::kLive; }

private:
    ParsedUrl url_;
};

}  // namespace georag
