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

#include <stdexcept>
#include <string>
#include <string_view>

namespace georag {

enum class ErrorCode {
    kInvalidArgument,
    kDimensionMismatch,
    kDuplicateId,
    kOutOfRange,
    kCountMismatch,
    kBadMagic,
    kUnsupportedVersion,
    kTruncated,
    kChecksumMismatch,
    kMalformed,
    kIo,
    kUnknownTemplate,
    kPreflight,
    kRequest,
    kTransport,
    kConfig,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::kInvalidArgument: return "invalid argument";
        case ErrorCode::kDimensionMismatch: return "dimension mismatch";
        case ErrorCode::kDuplicateId: return "duplicate id";
        case ErrorCode::kOutOfRange: return "out of range";
        case ErrorCode::kCountMismatch: return "count mismatch";
        case ErrorCode::kBadMagic: return "bad magic";
        case ErrorCode::kUnsupportedVersion: return "unsupported version";
        case ErrorCode::kTruncated: return "truncated file";
        case ErrorCode::kChecksumMismatch: return "checksum mismatch";
        case ErrorCode::kMalformed: return "malformed input";
        case ErrorCode::kIo: return "i/o error";
        case ErrorCode::kUnknownTemplate: return "unknown template";
        case ErrorCode::kPreflight: return "pre-flight error";
        case ErrorCode::kRequest: return "request error";
        case ErrorCode::kTransport: return "transport error";
        case ErrorCode::kConfig: return "configuration error";
    }
    return "error";
}

/// Base exception for everything thrown by the library. The message is
/// prefixed with the error kind, e.g. "bad magic: expected GRAG".
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace georag
