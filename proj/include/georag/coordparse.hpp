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

// Extraction of a decimal-degree coordinate from free-form model output.
//
// Recognized forms:
//   48.8566, 2.3522          unlabeled pair, latitude first
//   (48.8566, 2.3522)        parentheses are ordinary surrounding text
//   48.8566 N, 2.3522 E      hemisphere letters, S and W negate
//   Latitude: a ... Longitude: b   labeled values, either order
// The last range-valid pair in the text wins.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "georag/geodesy.hpp"

namespace georag {

struct TextSpan {
    std::size_t begin = 0;
    std::size_t end = 0;  // one past the last character

    friend bool operator==(const TextSpan&, const TextSpan&) = default;
};

struct ParseOutcome {
    std::optional<GeoCoord> coord;
    std::optional<TextSpan> matched_span;
    std::size_t candidates_seen = 0;
};

namespace detail {

enum class Label { kNone, kLat, kLon };

struct NumberToken {
    double value = 0.0;
    std::size_t begin = 0;
    std::size_t end = 0;  // after the number and any degree sign / hemisphere letter
    bool has_fraction = false;
    char hemisphere = 0;  // 'N', 'S', 'E', 'W' or 0
    Label label = Label::kNone;
    bool used = false;
};

inline bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
inline bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

// Skips a degree sign (UTF-8 U+00B0, or U+00BA which models sometimes emit)
// and spaces.
inline std::size_t skip_degree(std::string_view t, std::size_t i) {
    std::size_t j = i;
    while (j < t.size() && t[j] == ' ') ++j;
    if (j + 1 < t.size() && static_cast<unsigned char>(t[j]) == 0xC2 &&
        (static_cast<unsigned char>(t[j + 1]) == 0xB0 || static_cast<unsigned char>(t[j + 1]) == 0xBA)) {
        return j + 2;
    }
    return i;
}

// Label word ending right before `pos` (ignoring ':', '=', spaces and quotes).
inline Label label_before(std::string_view t, std::size_t pos) {
    std::size_t j = pos;
    while (j > 0 && (t[j - 1] == ' ' || t[j - 1] == '\t' || t[j - 1] == ':' || t[j - 1] == '=' ||
                     t[j - 1] == '"' || t[j - 1] == '\'' || t[j - 1] == '*')) {
        --j;
    }
    std::size_t k = j;
    while (k > 0 && is_alpha(t[k - 1])) --k;
    if (k == j) return Label::kNone;
    const auto word = lower(t.substr(k, j - k));
    if (word == "latitude" || word == "lat") return Label::kLat;
    if (word == "longitude" || word == "lon" || word == "lng" || word == "long") return Label::kLon;
    return Label::kNone;
}

inline std::vector<NumberToken> scan_numbers(std::string_view t) {
    std::vector<NumberToken> tokens;
    std::size_t i = 0;
    while (i < t.size()) {
        std::size_t start = i;
        bool negative = false;
        std::size_t digits_at = i;
        if (t[i] == '-' || t[i] == '+') {
            negative = t[i] == '-';
            digits_at = i + 1;
        } else if (i + 2 < t.size() && static_cast<unsigned char>(t[i]) == 0xE2 &&
                   static_cast<unsigned char>(t[i + 1]) == 0x88 && static_cast<unsigned char>(t[i + 2]) == 0x92) {
            negative = true;  // U+2212 minus sign
            digits_at = i + 3;
        }
        if (digits_at >= t.size() || !is_digit(t[digits_at])) {
            ++i;
            continue;
        }
        // A number glued to a preceding word or number (e.g. "x2", "1.2.3") is not a coordinate.
        if (start > 0 && (is_alpha(t[start - 1]) || is_digit(t[start - 1]) || t[start - 1] == '.')) {
            i = digits_at;
            while (i < t.size() && (is_digit(t[i]) || t[i] == '.')) ++i;
            continue;
        }
        std::size_t j = digits_at;
        while (j < t.size() && is_digit(t[j])) ++j;
        bool frac = false;
        if (j + 1 < t.size() && t[j] == '.' && is_digit(t[j + 1])) {
            frac = true;
            ++j;
            while (j < t.size() && is_digit(t[j])) ++j;
        }
        if (j < t.size() && is_alpha(t[j]) && t[j] != 'N' && t[j] != 'S' && t[j] != 'E' && t[j] != 'W') {
            // "3rd", "5km" and the like.
            i = j;
            continue;
        }
        if (j < t.size() && (t[j] == '.' && j + 1 < t.size() && is_digit(t[j + 1]))) {
            i = j + 1;  // dotted sequences like version numbers
            continue;
        }
        double value = 0.0;
        auto res = std::from_chars(t.data() + digits_at, t.data() + j, value);
        if (res.ec != std::errc()) {
            i = j;
            continue;
        }
        NumberToken tok;
        tok.value = negative ? -value : value;
        tok.begin = start;
        tok.has_fraction = frac;
        std::size_t end = skip_degree(t, j);
        std::size_t h = end;
        while (h < t.size() && t[h] == ' ') ++h;
        if (h < t.size()) {
            const char c = t[h];
            const bool standalone = h + 1 >= t.size() || !is_alpha(t[h + 1]);
            if ((c == 'N' || c == 'S' || c == 'E' || c == 'W') && standalone) {
                tok.hemisphere = c;
                end = h + 1;
            }
        }
        if (tok.hemisphere == 0 && end == j && j < t.size() && is_alpha(t[j])) {
            // Letter glued to the number that is not a hemisphere marker.
            i = j;
            continue;
        }
        tok.end = end;
        tok.label = label_before(t, start);
        tokens.push_back(tok);
        i = end;
    }
    return tokens;
}

inline double apply_hemisphere(const NumberToken& tok) {
    if (tok.hemisphere == 'S' || tok.hemisphere == 'W') return -std::abs(tok.value);
    if (tok.hemisphere == 'N' || tok.hemisphere == 'E') return std::abs(tok.value);
    return tok.value;
}

inline bool is_lon_hemisphere(char h) { return h == 'E' || h == 'W'; }
inline bool is_lat_hemisphere(char h) { return h == 'N' || h == 'S'; }

// True when only a single comma (or semicolon) and whitespace separate the
// two tokens, or only whitespace when both carry hemisphere letters.
inline bool pair_separator(std::string_view t, const NumberToken& a, const NumberToken& b) {
    int commas = 0;
    for (std::size_t i = a.end; i < b.begin; ++i) {
        if (t[i] == ',' || t[i] == ';') {
            ++commas;
        } else if (!is_space(t[i])) {
            return false;
        }
    }
    return commas == 1 || (commas == 0 && a.hemisphere != 0 && b.hemisphere != 0);
}

struct PairCandidate {
    GeoCoord coord;
    TextSpan span;
};

}  // namespace detail

/// Never throws; absence of a coordinate is reported through `coord`.
inline ParseOutcome parse_coordinates(std::string_view text) noexcept {
    ParseOutcome outcome;
    std::vector<detail::PairCandidate> candidates;
    try {
        auto tokens = detail::scan_numbers(text);

        // Labeled pairs: a latitude-labeled value next to a longitude-labeled
        // value among the labeled tokens, in either order.
        std::vector<std::size_t> labeled;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (tokens[i].label != detail::Label::kNone) labeled.push_back(i);
        }
        for (std::size_t n = 0; n + 1 < labeled.size(); ++n) {
            auto& a = tokens[labeled[n]];
            auto& b = tokens[labeled[n + 1]];
            if (a.used || a.label == b.label) continue;
            const auto& lat_tok = a.label == detail::Label::kLat ? a : b;
            const auto& lon_tok = a.label == detail::Label::kLat ? b : a;
            GeoCoord c{detail::apply_hemisphere(lat_tok), detail::apply_hemisphere(lon_tok)};
            a.used = b.used = true;
            if (is_valid(c)) candidates.push_back({c, {a.begin, b.end}});
            ++n;
        }

        // Unlabeled pairs of decimal numbers.
        for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
            auto& a = tokens[i];
            auto& b = tokens[i + 1];
            if (a.used || b.used) continue;
            if (!a.has_fraction && !b.has_fraction) continue;
            if (!detail::pair_separator(text, a, b)) continue;
            GeoCoord c{detail::apply_hemisphere(a), detail::apply_hemisphere(b)};
            if (detail::is_lon_hemisphere(a.hemisphere) && detail::is_lat_hemisphere(b.hemisphere)) {
                std::swap(c.lat, c.lon);
            }
            if (is_valid(c)) {
                candidates.push_back({c, {a.begin, b.end}});
                a.used = b.used = true;
                ++i;
            }
        }
    } catch (...) {
        // Allocation failure is the only thing that can throw above.
    }

    outcome.candidates_seen = candidates.size();
    const detail::PairCandidate* last = nullptr;
    for (const auto& c : candidates) {
        if (last == nullptr || c.span.end > last->span.end) last = &c;
    }
    if (last != nullptr) {
        outcome.coord = last->coord;
        outcome.matched_span = last->span;
    }
    return outcome;
}

}  // namespace georag
