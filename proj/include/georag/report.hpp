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

// Accuracy reports in the five-threshold table layout, with Markdown, CSV and
// JSON renderings.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "georag/error.hpp"
#include "georag/geodesy.hpp"

namespace georag {

struct Provenance {
    std::string template_id;
    std::string model_name;
    std::size_t k_similar = 0;
    std::size_t k_dissimilar = 0;
    std::string index_checksum;  // CRC32 trailer of the index file, hex
    std::string config_hash;     // SHA-256 of the canonical run configuration
    std::string parse_rule = "last-valid-pair";
    std::string transport;
    std::uint32_t server_max_model_len = 6000;  // informational; a serving-side setting
    std::string generated_at;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct AccuracyReport {
    std::string dataset_name;
    std::size_t n_total = 0;
    std::size_t n_scored = 0;
    std::size_t n_missing = 0;
    std::size_t n_errored = 0;
    std::size_t n_parse_failed = 0;
    std::size_t n_fallback = 0;
    std::array<std::size_t, 5> hits{};
    std::array<std::optional<double>, 5> pct_at{};  // one decimal place; empty when n_scored == 0
    Provenance provenance;

    std::optional<double> pct(AccuracyLevel level) const { return pct_at[static_cast<std::size_t>(level)]; }

    /// Percentage of manifest items with an available image.
    double coverage_pct() const {
        return n_total == 0 ? 100.0 : round1(100.0 * static_cast<double>(n_total - n_missing) / n_total);
    }

    static double round1(double x) { return std::round(x * 10.0) / 10.0; }

    /// Recomputes pct_at from hits and n_scored.
    void finalize_percentages() {
        for (std::size_t i = 0; i < pct_at.size(); ++i) {
            pct_at[i] = n_scored == 0 ? std::nullopt
                                      : std::optional<double>(round1(100.0 * static_cast<double>(hits[i]) /
                                                                     static_cast<double>(n_scored)));
        }
    }

    friend bool operator==(const AccuracyReport&, const AccuracyReport&) = default;
};

enum class ReportFormat { kMarkdown, kCsv, kJson };

inline ReportFormat report_format_from_string(std::string_view s) {
    if (s == "markdown" || s == "md") return ReportFormat::kMarkdown;
    if (s == "csv") return ReportFormat::kCsv;
    if (s == "json") return ReportFormat::kJson;
    throw Error(ErrorCode::kConfig, "unknown report format \"" + std::string(s) + "\" (markdown, csv, json)");
}

inline std::string_view file_extension(ReportFormat f) {
    switch (f) {
        case ReportFormat::kMarkdown: return ".md";
        case ReportFormat::kCsv: return ".csv";
        case ReportFormat::kJson: return ".json";
    }
    return "";
}

inline constexpr char kUndefinedCell[] = "—";

inline std::string format_pct(const std::optional<double>& pct) {
    if (!pct) return kUndefinedCell;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", *pct);
    return buf;
}

inline nlohmann::ordered_json to_json(const AccuracyReport& r) {
    nlohmann::ordered_json pct = nlohmann::ordered_json::object();
    nlohmann::ordered_json hits = nlohmann::ordered_json::object();
    for (auto level : kAccuracyLevels) {
        const auto name = std::string(level_name(level));
        const auto p = r.pct(level);
        pct[name] = p ? nlohmann::ordered_json(*p) : nlohmann::ordered_json(nullptr);
        hits[name] = r.hits[static_cast<std::size_t>(level)];
    }
    const auto& p = r.provenance;
    return {
        {"dataset", r.dataset_name},
        {"n_total", r.n_total},
        {"n_scored", r.n_scored},
        {"n_missing", r.n_missing},
        {"n_errored", r.n_errored},
        {"n_parse_failed", r.n_parse_failed},
        {"n_fallback", r.n_fallback},
        {"coverage_pct", r.coverage_pct()},
        {"pct_at", pct},
        {"hits", hits},
        {"provenance",
         {{"template_id", p.template_id},
          {"model_name", p.model_name},
          {"k_similar", p.k_similar},
          {"k_dissimilar", p.k_dissimilar},
          {"index_checksum", p.index_checksum},
          {"config_hash", p.config_hash},
          {"parse_rule", p.parse_rule},
          {"transport", p.transport},
          {"server_max_model_len", p.server_max_model_len},
          {"generated_at", p.generated_at}}},
    };
}

inline AccuracyReport report_from_json(const nlohmann::json& j) {
    try {
        AccuracyReport r;
        r.dataset_name = j.at("dataset").get<std::string>();
        r.n_total = j.at("n_total").get<std::size_t>();
        r.n_scored = j.at("n_scored").get<std::size_t>();
        r.n_missing = j.at("n_missing").get<std::size_t>();
        r.n_errored = j.at("n_errored").get<std::size_t>();
        r.n_parse_failed = j.at("n_parse_failed").get<std::size_t>();
        r.n_fallback = j.at("n_fallback").get<std::size_t>();
        for (auto level : kAccuracyLevels) {
            const auto name = std::string(level_name(level));
            const auto i = static_cast<std::size_t>(level);
            r.hits[i] = j.at("hits").at(name).get<std::size_t>();
            const auto& p = j.at("pct_at").at(name);
            r.pct_at[i] = p.is_null() ? std::nullopt : std::optional<double>(p.get<double>());
        }
        const auto& p = j.at("provenance");
        r.provenance.template_id = p.at("template_id").get<std::string>();
        r.provenance.model_name = p.at("model_name").get<std::string>();
        r.provenance.k_similar = p.at("k_similar").get<std::size_t>();
        r.provenance.k_dissimilar = p.at("k_dissimilar").get<std::size_t>();
        r.provenance.index_checksum = p.at("index_checksum").get<std::string>();
        r.provenance.config_hash = p.at("config_hash").get<std::string>();
        r.provenance.parse_rule = p.at("parse_rule").get<std::string>();
        r.provenance.transport = p.at("transport").get<std::string>();
        r.provenance.server_max_model_len = p.at("server_max_model_len").get<std::uint32_t>();
        r.provenance.generated_at = p.at("generated_at").get<std::string>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kMalformed, std::string("report JSON: ") + e.what());
    }
}

inline std::string render_markdown(std::span<const AccuracyReport> reports) {
    std::string out =
        "| Dataset | Street 1 km | City 25 km | Region 200 km | Country 750 km | Continent 2,500 km |\n"
        "|---|---:|---:|---:|---:|---:|\n";
    for (const auto& r : reports) {
        out += "| " + r.dataset_name;
        for (auto level : kAccuracyLevels) out += " | " + format_pct(r.pct(level));
        out += " |\n";
    }
    for (const auto& r : reports) {
        char cov[32];
        std::snprintf(cov, sizeof(cov), "%.1f", r.coverage_pct());
        out += "\n" + r.dataset_name + ": scored " + std::to_string(r.n_scored) + " of " + std::to_string(r.n_total) +
               " items (coverage " + cov + "%), " + std::to_string(r.n_missing) + " missing, " +
               std::to_string(r.n_errored) + " errored, " + std::to_string(r.n_parse_failed) +
               " parse failures.\n";
    }
    return out;
}

inline std::string render_csv(std::span<const AccuracyReport> reports) {
    std::string out =
        "dataset,street_1km,city_25km,region_200km,country_750km,continent_2500km,"
        "n_total,n_scored,n_missing,n_errored,n_parse_failed\n";
    for (const auto& r : reports) {
        out += r.dataset_name;
        // CSV leaves undefined cells empty.
        for (auto level : kAccuracyLevels) out += "," + (r.pct(level) ? format_pct(r.pct(level)) : "");
        out += "," + std::to_string(r.n_total) + "," + std::to_string(r.n_scored) + "," +
               std::to_string(r.n_missing) + "," + std::to_string(r.n_errored) + "," +
               std::to_string(r.n_parse_failed) + "\n";
    }
    return out;
}

inline std::string render_json(std::span<const AccuracyReport> reports) {
    if (reports.size() == 1) return to_json(reports[0]).dump(2) + "\n";
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) arr.push_back(to_json(r));
    return arr.dump(2) + "\n";
}

inline std::string render_report(std::span<const AccuracyReport> reports, ReportFormat format) {
    switch (format) {
        case ReportFormat::kMarkdown: return render_markdown(reports);
        case ReportFormat::kCsv: return render_csv(reports);
        case ReportFormat::kJson: return render_json(reports);
    }
    return {};
}

inline std::string render_report(const AccuracyReport& report, ReportFormat format) {
    return render_report(std::span<const AccuracyReport>(&report, 1), format);
}

/// Parses what render_json produced: one report object or an array of them.
inline std::vector<AccuracyReport> parse_reports_json(std::string_view text) {
    auto doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorCode::kMalformed, "report file is not valid JSON");
    std::vector<AccuracyReport> out;
    if (doc.is_array()) {
        for (const auto& r : doc) out.push_back(report_from_json(r));
    } else {
        out.push_back(report_from_json(doc));
    }
    return out;
}

}  // namespace georag
