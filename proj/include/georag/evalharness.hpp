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

// Benchmark evaluation: retrieve, prompt, query the model, parse, score.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <exception>
#include <mutex>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "georag/coordparse.hpp"
#include "georag/error.hpp"
#include "georag/geodesy.hpp"
#include "georag/hashing.hpp"
#include "georag/ingest.hpp"
#include "georag/mllm_client.hpp"
#include "georag/promptgen.hpp"
#include "georag/report.hpp"
#include "georag/vecstore.hpp"

namespace georag {

struct EvalConfig {
    std::string dataset_name = "benchmark";
    std::size_t k_similar = kDefaultKSimilar;
    std::size_t k_dissimilar = kDefaultKDissimilar;
    std::string template_id = std::string(kDefaultTemplateId);
    std::optional<std::uint32_t> nprobe;  // IVF only; index default when empty
    std::size_t max_in_flight = 4;
    bool keep_raw_responses = true;

    void validate() const {
        if (max_in_flight == 0) throw Error(ErrorCode::kConfig, "max_in_flight must be >= 1");
        if (nprobe && *nprobe == 0) throw Error(ErrorCode::kConfig, "nprobe must be >= 1");
    }
};

enum class OutcomeStatus : std::uint8_t { kScored, kMissing, kErrored };

inline std::string_view to_string(OutcomeStatus s) {
    switch (s) {
        case OutcomeStatus::kScored: return "scored";
        case OutcomeStatus::kMissing: return "missing";
        case OutcomeStatus::kErrored: return "errored";
    }
    return "";
}

struct ItemTrace {
    std::vector<std::uint64_t> similar_ids;
    std::vector<std::uint64_t> dissimilar_ids;
    std::string template_id;
    std::string prompt_sha256;
    std::string raw_response;
    std::uint32_t attempts = 0;
    std::uint64_t latency_ms = 0;
};

struct EvalOutcome {
    std::string item_id;
    OutcomeStatus status = OutcomeStatus::kScored;
    std::optional<GeoCoord> predicted;
    GeoCoord ground_truth;
    std::optional<double> error_km;
    LevelSet levels_hit;
    bool parse_failed = false;
    bool fallback_used = false;
    std::string error;  // set for errored items
    ItemTrace trace;
};

/// Scores a parsed prediction against ground truth.
inline void score_prediction(EvalOutcome& outcome, const ParseOutcome& parsed) {
    if (!parsed.coord) {
        outcome.parse_failed = true;
        return;
    }
    outcome.predicted = parsed.coord;
    const auto geo = geodesic_km(*parsed.coord, outcome.ground_truth);
    outcome.error_km = geo.km;
    outcome.fallback_used = geo.fallback_used;
    outcome.levels_hit = bucket(geo.km);
}

/// Runs the full pipeline for one available item. Model and image failures
/// mark the outcome errored; configuration errors propagate.
inline EvalOutcome evaluate_item(const BenchmarkItem& item, std::span<const float> query_embedding,
                                 const Index& index, const MllmClient& client, const EvalConfig& config,
                                 const TemplateRegistry& templates = default_templates()) {
    if (item.status == ItemStatus::kMissing) {
        throw Error(ErrorCode::kInvalidArgument, "item " + item.id + " has no image and cannot be evaluated");
    }
    EvalOutcome outcome;
    outcome.item_id = item.id;
    outcome.ground_truth = item.ground_truth;
    outcome.trace.template_id = config.template_id;

    RetrievalResult retrieval;
    retrieval.k_similar = config.k_similar;
    retrieval.k_dissimilar = config.k_dissimilar;
    auto lists = index.search_both(query_embedding, config.k_similar, config.k_dissimilar, config.nprobe);
    retrieval.similar = std::move(lists.similar);
    retrieval.dissimilar = std::move(lists.dissimilar);
    for (const auto& n : retrieval.similar) outcome.trace.similar_ids.push_back(n.id);
    for (const auto& n : retrieval.dissimilar) outcome.trace.dissimilar_ids.push_back(n.id);

    ImageAttachment image;
    try {
        image = load_image(item.image_path);
    } catch (const Error& e) {
        outcome.status = OutcomeStatus::kErrored;
        outcome.error = e.what();
        return outcome;
    }
    if (image.bytes.empty()) {
        outcome.status = OutcomeStatus::kErrored;
        outcome.error = "image file is empty";
        return outcome;
    }
    const auto bundle = build_prompt(std::move(image), item.id, retrieval, config.template_id, templates);
    outcome.trace.prompt_sha256 = sha256_hex(bundle.text);

    ModelResponse response;
    try {
        response = client.complete(bundle);
    } catch (const ModelError& e) {
        outcome.status = OutcomeStatus::kErrored;
        outcome.error = e.what();
        outcome.trace.attempts = e.attempts();
        return outcome;
    }
    outcome.trace.raw_response = response.raw_text;
    outcome.trace.attempts = response.attempt_count;
    outcome.trace.latency_ms = response.latency_ms;

    score_prediction(outcome, parse_coordinates(response.raw_text));
    return outcome;
}

inline EvalOutcome missing_outcome(const BenchmarkItem& item) {
    EvalOutcome o;
    o.item_id = item.id;
    o.status = OutcomeStatus::kMissing;
    o.ground_truth = item.ground_truth;
    return o;
}

/// Folds outcomes into a report. Percentages are over scored items; parse
/// failures are scored items that hit no level.
inline AccuracyReport aggregate(std::span<const EvalOutcome> outcomes, std::string dataset_name,
                                Provenance provenance = {}) {
    AccuracyReport r;
    r.dataset_name = std::move(dataset_name);
    r.provenance = std::move(provenance);
    r.n_total = outcomes.size();
    for (const auto& o : outcomes) {
        switch (o.status) {
            case OutcomeStatus::kMissing: ++r.n_missing; continue;
            case OutcomeStatus::kErrored: ++r.n_errored; continue;
            case OutcomeStatus::kScored: break;
        }
        ++r.n_scored;
        if (o.parse_failed) ++r.n_parse_failed;
        if (o.fallback_used) ++r.n_fallback;
        for (auto level : kAccuracyLevels) {
            if (o.levels_hit.contains(level)) ++r.hits[static_cast<std::size_t>(level)];
        }
    }
    r.finalize_percentages();
    return r;
}

inline nlohmann::ordered_json coord_json(const std::optional<GeoCoord>& c) {
    if (!c) return nullptr;
    return nlohmann::ordered_json::array({c->lat, c->lon});
}

/// One outcome-file record. Wall-clock latency is left out so that repeated
/// runs produce identical files.
inline std::string outcome_record(const EvalOutcome& o, bool include_raw_response) {
    nlohmann::ordered_json j;
    j["item_id"] = o.item_id;
    j["status"] = to_string(o.status);
    j["ground_truth"] = coord_json(o.ground_truth);
    j["predicted"] = coord_json(o.predicted);
    j["error_km"] = o.error_km ? nlohmann::ordered_json(*o.error_km) : nlohmann::ordered_json(nullptr);
    auto levels = nlohmann::ordered_json::array();
    for (auto level : kAccuracyLevels) {
        if (o.levels_hit.contains(level)) levels.push_back(level_name(level));
    }
    j["levels"] = levels;
    j["parse_failed"] = o.parse_failed;
    j["fallback_used"] = o.fallback_used;
    if (o.status != OutcomeStatus::kMissing) {
        j["template_id"] = o.trace.template_id;
        j["similar_ids"] = o.trace.similar_ids;
        j["dissimilar_ids"] = o.trace.dissimilar_ids;
        j["prompt_sha256"] = o.trace.prompt_sha256;
        j["attempts"] = o.trace.attempts;
        if (include_raw_response) j["raw_response"] = o.trace.raw_response;
    }
    if (o.status == OutcomeStatus::kErrored) j["error"] = o.error;
    return j.dump();
}

inline std::string render_outcomes(std::span<const EvalOutcome> outcomes, bool include_raw_responses) {
    std::string out;
    for (const auto& o : outcomes) {
        out += outcome_record(o, include_raw_responses);
        out += '\n';
    }
    return out;
}

struct EvalRun {
    std::vector<EvalOutcome> outcomes;  // manifest order
    AccuracyReport report;
};

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// SHA-256 over the settings that determine a run's outputs (API key excluded).
inline std::string config_hash(const EvalConfig& eval, const ModelConfig& model, std::string_view template_text) {
    nlohmann::ordered_json j;
    j["k_similar"] = eval.k_similar;
    j["k_dissimilar"] = eval.k_dissimilar;
    j["template_id"] = eval.template_id;
    j["template_sha256"] = sha256_hex(template_text);
    j["nprobe"] = eval.nprobe ? nlohmann::ordered_json(*eval.nprobe) : nlohmann::ordered_json(nullptr);
    j["model_name"] = model.model_name;
    j["base_url"] = model.base_url;
    j["temperature"] = model.temperature;
    j["top_p"] = model.top_p;
    j["max_tokens"] = model.max_tokens;
    return sha256_hex(j.dump());
}

/// Evaluates every available manifest item with at most
/// config.max_in_flight concurrent model calls. `query_embeddings` row i is
/// the embedding of manifest item i.
inline EvalRun evaluate_dataset(const Manifest& manifest, const VectorBlob& query_embeddings, const Index& index,
                                const MllmClient& client, const EvalConfig& config,
                                const TemplateRegistry& templates = default_templates(),
                                std::string index_checksum = {}) {
    config.validate();
    const auto& template_text = templates.get(config.template_id);
    if (query_embeddings.count != manifest.size()) {
        throw Error(ErrorCode::kCountMismatch, "query embeddings hold " + std::to_string(query_embeddings.count) +
                                                   " rows for a manifest of " + std::to_string(manifest.size()) +
                                                   " items");
    }
    if (!manifest.items.empty() && query_embeddings.dimension != index.dimension()) {
        throw Error(ErrorCode::kDimensionMismatch, "query embeddings have dimension " +
                                                       std::to_string(query_embeddings.dimension) +
                                                       ", index has " + std::to_string(index.dimension()));
    }

    EvalRun run;
    run.outcomes.resize(manifest.size());
    std::vector<std::size_t> work;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        if (manifest.items[i].status == ItemStatus::kMissing) {
            run.outcomes[i] = missing_outcome(manifest.items[i]);
        } else {
            work.push_back(i);
        }
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr fatal;
    std::mutex fatal_mu;
    auto worker = [&] {
        for (;;) {
            const auto n = next.fetch_add(1);
            if (n >= work.size()) return;
            const auto i = work[n];
            try {
                run.outcomes[i] = evaluate_item(manifest.items[i], query_embeddings.row(i), index, client, config,
                                                templates);
            } catch (...) {
                std::lock_guard lock(fatal_mu);
                if (!fatal) fatal = std::current_exception();
                next.store(work.size());
                return;
            }
        }
    };
    const auto n_threads = std::min(config.max_in_flight, work.size());
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
    if (n_threads > 0) worker();
    for (auto& t : threads) t.join();
    if (fatal) std::rethrow_exception(fatal);

    Provenance prov;
    prov.template_id = config.template_id;
    prov.model_name = client.config().model_name;
    prov.k_similar = config.k_similar;
    prov.k_dissimilar = config.k_dissimilar;
    prov.index_checksum = std::move(index_checksum);
    prov.config_hash = config_hash(config, client.config(), template_text);
    prov.transport = std::string(to_string(client.transport_kind()));
    prov.generated_at = utc_timestamp();
    run.report = aggregate(run.outcomes, config.dataset_name, std::move(prov));
    return run;
}

/// CRC32 trailer of an index file as 8 hex digits.
inline std::string index_file_checksum(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
    if (in.tellg() < 4) throw Error(ErrorCode::kTruncated, "index file shorter than its checksum");
    in.seekg(-4, std::ios::end);
    std::uint32_t crc = 0;
    in.read(reinterpret_cast<char*>(&crc), 4);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08x", crc);
    return buf;
}

}  // namespace georag
