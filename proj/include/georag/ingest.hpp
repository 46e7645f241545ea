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

// Loaders for precomputed embeddings, gallery metadata and benchmark
// manifests.
//
// Vector blob layout (little-endian): "GVEC", version u32, dimension u32,
// count u64, then count x dimension f32 values, row-major.
// Metadata and manifests are UTF-8 with one JSON object per line.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "georag/binary_io.hpp"
#include "georag/error.hpp"
#include "georag/geodesy.hpp"
#include "georag/vecstore.hpp"

namespace georag {

inline constexpr char kVectorMagic[4] = {'G', 'V', 'E', 'C'};
inline constexpr std::uint32_t kVectorFormatVersion = 1;
inline constexpr std::size_t kVectorHeaderBytes = 20;

struct VectorBlob {
    std::uint32_t dimension = 0;
    std::uint64_t count = 0;
    std::vector<float> data;

    std::span<const float> row(std::size_t i) const { return {data.data() + i * dimension, dimension}; }
};

inline std::vector<std::uint8_t> serialize_vectors(const VectorBlob& blob) {
    if (blob.data.size() != blob.count * blob.dimension) {
        throw Error(ErrorCode::kCountMismatch, "blob holds " + std::to_string(blob.data.size()) +
                                                   " floats, expected count x dimension = " +
                                                   std::to_string(blob.count * blob.dimension));
    }
    io::ByteWriter w;
    w.put_raw({kVectorMagic, 4});
    w.put<std::uint32_t>(kVectorFormatVersion);
    w.put<std::uint32_t>(blob.dimension);
    w.put<std::uint64_t>(blob.count);
    w.put_span<float>(blob.data);
    return std::move(w.bytes());
}

inline VectorBlob parse_vectors(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    if (bytes.size() < 4 || r.get_raw(4) != std::string_view(kVectorMagic, 4)) {
        throw Error(ErrorCode::kBadMagic, "vector file does not start with GVEC");
    }
    const auto version = r.get<std::uint32_t>();
    if (version != kVectorFormatVersion) {
        throw Error(ErrorCode::kUnsupportedVersion, "vector format version " + std::to_string(version));
    }
    VectorBlob blob;
    blob.dimension = r.get<std::uint32_t>();
    blob.count = r.get<std::uint64_t>();
    if (blob.dimension == 0) throw Error(ErrorCode::kMalformed, "vector dimension is zero");
    const long double expected = static_cast<long double>(blob.count) * blob.dimension * 4;
    if (expected > static_cast<long double>(r.remaining())) {
        throw Error(ErrorCode::kTruncated, "header promises " + std::to_string(blob.count) + " rows of " +
                                               std::to_string(blob.dimension) + " floats, only " +
                                               std::to_string(r.remaining()) + " payload bytes present");
    }
    if (expected < static_cast<long double>(r.remaining())) {
        throw Error(ErrorCode::kMalformed, "vector file has trailing bytes after the last row");
    }
    blob.data.resize(static_cast<std::size_t>(blob.count) * blob.dimension);
    r.get_into<float>(blob.data);
    return blob;
}

inline VectorBlob load_vectors(const std::filesystem::path& path) { return parse_vectors(io::read_file(path)); }

inline void save_vectors(const std::filesystem::path& path, const VectorBlob& blob) {
    io::write_file(path, serialize_vectors(blob));
}

struct MetadataRow {
    std::uint64_t id = 0;
    double lat = 0.0;
    double lon = 0.0;
    std::string source;
};

namespace detail {

template <typename Fn>
void for_each_json_line(std::string_view text, std::string_view what, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::kMalformed,
                        std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!obj.is_object()) {
            throw Error(ErrorCode::kMalformed,
                        std::string(what) + " line " + std::to_string(line_no) + ": expected an object");
        }
        try {
            fn(line_no, obj);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::kMalformed,
                        std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

inline void require_fields(const nlohmann::json& obj, std::initializer_list<const char*> fields,
                           std::string_view what, std::size_t line_no) {
    for (const char* f : fields) {
        if (!obj.contains(f)) {
            throw Error(ErrorCode::kMalformed, std::string(what) + " line " + std::to_string(line_no) +
                                                   ": missing field \"" + f + "\"");
        }
    }
}

}  // namespace detail

inline std::vector<MetadataRow> parse_metadata(std::string_view text) {
    std::vector<MetadataRow> rows;
    std::unordered_set<std::uint64_t> seen;
    detail::for_each_json_line(text, "metadata", [&](std::size_t line_no, const nlohmann::json& obj) {
        detail::require_fields(obj, {"id", "lat", "lon", "source"}, "metadata", line_no);
        if (!obj.at("id").is_number_unsigned()) {
            throw Error(ErrorCode::kMalformed,
                        "metadata line " + std::to_string(line_no) + ": id must be a non-negative integer");
        }
        MetadataRow row;
        row.id = obj.at("id").get<std::uint64_t>();
        row.lat = obj.at("lat").get<double>();
        row.lon = obj.at("lon").get<double>();
        row.source = obj.at("source").get<std::string>();
        if (!is_valid(GeoCoord{row.lat, row.lon})) {
            throw Error(ErrorCode::kOutOfRange, "metadata line " + std::to_string(line_no) + ": coordinate " +
                                                    describe({row.lat, row.lon}) + " out of range");
        }
        if (!seen.insert(row.id).second) {
            throw Error(ErrorCode::kDuplicateId,
                        "metadata line " + std::to_string(line_no) + ": id " + std::to_string(row.id) + " repeated");
        }
        rows.push_back(std::move(row));
    });
    return rows;
}

inline std::vector<MetadataRow> load_metadata(const std::filesystem::path& path) {
    return parse_metadata(io::read_text_file(path));
}

struct AssembleOptions {
    bool normalize = false;
};

/// Zips metadata row i with vector row i.
inline std::vector<GalleryRecord> assemble_gallery(const VectorBlob& blob, std::span<const MetadataRow> rows,
                                                   AssembleOptions options = {}) {
    if (blob.count != rows.size()) {
        throw Error(ErrorCode::kCountMismatch, "vector file has " + std::to_string(blob.count) +
                                                   " rows but metadata has " + std::to_string(rows.size()));
    }
    std::vector<GalleryRecord> records;
    records.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto v = blob.row(i);
        GalleryRecord rec{rows[i].id, EmbeddingVector(v.begin(), v.end()), {rows[i].lat, rows[i].lon},
                          source_from_string(rows[i].source)};
        if (options.normalize) {
            double norm_sq = 0.0;
            for (float x : rec.embedding) norm_sq += static_cast<double>(x) * x;
            // A zero vector has no direction; it is kept as is.
            if (norm_sq > 0.0) {
                const double inv = 1.0 / std::sqrt(norm_sq);
                for (float& x : rec.embedding) x = static_cast<float>(x * inv);
            }
        }
        records.push_back(std::move(rec));
    }
    return records;
}

enum class ItemStatus : std::uint8_t { kAvailable, kMissing };

struct BenchmarkItem {
    std::string id;
    std::filesystem::path image_path;
    GeoCoord ground_truth;
    ItemStatus status = ItemStatus::kAvailable;
};

struct Manifest {
    std::vector<BenchmarkItem> items;

    std::size_t size() const { return items.size(); }
    std::size_t n_missing() const {
        return static_cast<std::size_t>(std::count_if(items.begin(), items.end(), [](const auto& it) {
            return it.status == ItemStatus::kMissing;
        }));
    }
    std::size_t n_available() const { return size() - n_missing(); }
    /// Fraction of items with a readable image, in [0, 1]; 1 for an empty manifest.
    double coverage() const { return items.empty() ? 1.0 : static_cast<double>(n_available()) / size(); }
};

using LogSink = std::function<void(std::string_view)>;

inline LogSink stderr_log() {
    return [](std::string_view msg) { std::clog << msg << '\n'; };
}

/// Parses a manifest. Relative image paths resolve against `base_dir`.
/// Items whose image cannot be opened are marked missing and reported to
/// `log`; only malformed lines are errors.
inline Manifest parse_benchmark_manifest(std::string_view text, const std::filesystem::path& base_dir,
                                         const LogSink& log = stderr_log()) {
    Manifest manifest;
    std::unordered_set<std::string> seen;
    detail::for_each_json_line(text, "manifest", [&](std::size_t line_no, const nlohmann::json& obj) {
        detail::require_fields(obj, {"id", "image_path", "lat", "lon"}, "manifest", line_no);
        BenchmarkItem item;
        const auto& id = obj.at("id");
        item.id = id.is_string() ? id.get<std::string>() : id.dump();
        item.image_path = obj.at("image_path").get<std::string>();
        if (item.image_path.is_relative()) item.image_path = base_dir / item.image_path;
        item.ground_truth = {obj.at("lat").get<double>(), obj.at("lon").get<double>()};
        if (!is_valid(item.ground_truth)) {
            throw Error(ErrorCode::kMalformed, "manifest line " + std::to_string(line_no) +
                                                   ": ground truth " + describe(item.ground_truth) +
                                                   " out of range");
        }
        if (!seen.insert(item.id).second) {
            throw Error(ErrorCode::kMalformed,
                        "manifest line " + std::to_string(line_no) + ": item id \"" + item.id + "\" repeated");
        }
        std::ifstream probe(item.image_path, std::ios::binary);
        if (!probe || !std::filesystem::is_regular_file(item.image_path)) {
            item.status = ItemStatus::kMissing;
            if (log) log("manifest: item " + item.id + " missing image " + item.image_path.string());
        }
        manifest.items.push_back(std::move(item));
    });
    if (log && manifest.n_missing() > 0) {
        log("manifest: " + std::to_string(manifest.n_missing()) + " of " + std::to_string(manifest.size()) +
            " items missing, coverage " + std::to_string(manifest.coverage() * 100.0) + "%");
    }
    return manifest;
}

inline Manifest load_benchmark_manifest(const std::filesystem::path& path, const LogSink& log = stderr_log()) {
    return parse_benchmark_manifest(io::read_text_file(path), path.parent_path(), log);
}

}  // namespace georag
