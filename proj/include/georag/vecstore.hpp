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

// Persistent L2 vector index over geo-tagged gallery embeddings.
//
// The index answers two queries: the k nearest records (optionally through an
// inverted-file partition) and the k farthest records (always an exact scan).
// Distances are accumulated in 32-bit floats in component order and the final
// square root is taken in double precision. Equal distances are ordered by
// ascending record id.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "georag/binary_io.hpp"
#include "georag/error.hpp"
#include "georag/geodesy.hpp"
#include "georag/hashing.hpp"

namespace georag {

enum class SourceTag : std::uint8_t { kEmp16, kOsv5m, kOther };

inline std::string_view to_string(SourceTag tag) {
    switch (tag) {
        case SourceTag::kEmp16: return "EMP16";
        case SourceTag::kOsv5m: return "OSV5M";
        case SourceTag::kOther: return "OTHER";
    }
    return "OTHER";
}

inline SourceTag source_from_string(std::string_view s) {
    if (s == "EMP16") return SourceTag::kEmp16;
    if (s == "OSV5M") return SourceTag::kOsv5m;
    return SourceTag::kOther;
}

using EmbeddingVector = std::vector<float>;

struct GalleryRecord {
    std::uint64_t id = 0;
    EmbeddingVector embedding;
    GeoCoord coord;
    SourceTag source = SourceTag::kOther;
};

enum class IndexMode : std::uint8_t { kFlatExact = 0, kIvf = 1 };

inline std::string_view to_string(IndexMode mode) {
    return mode == IndexMode::kIvf ? "IVF" : "FLAT_EXACT";
}

inline constexpr std::uint32_t kDefaultNprobe = 8;

struct IndexConfig {
    std::uint32_t dimension = 0;
    IndexMode mode = IndexMode::kFlatExact;
    std::uint32_t ivf_nlist = 64;
    std::uint32_t ivf_nprobe = kDefaultNprobe;
    std::uint32_t kmeans_iterations = 20;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (dimension == 0) throw Error(ErrorCode::kConfig, "index dimension must be positive");
        if (kmeans_iterations == 0) throw Error(ErrorCode::kConfig, "kmeans_iterations must be positive");
        if (mode == IndexMode::kIvf) {
            if (ivf_nlist == 0) throw Error(ErrorCode::kConfig, "ivf_nlist must be >= 1");
            if (ivf_nprobe == 0) throw Error(ErrorCode::kConfig, "ivf_nprobe must be >= 1");
            if (ivf_nprobe > ivf_nlist) {
                throw Error(ErrorCode::kConfig, "ivf_nprobe (" + std::to_string(ivf_nprobe) +
                                                    ") exceeds ivf_nlist (" + std::to_string(ivf_nlist) + ")");
            }
        }
    }
};

struct Neighbor {
    std::uint64_t id = 0;
    GeoCoord coord;
    double distance = 0.0;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct NeighborLists {
    std::vector<Neighbor> similar;     // ascending distance
    std::vector<Neighbor> dissimilar;  // descending distance
};

inline void check_dimensions(std::size_t a, std::size_t b) {
    if (a != b) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "vector lengths differ: " + std::to_string(a) + " vs " + std::to_string(b));
    }
}

inline void check_finite(std::span<const float> v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            throw Error(ErrorCode::kInvalidArgument,
                        "embedding component " + std::to_string(i) + " is not finite");
        }
    }
}

/// Squared L2 distance, 32-bit accumulation in component order. Callers are
/// responsible for matching lengths.
inline float l2_squared(std::span<const float> a, std::span<const float> b) noexcept {
    float acc = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const float diff = a[i] - b[i];
        acc += diff * diff;
    }
    return acc;
}

inline double l2_distance(std::span<const float> a, std::span<const float> b) {
    check_dimensions(a.size(), b.size());
    return std::sqrt(static_cast<double>(l2_squared(a, b)));
}

namespace detail {

struct ScoredRow {
    float dist_sq;
    std::uint64_t id;
    std::uint32_t row;
};

// Ordering for nearest queries: smaller distance first, then smaller id.
struct NearerFirst {
    bool operator()(const ScoredRow& x, const ScoredRow& y) const {
        return x.dist_sq < y.dist_sq || (x.dist_sq == y.dist_sq && x.id < y.id);
    }
};

// Ordering for farthest queries: larger distance first, then smaller id.
struct FartherFirst {
    bool operator()(const ScoredRow& x, const ScoredRow& y) const {
        return x.dist_sq > y.dist_sq || (x.dist_sq == y.dist_sq && x.id < y.id);
    }
};

// Bounded selection of the k best candidates under `Better`. The heap top is
// the worst retained candidate.
template <typename Better>
class TopK {
public:
    explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

    void offer(const ScoredRow& c) {
        if (k_ == 0) return;
        if (heap_.size() < k_) {
            heap_.push_back(c);
            std::push_heap(heap_.begin(), heap_.end(), better_);
        } else if (better_(c, heap_.front())) {
            std::pop_heap(heap_.begin(), heap_.end(), better_);
            heap_.back() = c;
            std::push_heap(heap_.begin(), heap_.end(), better_);
        }
    }

    std::vector<ScoredRow> take_sorted() && {
        std::sort(heap_.begin(), heap_.end(), better_);
        return std::move(heap_);
    }

private:
    std::size_t k_;
    Better better_;
    std::vector<ScoredRow> heap_;
};

}  // namespace detail

inline constexpr char kIndexMagic[4] = {'G', 'R', 'A', 'G'};
inline constexpr std::uint32_t kIndexFormatVersion = 1;

/// Immutable after construction; concurrent searches are safe.
class Index {
public:
    Index() = default;

    static Index build(std::span<const GalleryRecord> records, const IndexConfig& config) {
        config.validate();
        Index index;
        index.dimension_ = config.dimension;
        index.mode_ = config.mode;
        index.nprobe_ = config.ivf_nprobe;
        index.ids_.reserve(records.size());
        index.coords_.reserve(records.size());
        index.vectors_.reserve(records.size() * config.dimension);
        std::unordered_set<std::uint64_t> seen;
        seen.reserve(records.size());
        for (const auto& r : records) {
            if (r.embedding.size() != config.dimension) {
                throw Error(ErrorCode::kDimensionMismatch,
                            "record " + std::to_string(r.id) + " has length " +
                                std::to_string(r.embedding.size()) + ", index dimension is " +
                                std::to_string(config.dimension));
            }
            check_finite(r.embedding);
            validate(r.coord);
            if (!seen.insert(r.id).second) {
                throw Error(ErrorCode::kDuplicateId, "id " + std::to_string(r.id) + " appears more than once");
            }
            index.ids_.push_back(r.id);
            index.coords_.push_back(r.coord);
            index.vectors_.insert(index.vectors_.end(), r.embedding.begin(), r.embedding.end());
        }
        if (config.mode == IndexMode::kIvf) index.train_ivf(config);
        return index;
    }

    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    std::uint32_t dimension() const { return dimension_; }
    IndexMode mode() const { return mode_; }
    std::uint32_t nlist() const { return nlist_; }
    std::uint32_t default_nprobe() const { return nprobe_; }

    std::span<const std::uint64_t> ids() const { return ids_; }
    std::span<const GeoCoord> coords() const { return coords_; }
    std::span<const float> vectors() const { return vectors_; }
    std::span<const float> centroids() const { return centroids_; }
    std::span<const std::uint32_t> assignments() const { return assignments_; }
    const std::vector<std::vector<std::uint32_t>>& inverted_lists() const { return lists_; }

    std::span<const float> row(std::size_t i) const {
        return {vectors_.data() + i * dimension_, dimension_};
    }
    std::span<const float> centroid(std::size_t c) const {
        return {centroids_.data() + c * dimension_, dimension_};
    }

    /// Index of the centroid nearest to `v` (lowest index on ties).
    std::uint32_t nearest_centroid(std::span<const float> v) const {
        std::uint32_t best = 0;
        float best_d = std::numeric_limits<float>::infinity();
        for (std::uint32_t c = 0; c < nlist_; ++c) {
            const float d = l2_squared(v, centroid(c));
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        return best;
    }

    /// The min(k, size()) nearest records, ascending distance. IVF indexes scan
    /// only the `nprobe` nearest inverted lists (default: the build setting).
    std::vector<Neighbor> search_similar(std::span<const float> query, std::size_t k,
                                         std::optional<std::uint32_t> nprobe = std::nullopt) const {
        check_query(query, k);
        detail::TopK<detail::NearerFirst> top(std::min(k, size()));
        if (mode_ == IndexMode::kIvf && !empty()) {
            for (auto list : probe_lists(query, nprobe.value_or(nprobe_))) {
                for (auto r : lists_[list]) {
                    top.offer({l2_squared(query, row(r)), ids_[r], r});
                }
            }
        } else {
            for (std::uint32_t r = 0; r < size(); ++r) {
                top.offer({l2_squared(query, row(r)), ids_[r], r});
            }
        }
        return to_neighbors(std::move(top).take_sorted());
    }

    /// The min(k, size()) farthest records, descending distance. Always an
    /// exact scan, whatever the index mode.
    std::vector<Neighbor> search_dissimilar(std::span<const float> query, std::size_t k) const {
        check_query(query, k);
        detail::TopK<detail::FartherFirst> top(std::min(k, size()));
        for (std::uint32_t r = 0; r < size(); ++r) {
            top.offer({l2_squared(query, row(r)), ids_[r], r});
        }
        return to_neighbors(std::move(top).take_sorted());
    }

    /// Nearest and farthest lists together. A flat index computes each
    /// distance once and feeds both selections from the same scan.
    NeighborLists search_both(std::span<const float> query, std::size_t k_similar,
                              std::size_t k_dissimilar,
                              std::optional<std::uint32_t> nprobe = std::nullopt) const {
        if (mode_ == IndexMode::kIvf) {
            check_query(query, 1);
            NeighborLists out;
            if (k_similar > 0) out.similar = search_similar(query, k_similar, nprobe);
            if (k_dissimilar > 0) out.dissimilar = search_dissimilar(query, k_dissimilar);
            return out;
        }
        check_query(query, 1);
        detail::TopK<detail::NearerFirst> near(std::min(k_similar, size()));
        detail::TopK<detail::FartherFirst> far(std::min(k_dissimilar, size()));
        for (std::uint32_t r = 0; r < size(); ++r) {
            const detail::ScoredRow c{l2_squared(query, row(r)), ids_[r], r};
            near.offer(c);
            far.offer(c);
        }
        return {to_neighbors(std::move(near).take_sorted()), to_neighbors(std::move(far).take_sorted())};
    }

    std::vector<std::uint8_t> serialize() const {
        io::ByteWriter w;
        w.put_raw({kIndexMagic, 4});
        w.put<std::uint32_t>(kIndexFormatVersion);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(mode_));
        w.put<std::uint32_t>(dimension_);
        w.put<std::uint64_t>(size());
        w.put<std::uint32_t>(mode_ == IndexMode::kIvf ? nlist_ : 0);
        w.put_span<std::uint64_t>(ids_);
        for (const auto& c : coords_) {
            w.put<double>(c.lat);
            w.put<double>(c.lon);
        }
        w.put_span<float>(vectors_);
        if (mode_ == IndexMode::kIvf) {
            w.put_span<float>(centroids_);
            w.put_span<std::uint32_t>(assignments_);
        }
        w.put<std::uint32_t>(crc32(w.bytes()));
        return std::move(w.bytes());
    }

    /// Parses a serialized index. `nprobe` sets the default probe count for
    /// IVF searches, since the file format does not carry it.
    static Index deserialize(std::span<const std::uint8_t> bytes,
                             std::uint32_t nprobe = kDefaultNprobe) {
        io::ByteReader r(bytes);
        if (bytes.size() < 4 || r.get_raw(4) != std::string_view(kIndexMagic, 4)) {
            throw Error(ErrorCode::kBadMagic, "index file does not start with GRAG");
        }
        const auto version = r.get<std::uint32_t>();
        if (version != kIndexFormatVersion) {
            throw Error(ErrorCode::kUnsupportedVersion,
                        "index format version " + std::to_string(version) + " (supported: " +
                            std::to_string(kIndexFormatVersion) + ")");
        }
        Index index;
        const auto mode = r.get<std::uint8_t>();
        if (mode > 1) throw Error(ErrorCode::kMalformed, "unknown index mode byte " + std::to_string(mode));
        index.mode_ = static_cast<IndexMode>(mode);
        index.dimension_ = r.get<std::uint32_t>();
        const auto count = r.get<std::uint64_t>();
        const auto nlist = r.get<std::uint32_t>();
        if (index.dimension_ == 0) throw Error(ErrorCode::kMalformed, "index dimension is zero");
        if (index.mode_ == IndexMode::kIvf && nlist == 0) {
            throw Error(ErrorCode::kMalformed, "IVF index with nlist 0");
        }
        if (index.mode_ == IndexMode::kFlatExact && nlist != 0) {
            throw Error(ErrorCode::kMalformed, "flat index with nonzero nlist");
        }

        // Compare the promised payload against the actual size before
        // allocating anything proportional to `count`.
        const long double dim = index.dimension_;
        long double payload = static_cast<long double>(count) * (8 + 16 + 4 * dim) + 4;
        if (index.mode_ == IndexMode::kIvf) payload += nlist * 4 * dim + static_cast<long double>(count) * 4;
        if (payload > static_cast<long double>(r.remaining())) {
            throw Error(ErrorCode::kTruncated, "header promises " + std::to_string(count) +
                                                   " records but the file is too short");
        }

        const auto n = static_cast<std::size_t>(count);
        index.ids_.resize(n);
        r.get_into<std::uint64_t>(index.ids_);
        index.coords_.resize(n);
        for (auto& c : index.coords_) {
            c.lat = r.get<double>();
            c.lon = r.get<double>();
        }
        index.vectors_.resize(n * index.dimension_);
        r.get_into<float>(index.vectors_);
        if (index.mode_ == IndexMode::kIvf) {
            index.nlist_ = nlist;
            index.centroids_.resize(static_cast<std::size_t>(nlist) * index.dimension_);
            r.get_into<float>(index.centroids_);
            index.assignments_.resize(n);
            r.get_into<std::uint32_t>(index.assignments_);
        }
        const std::size_t body_end = r.position();
        const auto stored_crc = r.get<std::uint32_t>();
        if (r.remaining() != 0) {
            throw Error(ErrorCode::kMalformed, std::to_string(r.remaining()) + " trailing bytes after checksum");
        }
        const auto actual_crc = crc32(bytes.first(body_end));
        if (stored_crc != actual_crc) {
            throw Error(ErrorCode::kChecksumMismatch, "stored CRC32 " + std::to_string(stored_crc) +
                                                          ", computed " + std::to_string(actual_crc));
        }

        std::unordered_set<std::uint64_t> seen;
        seen.reserve(n);
        for (auto id : index.ids_) {
            if (!seen.insert(id).second) {
                throw Error(ErrorCode::kDuplicateId, "id " + std::to_string(id) + " repeated in index file");
            }
        }
        for (const auto& c : index.coords_) validate(c);
        for (auto a : index.assignments_) {
            if (a >= nlist) throw Error(ErrorCode::kMalformed, "assignment to list " + std::to_string(a));
        }
        if (index.mode_ == IndexMode::kIvf) {
            index.nprobe_ = std::min(nprobe, nlist);
            index.rebuild_lists();
        } else {
            index.nprobe_ = nprobe;
        }
        return index;
    }

    void save(const std::filesystem::path& path) const { io::write_file(path, serialize()); }

    static Index load(const std::filesystem::path& path, std::uint32_t nprobe = kDefaultNprobe) {
        return deserialize(io::read_file(path), nprobe);
    }

private:
    void check_query(std::span<const float> query, std::size_t k) const {
        if (query.size() != dimension_) {
            throw Error(ErrorCode::kDimensionMismatch, "query has length " + std::to_string(query.size()) +
                                                           ", index dimension is " +
                                                           std::to_string(dimension_));
        }
        if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
        check_finite(query);
    }

    std::vector<Neighbor> to_neighbors(std::vector<detail::ScoredRow> cands) const {
        std::vector<Neighbor> out;
        out.reserve(cands.size());
        for (const auto& c : cands) {
            out.push_back({c.id, coords_[c.row], std::sqrt(static_cast<double>(c.dist_sq))});
        }
        return out;
    }

    std::vector<std::uint32_t> probe_lists(std::span<const float> query, std::uint32_t nprobe) const {
        if (nprobe == 0) throw Error(ErrorCode::kInvalidArgument, "nprobe must be >= 1");
        detail::TopK<detail::NearerFirst> top(std::min(nprobe, nlist_));
        for (std::uint32_t c = 0; c < nlist_; ++c) {
            top.offer({l2_squared(query, centroid(c)), c, c});
        }
        std::vector<std::uint32_t> lists;
        for (const auto& cand : std::move(top).take_sorted()) lists.push_back(cand.row);
        return lists;
    }

    void assign_all() {
        for (std::size_t r = 0; r < size(); ++r) assignments_[r] = nearest_centroid(row(r));
    }

    // Lloyd's k-means seeded with `nlist` distinct records drawn by a partial
    // Fisher-Yates shuffle. Empty clusters keep their previous centroid.
    void train_ivf(const IndexConfig& config) {
        const std::size_t n = size();
        if (n < config.ivf_nlist) {
            throw Error(ErrorCode::kInvalidArgument, "IVF needs at least nlist=" + std::to_string(config.ivf_nlist) +
                                                         " records, got " + std::to_string(n));
        }
        nlist_ = config.ivf_nlist;
        const std::size_t d = dimension_;

        std::mt19937_64 rng(config.rng_seed);
        std::vector<std::uint32_t> perm(n);
        for (std::uint32_t i = 0; i < n; ++i) perm[i] = i;
        centroids_.resize(nlist_ * d);
        for (std::uint32_t c = 0; c < nlist_; ++c) {
            const std::size_t j = c + static_cast<std::size_t>(rng() % (n - c));
            std::swap(perm[c], perm[j]);
            auto src = row(perm[c]);
            std::copy(src.begin(), src.end(), centroids_.begin() + c * d);
        }

        assignments_.assign(n, 0);
        std::vector<double> sums(nlist_ * d);
        std::vector<std::size_t> counts(nlist_);
        for (std::uint32_t it = 0; it < config.kmeans_iterations; ++it) {
            assign_all();
            std::fill(sums.begin(), sums.end(), 0.0);
            std::fill(counts.begin(), counts.end(), 0);
            for (std::size_t r = 0; r < n; ++r) {
                const auto c = assignments_[r];
                ++counts[c];
                auto v = row(r);
                for (std::size_t j = 0; j < d; ++j) sums[c * d + j] += v[j];
            }
            for (std::uint32_t c = 0; c < nlist_; ++c) {
                if (counts[c] == 0) continue;
                for (std::size_t j = 0; j < d; ++j) {
                    centroids_[c * d + j] = static_cast<float>(sums[c * d + j] / static_cast<double>(counts[c]));
                }
            }
        }
        assign_all();
        rebuild_lists();
    }

    void rebuild_lists() {
        lists_.assign(nlist_, {});
        for (std::uint32_t r = 0; r < size(); ++r) lists_[assignments_[r]].push_back(r);
    }

    std::uint32_t dimension_ = 0;
    IndexMode mode_ = IndexMode::kFlatExact;
    std::uint32_t nlist_ = 0;
    std::uint32_t nprobe_ = kDefaultNprobe;
    std::vector<std::uint64_t> ids_;
    std::vector<GeoCoord> coords_;
    std::vector<float> vectors_;  // row-major, size() x dimension_
    std::vector<float> centroids_;
    std::vector<std::uint32_t> assignments_;
    std::vector<std::vector<std::uint32_t>> lists_;  // row indices per centroid, ascending
};

}  // namespace georag
