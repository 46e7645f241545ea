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

// Augmented prompt construction: the query image plus the coordinates of the
// most and least similar gallery entries, rendered through a named template.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "georag/binary_io.hpp"
#include "georag/error.hpp"
#include "georag/geodesy.hpp"
#include "georag/vecstore.hpp"

namespace georag {

inline constexpr std::size_t kDefaultKSimilar = 16;
inline constexpr std::size_t kDefaultKDissimilar = 16;
inline constexpr std::string_view kDefaultTemplateId = "contrastive-v1";
inline constexpr std::string_view kSimilarPlaceholder = "{SIMILAR_BLOCK}";
inline constexpr std::string_view kDissimilarPlaceholder = "{DISSIMILAR_BLOCK}";

struct RetrievalResult {
    std::vector<Neighbor> similar;     // ascending distance
    std::vector<Neighbor> dissimilar;  // descending distance
    std::size_t k_similar = kDefaultKSimilar;
    std::size_t k_dissimilar = kDefaultKDissimilar;

    void validate() const {
        if (similar.size() > k_similar || dissimilar.size() > k_dissimilar) {
            throw Error(ErrorCode::kInvalidArgument, "retrieval holds more neighbors than requested");
        }
        for (std::size_t i = 1; i < similar.size(); ++i) {
            if (similar[i].distance < similar[i - 1].distance) {
                throw Error(ErrorCode::kInvalidArgument, "similar neighbors not in ascending distance order");
            }
        }
        for (std::size_t i = 1; i < dissimilar.size(); ++i) {
            if (dissimilar[i].distance > dissimilar[i - 1].distance) {
                throw Error(ErrorCode::kInvalidArgument, "dissimilar neighbors not in descending distance order");
            }
        }
    }
};

struct ImageAttachment {
    std::vector<std::uint8_t> bytes;
    std::string media_type = "image/jpeg";
};

inline std::string media_type_for(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".png") return "image/png";
    if (ext == ".webp") return "image/webp";
    if (ext == ".gif") return "image/gif";
    return "application/octet-stream";
}

inline ImageAttachment load_image(const std::filesystem::path& path) {
    return {io::read_file(path), media_type_for(path)};
}

struct PromptBundle {
    std::string text;
    ImageAttachment image;
    std::string image_id;
    std::string template_id;
};

/// "lat, lon" with six fractional digits.
inline std::string render_coord(const GeoCoord& c) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f, %.6f", c.lat, c.lon);
    return buf;
}

inline constexpr std::string_view kContrastiveV1 =
    "You are an expert in image geolocation. Estimate where the attached photo was taken.\n"
    "\n"
    "Likely nearby locations. These are the capture locations of the most visually similar images in a "
    "geo-tagged reference database, most similar first:\n"
    "{SIMILAR_BLOCK}\n"
    "\n"
    "Unlikely locations. These are the capture locations of the least visually similar images in the same "
    "database, least similar first:\n"
    "{DISSIMILAR_BLOCK}\n"
    "\n"
    "Weigh the visual content of the photo against any reference locations listed above.\n"
    "Give your final answer on the last line as one latitude and longitude pair in decimal degrees, in the "
    "form: latitude, longitude\n";

/// Templates by id. A paragraph (blank-line separated) whose placeholder
/// expands to an empty block is dropped from the rendered prompt.
class TemplateRegistry {
public:
    static TemplateRegistry with_defaults() {
        TemplateRegistry reg;
        reg.add(std::string(kDefaultTemplateId), std::string(kContrastiveV1));
        return reg;
    }

    void add(std::string id, std::string text) {
        if (text.find(kSimilarPlaceholder) == std::string::npos ||
            text.find(kDissimilarPlaceholder) == std::string::npos) {
            throw Error(ErrorCode::kMalformed, "template \"" + id + "\" lacks " + std::string(kSimilarPlaceholder) +
                                                   " or " + std::string(kDissimilarPlaceholder));
        }
        templates_[std::move(id)] = std::move(text);
    }

    /// Registers every `<id>.txt` in `dir`, replacing templates of the same id.
    void load_directory(const std::filesystem::path& dir) {
        if (!std::filesystem::is_directory(dir)) {
            throw Error(ErrorCode::kIo, "template directory " + dir.string() + " not found");
        }
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) add(f.stem().string(), io::read_text_file(f));
    }

    const std::string& get(std::string_view id) const {
        auto it = templates_.find(std::string(id));
        if (it == templates_.end()) {
            throw Error(ErrorCode::kUnknownTemplate, "no template registered as \"" + std::string(id) + "\"");
        }
        return it->second;
    }

    bool contains(std::string_view id) const { return templates_.count(std::string(id)) != 0; }

private:
    std::map<std::string, std::string> templates_;
};

inline const TemplateRegistry& default_templates() {
    static const TemplateRegistry reg = TemplateRegistry::with_defaults();
    return reg;
}

namespace detail {

inline std::string coord_block(const std::vector<Neighbor>& neighbors) {
    std::string block;
    for (const auto& n : neighbors) {
        if (!block.empty()) block += '\n';
        block += render_coord(n.coord);
    }
    return block;
}

inline std::string expand_template(std::string_view tmpl, const std::string& similar, const std::string& dissimilar) {
    std::string out;
    std::size_t pos = 0;
    while (pos <= tmpl.size()) {
        auto end = tmpl.find("\n\n", pos);
        const bool last = end == std::string_view::npos;
        auto para = std::string(tmpl.substr(pos, last ? std::string_view::npos : end - pos));
        bool drop = false;
        for (auto [ph, block] : {std::pair<std::string_view, const std::string*>{kSimilarPlaceholder, &similar},
                                 {kDissimilarPlaceholder, &dissimilar}}) {
            for (auto at = para.find(ph); at != std::string::npos; at = para.find(ph, at + block->size())) {
                if (block->empty()) drop = true;
                para.replace(at, ph.size(), *block);
            }
        }
        if (!drop) {
            if (!out.empty()) out += "\n\n";
            out += para;
        }
        if (last) break;
        pos = end + 2;
    }
    return out;
}

}  // namespace detail

inline PromptBundle build_prompt(ImageAttachment image, std::string image_id, const RetrievalResult& retrieval,
                                 std::string_view template_id = kDefaultTemplateId,
                                 const TemplateRegistry& templates = default_templates()) {
    if (image.bytes.empty()) throw Error(ErrorCode::kInvalidArgument, "image attachment is empty");
    retrieval.validate();
    const auto& tmpl = templates.get(template_id);
    PromptBundle bundle;
    bundle.text = detail::expand_template(tmpl, detail::coord_block(retrieval.similar),
                                          detail::coord_block(retrieval.dissimilar));
    bundle.image = std::move(image);
    bundle.image_id = std::move(image_id);
    bundle.template_id = std::string(template_id);
    return bundle;
}

}  // namespace georag
