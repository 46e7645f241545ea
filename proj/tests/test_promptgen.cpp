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

#include <gtest/gtest.h>

#include <random>

#include "georag/coordparse.hpp"
#include "georag/promptgen.hpp"
#include "test_support.hpp"

using namespace georag;
using namespace georag::testing;

namespace {

ImageAttachment jpeg() { return {{0xFF, 0xD8, 0xFF, 0xE0}, "image/jpeg"}; }

RetrievalResult make_retrieval(std::size_t n_similar, std::size_t n_dissimilar, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    RetrievalResult r;
    for (std::size_t i = 0; i < n_similar; ++i) r.similar.push_back({i, random_coord(rng), 0.1 * i});
    for (std::size_t i = 0; i < n_dissimilar; ++i) {
        r.dissimilar.push_back({100 + i, random_coord(rng), 10.0 - 0.1 * i});
    }
    return r;
}

// Lines of `text` that consist of exactly one rendered coordinate.
std::vector<GeoCoord> coordinate_lines(const std::string& text) {
    std::vector<GeoCoord> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const auto line = text.substr(pos, end - pos);
        const auto p = parse_coordinates(line);
        if (p.coord && p.matched_span->begin == 0 && p.matched_span->end == line.size()) out.push_back(*p.coord);
        pos = end + 1;
    }
    return out;
}

}  // namespace

TEST(RenderCoord, SixDecimals) {
    EXPECT_EQ(render_coord({48.8566, 2.3522}), "48.856600, 2.352200");
    EXPECT_EQ(render_coord({-33.9, -151.25}), "-33.900000, -151.250000");
}

TEST(BuildPrompt, SixteenPlusSixteenGivesThirtyTwoCoordinates) {
    const auto r = make_retrieval(16, 16, 1);
    const auto b = build_prompt(jpeg(), "q1", r);
    EXPECT_EQ(coordinate_lines(b.text).size(), 32u);
    EXPECT_EQ(parse_coordinates(b.text).candidates_seen, 32u);
    EXPECT_EQ(b.template_id, "contrastive-v1");
    EXPECT_EQ(b.image_id, "q1");
    EXPECT_EQ(b.image.media_type, "image/jpeg");
}

TEST(BuildPrompt, OrderingSurvivesReparse) {
    const auto r = make_retrieval(16, 16, 2);
    const auto lines = coordinate_lines(build_prompt(jpeg(), "q", r).text);
    ASSERT_EQ(lines.size(), 32u);
    for (std::size_t i = 0; i < 16; ++i) {
        EXPECT_NEAR(lines[i].lat, r.similar[i].coord.lat, 1e-6);
        EXPECT_NEAR(lines[i].lon, r.similar[i].coord.lon, 1e-6);
        EXPECT_NEAR(lines[16 + i].lat, r.dissimilar[i].coord.lat, 1e-6);
        EXPECT_NEAR(lines[16 + i].lon, r.dissimilar[i].coord.lon, 1e-6);
    }
}

TEST(BuildPrompt, NoNeighborsGivesInstructionOnly) {
    const auto b = build_prompt(jpeg(), "q", make_retrieval(0, 0, 3));
    EXPECT_EQ(parse_coordinates(b.text).candidates_seen, 0u);
    EXPECT_EQ(b.text.find("{SIMILAR_BLOCK}"), std::string::npos);
    EXPECT_EQ(b.text.find("Likely nearby"), std::string::npos);
    EXPECT_NE(b.text.find("latitude, longitude"), std::string::npos);
}

TEST(BuildPrompt, OneSidedRetrievalDropsOnlyThatBlock) {
    const auto b = build_prompt(jpeg(), "q", make_retrieval(3, 0, 4));
    EXPECT_EQ(coordinate_lines(b.text).size(), 3u);
    EXPECT_NE(b.text.find("Likely nearby"), std::string::npos);
    EXPECT_EQ(b.text.find("Unlikely"), std::string::npos);
}

TEST(BuildPrompt, Deterministic) {
    const auto r = make_retrieval(16, 16, 5);
    EXPECT_EQ(build_prompt(jpeg(), "q", r).text, build_prompt(jpeg(), "q", r).text);
}

TEST(BuildPrompt, NoDistancesInText) {
    auto r = make_retrieval(2, 2, 6);
    r.similar[0].distance = 0.0123456789;
    const auto b = build_prompt(jpeg(), "q", r);
    EXPECT_EQ(b.text.find("0123456789"), std::string::npos);
}

TEST(BuildPrompt, Errors) {
    const auto r = make_retrieval(2, 2, 7);
    try {
        build_prompt(jpeg(), "q", r, "no-such-template");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kUnknownTemplate);
    }
    EXPECT_THROW(build_prompt(ImageAttachment{}, "q", r), Error);

    auto unordered = r;
    std::swap(unordered.similar[0], unordered.similar[1]);
    EXPECT_THROW(build_prompt(jpeg(), "q", unordered), Error);

    auto too_many = make_retrieval(3, 0, 8);
    too_many.k_similar = 2;
    EXPECT_THROW(build_prompt(jpeg(), "q", too_many), Error);
}

TEST(TemplateRegistry, DirectoryOverridesById) {
    TempDir dir;
    write_text(dir / "contrastive-v1.txt", "Near:\n{SIMILAR_BLOCK}\n\nFar:\n{DISSIMILAR_BLOCK}\n\nAnswer.");
    write_text(dir / "terse.txt", "{SIMILAR_BLOCK}\n\n{DISSIMILAR_BLOCK}");
    write_text(dir / "notes.md", "ignored");
    auto reg = TemplateRegistry::with_defaults();
    reg.load_directory(dir.path());
    EXPECT_TRUE(reg.contains("terse"));
    EXPECT_FALSE(reg.contains("notes"));
    const auto b = build_prompt(jpeg(), "q", make_retrieval(1, 1, 9), "contrastive-v1", reg);
    EXPECT_EQ(b.text.rfind("Near:\n", 0), 0u);
    EXPECT_EQ(coordinate_lines(b.text).size(), 2u);
}

TEST(TemplateRegistry, RejectsTemplatesWithoutPlaceholders) {
    TemplateRegistry reg;
    EXPECT_THROW(reg.add("bad", "no placeholders here"), Error);
}

TEST(MediaType, FromExtension) {
    EXPECT_EQ(media_type_for("a/b.JPG"), "image/jpeg");
    EXPECT_EQ(media_type_for("x.png"), "image/png");
    EXPECT_EQ(media_type_for("x.webp"), "image/webp");
    EXPECT_EQ(media_type_for("x"), "application/octet-stream");
}
