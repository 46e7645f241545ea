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

#include <cmath>

#include "georag/evalharness.hpp"
#include "test_support.hpp"

using namespace georag;
using namespace georag::testing;

namespace {

MllmClient mock_client(std::shared_ptr<Transport> t) {
    ModelConfig cfg;
    cfg.retry_backoff_s = 0.0;
    return MllmClient(cfg, std::move(t), [](std::chrono::milliseconds) {});
}

EvalOutcome scored_at(double km_north_of_equator_deg) {
    EvalOutcome o;
    o.ground_truth = {0.0, 0.0};
    ParseOutcome p;
    p.coord = GeoCoord{km_north_of_equator_deg, 0.0};
    score_prediction(o, p);
    return o;
}

}  // namespace

TEST(ScorePrediction, ExactHitCountsAtEveryLevel) {
    EvalOutcome o;
    o.ground_truth = {48.8566, 2.3522};
    score_prediction(o, parse_coordinates("48.8566, 2.3522"));
    ASSERT_TRUE(o.error_km);
    EXPECT_DOUBLE_EQ(*o.error_km, 0.0);
    EXPECT_EQ(o.levels_hit.size(), 5u);
    EXPECT_FALSE(o.parse_failed);
}

TEST(ScorePrediction, UnparseableOutputHitsNothing) {
    EvalOutcome o;
    o.ground_truth = {1, 2};
    score_prediction(o, parse_coordinates("somewhere in Europe"));
    EXPECT_TRUE(o.parse_failed);
    EXPECT_FALSE(o.error_km);
    EXPECT_TRUE(o.levels_hit.empty());
}

TEST(Aggregate, FourItemTable) {
    EvalFixture fx;
    const GeoCoord truth{10.0, 10.0};
    build_eval_fixture(fx, 4, 0, 50, 8, 11, {truth, truth, truth, truth});
    // About 0.44, 11, 110 and 2200 km from the truth.
    const std::vector<std::string> replies = {"10.004, 10.0", "10.1, 10.0", "11.0, 10.0", "30.0, 10.0"};
    std::map<std::string, std::string> by_sha;
    for (std::size_t i = 0; i < 4; ++i) by_sha[fx.image_sha256[i]] = replies[i];
    auto mock = std::make_shared<MockTransport>(std::vector<MockStep>{}, by_image_responder(by_sha, "no idea"));
    const auto client = mock_client(mock);
    EvalConfig cfg;
    cfg.dataset_name = "fixture";
    const auto run = evaluate_dataset(fx.manifest, fx.queries, fx.index, client, cfg);
    const auto& r = run.report;
    EXPECT_EQ(r.n_scored, 4u);
    EXPECT_EQ(r.pct(AccuracyLevel::kStreet), 25.0);
    EXPECT_EQ(r.pct(AccuracyLevel::kCity), 50.0);
    EXPECT_EQ(r.pct(AccuracyLevel::kRegion), 75.0);
    EXPECT_EQ(r.pct(AccuracyLevel::kCountry), 75.0);
    EXPECT_EQ(r.pct(AccuracyLevel::kContinent), 100.0);
    const auto md = render_report(r, ReportFormat::kMarkdown);
    EXPECT_NE(md.find("| fixture | 25.0 | 50.0 | 75.0 | 75.0 | 100.0 |"), std::string::npos) << md;
    EXPECT_EQ(r.provenance.transport, "MOCK");
    EXPECT_EQ(r.provenance.k_similar, 16u);
    EXPECT_EQ(r.provenance.parse_rule, "last-valid-pair");
    EXPECT_EQ(r.provenance.config_hash.size(), 64u);
}

TEST(Aggregate, RendersRowFromHitCounts) {
    // 1000 scored items: 232 within 1 km, 270 more within 25 km, and so on.
    std::vector<EvalOutcome> outcomes;
    const std::pair<std::size_t, double> bands[] = {
        {232, 0.001}, {270, 0.1}, {126, 1.0}, {152, 5.0}, {127, 15.0}, {93, 40.0}};
    for (auto [n, deg] : bands) {
        for (std::size_t i = 0; i < n; ++i) outcomes.push_back(scored_at(deg));
    }
    const auto r = aggregate(outcomes, "bench-a");
    EXPECT_EQ(r.n_scored, 1000u);
    const auto md = render_markdown(std::span<const AccuracyReport>(&r, 1));
    EXPECT_NE(md.find("| bench-a | 23.2 | 50.2 | 62.8 | 78.0 | 90.7 |"), std::string::npos) << md;
}

TEST(Aggregate, EmptyIsUndefined) {
    const auto r = aggregate({}, "empty");
    EXPECT_EQ(r.n_scored, 0u);
    EXPECT_FALSE(r.pct(AccuracyLevel::kStreet));
    const auto md = render_markdown(std::span<const AccuracyReport>(&r, 1));
    EXPECT_NE(md.find("| empty | — | — | — | — | — |"), std::string::npos);
    EXPECT_NE(render_csv(std::span<const AccuracyReport>(&r, 1)).find("empty,,,,,,0,0,0,0,0"), std::string::npos);
}

TEST(Aggregate, DenominatorExcludesMissingAndErrored) {
    std::vector<EvalOutcome> outcomes = {scored_at(0.0), scored_at(0.0), scored_at(50.0)};
    EvalOutcome missing;
    missing.status = OutcomeStatus::kMissing;
    EvalOutcome errored;
    errored.status = OutcomeStatus::kErrored;
    outcomes.push_back(missing);
    outcomes.push_back(errored);
    EvalOutcome unparsed;
    score_prediction(unparsed, parse_coordinates("no"));
    outcomes.push_back(unparsed);
    const auto r = aggregate(outcomes, "d");
    EXPECT_EQ(r.n_total, 6u);
    EXPECT_EQ(r.n_scored, 4u);
    EXPECT_EQ(r.n_missing, 1u);
    EXPECT_EQ(r.n_errored, 1u);
    EXPECT_EQ(r.n_parse_failed, 1u);
    EXPECT_EQ(r.n_scored + r.n_missing + r.n_errored, r.n_total);
    EXPECT_EQ(r.pct(AccuracyLevel::kStreet), 50.0);
    EXPECT_EQ(r.pct(AccuracyLevel::kContinent), 50.0);
}

TEST(EvaluateDataset, EchoNearestMatchesOracle) {
    EvalFixture fx;
    build_eval_fixture(fx, 30, 3, 200, 16, 21);
    auto mock = std::make_shared<MockTransport>(std::vector<MockStep>{}, echo_nearest_responder());
    const auto client = mock_client(mock);
    EvalConfig cfg;
    const auto run = evaluate_dataset(fx.manifest, fx.queries, fx.index, client, cfg);
    ASSERT_EQ(run.outcomes.size(), 30u);
    EXPECT_EQ(mock->request_count(), 27u);
    for (std::size_t i = 0; i < 30; ++i) {
        const auto& o = run.outcomes[i];
        if (i >= 27) {
            EXPECT_EQ(o.status, OutcomeStatus::kMissing);
            continue;
        }
        ASSERT_EQ(o.status, OutcomeStatus::kScored);
        const std::vector<float> q(fx.queries.row(i).begin(), fx.queries.row(i).end());
        const auto nearest_id = oracle_ascending(fx.gallery, q)[0].id;
        const auto& rec = *std::find_if(fx.gallery.begin(), fx.gallery.end(),
                                        [&](const GalleryRecord& g) { return g.id == nearest_id; });
        ASSERT_TRUE(o.predicted);
        EXPECT_NEAR(o.predicted->lat, rec.coord.lat, 5e-7);
        EXPECT_NEAR(o.predicted->lon, rec.coord.lon, 5e-7);
        EXPECT_NEAR(*o.error_km, geodesic_km(rec.coord, fx.manifest.items[i].ground_truth).km, 1e-3);
        EXPECT_EQ(o.trace.similar_ids.size(), 16u);
        EXPECT_EQ(o.trace.similar_ids[0], nearest_id);
    }
    EXPECT_EQ(run.report.n_missing, 3u);
    EXPECT_DOUBLE_EQ(run.report.coverage_pct(), 90.0);
}

TEST(EvaluateDataset, OutcomeFilesAreByteIdentical) {
    EvalFixture fx;
    build_eval_fixture(fx, 20, 2, 100, 8, 5);
    std::string first;
    for (std::size_t max_in_flight : {1u, 4u}) {
        auto mock = std::make_shared<MockTransport>(std::vector<MockStep>{}, echo_nearest_responder());
        EvalConfig cfg;
        cfg.max_in_flight = max_in_flight;
        const auto run = evaluate_dataset(fx.manifest, fx.queries, fx.index, mock_client(mock), cfg);
        const auto text = render_outcomes(run.outcomes, true);
        if (first.empty()) {
            first = text;
        } else {
            EXPECT_EQ(text, first);
        }
    }
    EXPECT_EQ(std::count(first.begin(), first.end(), '\n'), 20);
}

TEST(EvaluateDataset, ModelFailuresMarkItemsErrored) {
    EvalFixture fx;
    build_eval_fixture(fx, 3, 0, 20, 4, 9);
    auto mock = std::make_shared<MockTransport>(std::vector<MockStep>{MockStep::fail(500)});
    ModelConfig mc;
    mc.max_retries = 1;
    mc.retry_backoff_s = 0.0;
    MllmClient client(mc, mock, [](std::chrono::milliseconds) {});
    EvalConfig cfg;
    cfg.max_in_flight = 1;
    const auto run = evaluate_dataset(fx.manifest, fx.queries, fx.index, client, cfg);
    EXPECT_EQ(run.report.n_errored, 3u);
    EXPECT_EQ(run.report.n_scored, 0u);
    EXPECT_EQ(run.outcomes[0].trace.attempts, 2u);
    const auto rec = nlohmann::json::parse(outcome_record(run.outcomes[0], true));
    EXPECT_EQ(rec["status"], "errored");
    EXPECT_TRUE(rec.contains("error"));
}

TEST(EvaluateDataset, RejectsMisalignedEmbeddings) {
    EvalFixture fx;
    build_eval_fixture(fx, 3, 0, 20, 4, 9);
    auto q = fx.queries;
    q.count = 2;
    q.data.resize(8);
    EXPECT_THROW(evaluate_dataset(fx.manifest, q, fx.index, mock_client(MockTransport::replying("1.5, 1.5")), {}),
                 Error);
    EvalConfig bad;
    bad.template_id = "missing";
    EXPECT_THROW(
        evaluate_dataset(fx.manifest, fx.queries, fx.index, mock_client(MockTransport::replying("1.5, 1.5")), bad),
        Error);
}

TEST(EvaluateItem, MissingItemIsRejected) {
    EvalFixture fx;
    build_eval_fixture(fx, 2, 1, 20, 4, 3);
    EXPECT_THROW(evaluate_item(fx.manifest.items[1], fx.queries.row(1), fx.index,
                               mock_client(MockTransport::replying("1.5, 1.5")), {}),
                 Error);
}

TEST(Report, JsonRoundTripAndCsv) {
    std::vector<EvalOutcome> outcomes = {scored_at(0.0), scored_at(1.0), scored_at(60.0)};
    Provenance p;
    p.template_id = "contrastive-v1";
    p.model_name = "m";
    p.index_checksum = "deadbeef";
    p.generated_at = "2024-01-01T00:00:00Z";
    const auto r = aggregate(outcomes, "set", p);
    const auto parsed = parse_reports_json(render_report(r, ReportFormat::kJson));
    ASSERT_EQ(parsed.size(), 1u);
    EXPECT_EQ(parsed[0], r);

    const std::vector<AccuracyReport> two = {r, r};
    EXPECT_EQ(parse_reports_json(render_json(two)).size(), 2u);

    const auto csv = render_csv(std::span<const AccuracyReport>(&r, 1));
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "dataset,street_1km,city_25km,region_200km,country_750km,continent_2500km,"
              "n_total,n_scored,n_missing,n_errored,n_parse_failed");
    EXPECT_NE(csv.find("set,33.3,33.3,66.7,66.7,66.7,3,3,0,0,0"), std::string::npos) << csv;
    EXPECT_THROW(parse_reports_json("{\"dataset\": 1}"), Error);
}

TEST(Report, CoverageRoundsToOneDecimal) {
    AccuracyReport r;
    r.n_total = 4536;
    r.n_missing = 169;
    EXPECT_DOUBLE_EQ(r.coverage_pct(), 96.3);
}

TEST(IndexChecksum, ReadsTrailer) {
    TempDir dir;
    const auto g = random_gallery(10, 4, 1);
    IndexConfig cfg;
    cfg.dimension = 4;
    const auto idx = Index::build(g, cfg);
    idx.save(dir / "i.grag");
    const auto bytes = idx.serialize();
    char expect[16];
    std::snprintf(expect, sizeof(expect), "%08x", crc32(std::span(bytes).first(bytes.size() - 4)));
    EXPECT_EQ(index_file_checksum(dir / "i.grag"), expect);
}
