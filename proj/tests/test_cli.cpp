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

// End-to-end runs of the georag executable.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>

#include "test_support.hpp"

using namespace georag;
using namespace georag::testing;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr
};

RunResult run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + GEORAG_CLI_PATH + " " + args + " 2>&1";
    RunResult r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (pipe == nullptr) return r;
    char buf[4096];
    while (std::fgets(buf, sizeof(buf), pipe) != nullptr) r.output += buf;
    const int status = ::pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::size_t count_lines_starting(const std::string& text, const std::string& prefix) {
    std::size_t n = 0;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) n += line.rfind(prefix, 0) == 0;
    return n;
}

/// Gallery files plus a built index, a query image and a query embedding.
class CliFixture : public ::testing::Test {
protected:
    void SetUp() override {
        gallery_ = random_gallery(60, 8, 42);
        VectorBlob blob{8, gallery_.size(), {}};
        std::string meta;
        for (const auto& g : gallery_) {
            blob.data.insert(blob.data.end(), g.embedding.begin(), g.embedding.end());
            char line[160];
            std::snprintf(line, sizeof(line), "{\"id\": %llu, \"lat\": %.6f, \"lon\": %.6f, \"source\": \"EMP16\"}\n",
                          static_cast<unsigned long long>(g.id), g.coord.lat, g.coord.lon);
            meta += line;
        }
        save_vectors(dir_ / "gallery.gvec", blob);
        write_text(dir_ / "gallery.ndjson", meta);
        std::mt19937_64 rng(7);
        save_vectors(dir_ / "query.gvec", VectorBlob{8, 1, random_vector(8, rng)});
        write_text(dir_ / "photo.jpg", "not-really-a-jpeg");
        const auto r = run("build-index " + p("gallery.gvec") + " " + p("gallery.ndjson") + " " + p("g.grag"));
        ASSERT_EQ(r.exit_code, 0) << r.output;
    }
    std::string p(const std::string& name) const { return (dir_ / name).string(); }
    std::string mock(const std::string& json) {
        const auto path = p("mock" + std::to_string(mocks_++) + ".json");
        write_text(path, json);
        return "--mock-script " + path;
    }
    std::string query_args() const { return "query " + p("g.grag") + " " + p("photo.jpg") + " " + p("query.gvec"); }

    TempDir dir_;
    std::vector<GalleryRecord> gallery_;
    int mocks_ = 0;
};

}  // namespace

TEST(Cli, HelpListsFlags) {
    const auto r = run("--help");
    EXPECT_EQ(r.exit_code, 0);
    for (const char* flag : {"--ivf", "--nlist", "--nprobe", "--kmeans-iterations", "--seed", "--normalize",
                             "--k-similar", "--k-dissimilar", "--template", "--template-dir", "--max-in-flight",
                             "--dataset-name", "--out-dir", "--format", "--no-raw-responses", "--base-url", "--model",
                             "--temperature", "--top-p", "--max-tokens", "--timeout", "--max-retries",
                             "--retry-backoff", "--max-image-bytes", "--api-key", "--mock-script", "--config",
                             "build-index", "query", "evaluate", "report", "healthcheck"}) {
        EXPECT_NE(r.output.find(flag), std::string::npos) << flag;
    }
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run("").exit_code, 2);
    EXPECT_EQ(run("query").exit_code, 2);
    EXPECT_EQ(run("build-index a b c --no-such-flag").exit_code, 2);
}

TEST(Cli, BuildIndexThreeRecords) {
    TempDir dir;
    VectorBlob blob{2, 3, {0, 0, 1, 0, 0, 1}};
    save_vectors(dir / "v.gvec", blob);
    write_text(dir / "m.ndjson",
               "{\"id\": 1, \"lat\": 10, \"lon\": 20, \"source\": \"EMP16\"}\n"
               "{\"id\": 2, \"lat\": -10, \"lon\": 30, \"source\": \"EMP16\"}\n"
               "{\"id\": 3, \"lat\": 0, \"lon\": 0, \"source\": \"OSV5M\"}\n");
    const auto out = (dir / "i.grag").string();
    const auto r = run("build-index " + (dir / "v.gvec").string() + " " + (dir / "m.ndjson").string() + " " + out);
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("count=3"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("dimension=2"), std::string::npos);
    EXPECT_EQ(Index::load(out).size(), 3u);

    write_text(dir / "short.ndjson", "{\"id\": 1, \"lat\": 10, \"lon\": 20, \"source\": \"EMP16\"}\n");
    const auto bad = run("build-index " + (dir / "v.gvec").string() + " " + (dir / "short.ndjson").string() + " " +
                         (dir / "x.grag").string());
    EXPECT_EQ(bad.exit_code, 1);
    EXPECT_NE(bad.output.find("count"), std::string::npos) << bad.output;
    EXPECT_FALSE(std::filesystem::exists(dir / "x.grag"));
}

TEST_F(CliFixture, BuildIvfIndex) {
    const auto r = run("build-index --ivf --nlist 8 " + p("gallery.gvec") + " " + p("gallery.ndjson") + " " +
                       p("ivf.grag"));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("nlist=8"), std::string::npos) << r.output;
    const auto bytes = io::read_file(p("ivf.grag"));
    ASSERT_GT(bytes.size(), 8u);
    EXPECT_EQ(bytes[8], 1u);  // mode byte after magic and version
    const auto idx = Index::load(p("ivf.grag"));
    EXPECT_EQ(idx.mode(), IndexMode::kIvf);
    EXPECT_EQ(idx.nlist(), 8u);
}

TEST_F(CliFixture, QueryParsesMockAnswer) {
    const auto r = run(query_args() + " " + mock(R"({"steps": [{"content": "I'd say 10.0, 20.0"}]})"));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("raw: I'd say 10.0, 20.0"), std::string::npos);
    EXPECT_NE(r.output.find("parsed: (10.000000, 20.000000)"), std::string::npos) << r.output;
}

TEST_F(CliFixture, QueryParseMissExitCode) {
    const auto r = run(query_args() + " " + mock(R"({"steps": [{"content": "somewhere in Europe"}]})"));
    EXPECT_EQ(r.exit_code, 5) << r.output;
    EXPECT_NE(r.output.find("parsed: none"), std::string::npos);
}

TEST_F(CliFixture, QueryModelErrorsExitCodes) {
    EXPECT_EQ(run(query_args() + " " + mock(R"({"steps": [{"status": 400}]})")).exit_code, 4);
    EXPECT_EQ(run(query_args() + " --max-retries 1 --retry-backoff 0 " + mock(R"({"steps": [{"status": 503}]})"))
                  .exit_code,
              3);
}

TEST_F(CliFixture, QueryShowPromptHasAllNeighbors) {
    const auto r =
        run(query_args() + " --show-prompt --k-similar 16 --k-dissimilar 16 " + mock(R"({"responder": "echo_nearest"})"));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const auto begin = r.output.find("--- prompt ---");
    const auto end = r.output.find("--- end prompt ---");
    ASSERT_NE(begin, std::string::npos);
    const auto prompt = r.output.substr(begin, end - begin);
    EXPECT_EQ(parse_coordinates(prompt).candidates_seen, 32u);
}

TEST_F(CliFixture, QueryVerboseShowsNeighbors) {
    const auto r = run(query_args() + " --verbose --k-similar 4 --k-dissimilar 2 " + mock(R"({"responder": "echo_nearest"})"));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_EQ(count_lines_starting(r.output, "similar id="), 4u);
    EXPECT_EQ(count_lines_starting(r.output, "dissimilar id="), 2u);
}

TEST_F(CliFixture, ConfigEnvFlagPrecedence) {
    write_text(p("run.ini"), "k-similar=3\nk-dissimilar=1\n");
    const auto base = query_args() + " --verbose --config " + p("run.ini") + " " + mock(R"({"responder": "echo_nearest"})");
    EXPECT_EQ(count_lines_starting(run(base).output, "similar id="), 3u);
    EXPECT_EQ(count_lines_starting(run(base, "GEORAG_K_SIMILAR=5").output, "similar id="), 5u);
    EXPECT_EQ(count_lines_starting(run(base + " --k-similar 7", "GEORAG_K_SIMILAR=5").output, "similar id="), 7u);

    write_text(p("bad.ini"), "k_similarity=3\n");
    EXPECT_NE(run(query_args() + " --config " + p("bad.ini")).exit_code, 0);
}

TEST_F(CliFixture, UnknownTemplateFails) {
    const auto r = run(query_args() + " --template nope " + mock(R"({"responder": "echo_nearest"})"));
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("nope"), std::string::npos);
}

TEST_F(CliFixture, EvaluateWritesReports) {
    std::string manifest;
    const std::vector<std::string> replies = {"10.004, 10.0", "10.1, 10.0", "11.0, 10.0", "30.0, 10.0"};
    nlohmann::json by_image;
    VectorBlob queries{8, 5, {}};
    std::mt19937_64 rng(3);
    for (std::size_t i = 0; i < 5; ++i) {
        manifest += "{\"id\": \"q" + std::to_string(i) + "\", \"image_path\": \"img" + std::to_string(i) +
                    ".jpg\", \"lat\": 10.0, \"lon\": 10.0}\n";
        const auto v = random_vector(8, rng);
        queries.data.insert(queries.data.end(), v.begin(), v.end());
        if (i == 4) continue;  // image left missing
        const auto bytes = image_bytes_for(i);
        write_text(p("img" + std::to_string(i) + ".jpg"), bytes);
        by_image[sha256_hex(bytes)] = replies[i];
    }
    write_text(p("bench.ndjson"), manifest);
    save_vectors(p("bench.gvec"), queries);
    const nlohmann::json script = {{"responder", "by_image"}, {"by_image", by_image}, {"default_content", "?"}};
    const auto out = p("out");
    const auto r = run("evaluate " + p("bench.ndjson") + " " + p("g.grag") + " " + p("bench.gvec") +
                       " --dataset-name fix --format csv,json --out-dir " + out + " " + mock(script.dump()));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("| fix | 25.0 | 50.0 | 75.0 | 75.0 | 100.0 |"), std::string::npos) << r.output;
    EXPECT_TRUE(std::filesystem::exists(out + "/fix.report.csv"));
    EXPECT_TRUE(std::filesystem::exists(out + "/fix.report.json"));
    EXPECT_FALSE(std::filesystem::exists(out + "/fix.report.md"));
    const auto reports = parse_reports_json(io::read_text_file(out + "/fix.report.json"));
    ASSERT_EQ(reports.size(), 1u);
    EXPECT_EQ(reports[0].n_missing, 1u);
    EXPECT_EQ(reports[0].n_scored, 4u);
    EXPECT_EQ(reports[0].provenance.transport, "MOCK");
    EXPECT_EQ(reports[0].provenance.index_checksum.size(), 8u);
    const auto outcomes = io::read_text_file(out + "/fix.outcomes.jsonl");
    EXPECT_EQ(std::count(outcomes.begin(), outcomes.end(), '\n'), 5);

    const auto again = run("evaluate " + p("bench.ndjson") + " " + p("g.grag") + " " + p("bench.gvec") +
                           " --dataset-name fix2 --out-dir " + out + " " + mock(script.dump()));
    ASSERT_EQ(again.exit_code, 0) << again.output;
    EXPECT_EQ(io::read_text_file(out + "/fix2.outcomes.jsonl"), outcomes);

    const auto rep = run("report --format csv " + out + "/fix.report.json");
    EXPECT_EQ(rep.exit_code, 0);
    EXPECT_NE(rep.output.find("fix,25.0,50.0,75.0,75.0,100.0,5,4,1,0,0"), std::string::npos) << rep.output;
}

TEST(Cli, HealthcheckAgainstMock) {
    TempDir dir;
    write_text(dir / "ok.json", R"({"steps": [{"content": "pong"}], "accepted_model": "m1"})");
    const auto ok = run("healthcheck --model m1 --mock-script " + (dir / "ok.json").string());
    EXPECT_EQ(ok.exit_code, 0) << ok.output;
    EXPECT_NE(ok.output.find("status=OK"), std::string::npos);
    const auto wrong = run("healthcheck --model m2 --mock-script " + (dir / "ok.json").string());
    EXPECT_EQ(wrong.exit_code, 4);
    EXPECT_NE(wrong.output.find("m2"), std::string::npos);
    const auto down = run("healthcheck --base-url http://127.0.0.1:1/v1 --max-retries 0 --timeout 2");
    EXPECT_EQ(down.exit_code, 3) << down.output;
}
