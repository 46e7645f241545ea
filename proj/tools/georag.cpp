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

// georag: build gallery indexes, run single geolocation queries, evaluate
// benchmarks and render accuracy reports.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "georag/georag.hpp"
#include "georag/http_transport.hpp"
#include "georag/run_config.hpp"

namespace fs = std::filesystem;
using namespace georag;

namespace {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,   // invalid configuration or unreadable input
    kExitUsage = 2,
    kExitTransport = 3, // model endpoint unreachable after retries
    kExitRequest = 4,   // model endpoint rejected the request
    kExitParseMiss = 5, // model answered without a usable coordinate
};

std::shared_ptr<Transport> make_transport(const RunConfig& cfg) {
    if (!cfg.mock_script.empty()) {
        auto doc = nlohmann::json::parse(io::read_text_file(cfg.mock_script), nullptr, false);
        if (doc.is_discarded()) throw Error(ErrorCode::kConfig, "mock script " + cfg.mock_script + " is not JSON");
        return mock_from_script(doc);
    }
    return std::make_shared<HttpTransport>(cfg.model.base_url);
}

TemplateRegistry make_templates(const RunConfig& cfg) {
    auto reg = TemplateRegistry::with_defaults();
    if (!cfg.template_dir.empty()) reg.load_directory(cfg.template_dir);
    if (!reg.contains(cfg.template_id)) {
        throw Error(ErrorCode::kUnknownTemplate, "no template registered as \"" + cfg.template_id + "\"");
    }
    return reg;
}

int model_error_exit(const ModelError& e) {
    std::cerr << "georag: " << e.what() << '\n';
    return e.code() == ErrorCode::kTransport ? kExitTransport : kExitRequest;
}

struct BuildArgs {
    std::string vectors, metadata, out;
};

int cmd_build_index(const RunConfig& cfg, const BuildArgs& args) {
    const auto started = std::chrono::steady_clock::now();
    const auto blob = load_vectors(args.vectors);
    const auto rows = load_metadata(args.metadata);
    const auto records = assemble_gallery(blob, rows, {cfg.normalize});
    const auto index = Index::build(records, cfg.index_config(blob.dimension));
    index.save(args.out);
    const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    std::printf("count=%zu dimension=%u mode=%s nlist=%u build_ms=%.1f\n", index.size(), index.dimension(),
                std::string(to_string(index.mode())).c_str(), index.nlist(), ms);
    std::printf("wrote %s\n", args.out.c_str());
    return kExitOk;
}

struct QueryArgs {
    std::string index, image, embedding;
    bool verbose = false;
    bool show_prompt = false;
};

int cmd_query(const RunConfig& cfg, const QueryArgs& args) {
    const auto templates = make_templates(cfg);
    const auto index = Index::load(args.index, cfg.nprobe);
    const auto blob = load_vectors(args.embedding);
    if (blob.count < 1) throw Error(ErrorCode::kInvalidArgument, args.embedding + " holds no embedding");
    MllmClient client(cfg.model, make_transport(cfg));

    RetrievalResult retrieval;
    retrieval.k_similar = cfg.k_similar;
    retrieval.k_dissimilar = cfg.k_dissimilar;
    auto lists = index.search_both(blob.row(0), cfg.k_similar, cfg.k_dissimilar, cfg.nprobe);
    retrieval.similar = std::move(lists.similar);
    retrieval.dissimilar = std::move(lists.dissimilar);
    if (args.verbose) {
        for (const auto& n : retrieval.similar) {
            std::printf("similar id=%llu coord=%s distance=%.6f\n", static_cast<unsigned long long>(n.id),
                        render_coord(n.coord).c_str(), n.distance);
        }
        for (const auto& n : retrieval.dissimilar) {
            std::printf("dissimilar id=%llu coord=%s distance=%.6f\n", static_cast<unsigned long long>(n.id),
                        render_coord(n.coord).c_str(), n.distance);
        }
    }
    const auto bundle =
        build_prompt(load_image(args.image), fs::path(args.image).filename().string(), retrieval, cfg.template_id, templates);
    if (args.show_prompt) std::printf("--- prompt ---\n%s\n--- end prompt ---\n", bundle.text.c_str());

    ModelResponse response;
    try {
        response = client.complete(bundle);
    } catch (const ModelError& e) {
        return model_error_exit(e);
    }
    std::printf("raw: %s\n", response.raw_text.c_str());
    const auto parsed = parse_coordinates(response.raw_text);
    if (!parsed.coord) {
        std::printf("parsed: none\n");
        return kExitParseMiss;
    }
    std::printf("parsed: (%s)\n", render_coord(*parsed.coord).c_str());
    return kExitOk;
}

struct EvaluateArgs {
    std::string manifest, index, embeddings;
};

int cmd_evaluate(const RunConfig& cfg, const EvaluateArgs& args) {
    const auto templates = make_templates(cfg);
    const auto formats = cfg.formats();
    const auto manifest = load_benchmark_manifest(args.manifest);
    const auto index = Index::load(args.index, cfg.nprobe);
    const auto embeddings = load_vectors(args.embeddings);
    MllmClient client(cfg.model, make_transport(cfg));

    const auto eval = cfg.eval_config();
    auto run = evaluate_dataset(manifest, embeddings, index, client, eval, templates, index_file_checksum(args.index));

    fs::create_directories(cfg.out_dir);
    const auto base = fs::path(cfg.out_dir) / cfg.dataset_name;
    const auto outcome_path = base.string() + ".outcomes.jsonl";
    io::write_text_file(outcome_path, render_outcomes(run.outcomes, eval.keep_raw_responses));
    std::printf("wrote %s\n", outcome_path.c_str());
    for (auto f : formats) {
        const auto path = base.string() + ".report" + std::string(file_extension(f));
        io::write_text_file(path, render_report(run.report, f));
        std::printf("wrote %s\n", path.c_str());
    }
    std::printf("\n%s", render_report(run.report, ReportFormat::kMarkdown).c_str());
    return kExitOk;
}

struct ReportArgs {
    std::vector<std::string> inputs;
};

int cmd_report(const RunConfig& cfg, const ReportArgs& args) {
    std::vector<AccuracyReport> reports;
    for (const auto& in : args.inputs) {
        auto parsed = parse_reports_json(io::read_text_file(in));
        reports.insert(reports.end(), parsed.begin(), parsed.end());
    }
    for (auto f : cfg.formats()) std::printf("%s", render_report(reports, f).c_str());
    return kExitOk;
}

int cmd_healthcheck(const RunConfig& cfg) {
    MllmClient client(cfg.model, make_transport(cfg));
    try {
        const auto h = client.healthcheck();
        std::printf("status=OK model=%s latency_ms=%llu attempts=%u\n", h.model.c_str(),
                    static_cast<unsigned long long>(h.latency_ms), h.attempt_count);
        return kExitOk;
    } catch (const ModelError& e) {
        std::printf("status=FAIL\n");
        return model_error_exit(e);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retrieval-augmented image geolocalization"};
    app.set_config("--config", "", "Key-value configuration file; keys are the long flag names");
    app.allow_config_extras(false);
    app.fallthrough();
    app.require_subcommand(1);

    RunConfig cfg;
    cfg.model.apply_environment();
    bind_run_config(app, cfg);

    BuildArgs build;
    auto* build_cmd = app.add_subcommand("build-index", "Build an index file from vectors and metadata");
    build_cmd->add_option("vectors", build.vectors, "GVEC embedding file")->required();
    build_cmd->add_option("metadata", build.metadata, "Metadata, one JSON object per line")->required();
    build_cmd->add_option("out", build.out, "Index file to write")->required();

    QueryArgs query;
    auto* query_cmd = app.add_subcommand("query", "Geolocate one image");
    query_cmd->add_option("index", query.index, "Index file")->required();
    query_cmd->add_option("image", query.image, "Image file sent to the model")->required();
    query_cmd->add_option("embedding", query.embedding, "GVEC file whose first row embeds the image")->required();
    query_cmd->add_flag("--verbose", query.verbose, "Print retrieved neighbors");
    query_cmd->add_flag("--show-prompt", query.show_prompt, "Print the prompt text");

    EvaluateArgs evaluate;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score a benchmark manifest");
    eval_cmd->add_option("manifest", evaluate.manifest, "Benchmark manifest")->required();
    eval_cmd->add_option("index", evaluate.index, "Index file")->required();
    eval_cmd->add_option("embeddings", evaluate.embeddings, "GVEC file, one row per manifest item")->required();

    ReportArgs report;
    auto* report_cmd = app.add_subcommand("report", "Render JSON reports as markdown, csv or json");
    report_cmd->add_option("inputs", report.inputs, "Report JSON files")->required();

    auto* health_cmd = app.add_subcommand("healthcheck", "Send a minimal request to the model endpoint");

    // Environment values go before the user's arguments, so explicit flags
    // (taken last) win. CLI11 consumes the vector back to front.
    std::vector<std::string> args = environment_arguments(app);
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    std::reverse(args.begin(), args.end());

    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        cfg.validate();
        if (*build_cmd) return cmd_build_index(cfg, build);
        if (*query_cmd) return cmd_query(cfg, query);
        if (*eval_cmd) return cmd_evaluate(cfg, evaluate);
        if (*report_cmd) return cmd_report(cfg, report);
        if (*health_cmd) return cmd_healthcheck(cfg);
    } catch (const ModelError& e) {
        return model_error_exit(e);
    } catch (const std::exception& e) {
        std::cerr << "georag: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}
