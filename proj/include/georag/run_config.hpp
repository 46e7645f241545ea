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

// Run configuration shared by the command-line subcommands.
//
// Every setting has one long flag (--k-similar), one config-file key with the
// same spelling (k-similar = 16) and one environment variable
// (GEORAG_K_SIMILAR). Precedence: defaults < config file < environment < flags.

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "georag/error.hpp"
#include "georag/evalharness.hpp"
#include "georag/mllm_client.hpp"
#include "georag/report.hpp"
#include "georag/vecstore.hpp"

namespace georag {

struct RunConfig {
    // Index construction.
    bool ivf = false;
    std::uint32_t nlist = 64;
    std::uint32_t nprobe = kDefaultNprobe;
    std::uint32_t kmeans_iterations = 20;
    std::uint64_t seed = 0;
    bool normalize = false;

    // Retrieval, prompting, evaluation.
    std::size_t k_similar = kDefaultKSimilar;
    std::size_t k_dissimilar = kDefaultKDissimilar;
    std::string template_id = std::string(kDefaultTemplateId);
    std::string template_dir;
    std::size_t max_in_flight = 4;
    std::string dataset_name = "benchmark";
    std::string out_dir = ".";
    std::string format = "markdown";
    bool no_raw_responses = false;

    ModelConfig model;
    std::string mock_script;

    IndexConfig index_config(std::uint32_t dimension) const {
        IndexConfig c;
        c.dimension = dimension;
        c.mode = ivf ? IndexMode::kIvf : IndexMode::kFlatExact;
        c.ivf_nlist = nlist;
        c.ivf_nprobe = nprobe;
        c.kmeans_iterations = kmeans_iterations;
        c.rng_seed = seed;
        return c;
    }

    EvalConfig eval_config() const {
        EvalConfig e;
        e.dataset_name = dataset_name;
        e.k_similar = k_similar;
        e.k_dissimilar = k_dissimilar;
        e.template_id = template_id;
        e.nprobe = nprobe;
        e.max_in_flight = max_in_flight;
        e.keep_raw_responses = !no_raw_responses;
        return e;
    }

    std::vector<ReportFormat> formats() const {
        std::vector<ReportFormat> out;
        std::size_t pos = 0;
        while (pos <= format.size()) {
            auto end = format.find(',', pos);
            if (end == std::string::npos) end = format.size();
            auto item = format.substr(pos, end - pos);
            if (!item.empty()) out.push_back(report_format_from_string(item));
            pos = end + 1;
        }
        if (out.empty()) throw Error(ErrorCode::kConfig, "--format lists no formats");
        return out;
    }

    /// Checks every field; called before any work starts.
    void validate() const {
        if (nlist == 0) throw Error(ErrorCode::kConfig, "nlist must be >= 1");
        if (nprobe == 0) throw Error(ErrorCode::kConfig, "nprobe must be >= 1");
        if (ivf && nprobe > nlist) throw Error(ErrorCode::kConfig, "nprobe exceeds nlist");
        if (kmeans_iterations == 0) throw Error(ErrorCode::kConfig, "kmeans-iterations must be >= 1");
        if (max_in_flight == 0) throw Error(ErrorCode::kConfig, "max-in-flight must be >= 1");
        if (template_id.empty()) throw Error(ErrorCode::kConfig, "template is empty");
        if (!template_dir.empty() && !std::filesystem::is_directory(template_dir)) {
            throw Error(ErrorCode::kConfig, "template-dir " + template_dir + " is not a directory");
        }
        if (!mock_script.empty() && !std::filesystem::is_regular_file(mock_script)) {
            throw Error(ErrorCode::kConfig, "mock-script " + mock_script + " not found");
        }
        if (dataset_name.empty()) throw Error(ErrorCode::kConfig, "dataset-name is empty");
        (void)formats();
        model.validate();
    }
};

/// Environment variable for a long flag name: "k-similar" -> "GEORAG_K_SIMILAR".
inline std::string env_var_for(std::string_view flag) {
    std::string out = "GEORAG_";
    for (char c : flag) out.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    return out;
}

/// Registers every RunConfig field on `app` as a long option.
inline void bind_run_config(CLI::App& app, RunConfig& cfg) {
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    auto* index = "Index";
    app.add_flag("--ivf", cfg.ivf, "Build an inverted-file index instead of a flat exact index")->group(index);
    app.add_option("--nlist", cfg.nlist, "IVF list count")->capture_default_str()->group(index);
    app.add_option("--nprobe", cfg.nprobe, "IVF lists scanned per nearest query")->capture_default_str()->group(index);
    app.add_option("--kmeans-iterations", cfg.kmeans_iterations, "Lloyd iterations for IVF training")
        ->capture_default_str()
        ->group(index);
    app.add_option("--seed", cfg.seed, "Seed for IVF centroid initialization")->capture_default_str()->group(index);
    app.add_flag("--normalize", cfg.normalize, "L2-normalize gallery embeddings at ingest")->group(index);

    auto* rag = "Retrieval and evaluation";
    app.add_option("--k-similar", cfg.k_similar, "Nearest gallery neighbors in the prompt")
        ->capture_default_str()
        ->group(rag);
    app.add_option("--k-dissimilar", cfg.k_dissimilar, "Farthest gallery neighbors in the prompt")
        ->capture_default_str()
        ->group(rag);
    app.add_option("--template", cfg.template_id, "Prompt template id")->capture_default_str()->group(rag);
    app.add_option("--template-dir", cfg.template_dir, "Directory of <id>.txt templates overriding built-ins")
        ->group(rag);
    app.add_option("--max-in-flight", cfg.max_in_flight, "Concurrent model requests during evaluation")
        ->capture_default_str()
        ->group(rag);
    app.add_option("--dataset-name", cfg.dataset_name, "Dataset label in reports and output file names")
        ->capture_default_str()
        ->group(rag);
    app.add_option("--out-dir", cfg.out_dir, "Directory for outcome and report files")
        ->capture_default_str()
        ->group(rag);
    app.add_option("--format", cfg.format, "Report formats, comma separated: markdown,csv,json")
        ->capture_default_str()
        ->group(rag);
    app.add_flag("--no-raw-responses", cfg.no_raw_responses, "Leave raw model text out of the outcome file")
        ->group(rag);

    auto* model = "Model endpoint";
    app.add_option("--base-url", cfg.model.base_url, "Chat-completions base URL")->capture_default_str()->group(model);
    app.add_option("--model", cfg.model.model_name, "Model name sent with each request")
        ->capture_default_str()
        ->group(model);
    app.add_option("--temperature", cfg.model.temperature)->capture_default_str()->group(model);
    app.add_option("--top-p", cfg.model.top_p)->capture_default_str()->group(model);
    app.add_option("--max-tokens", cfg.model.max_tokens)->capture_default_str()->group(model);
    app.add_option("--timeout", cfg.model.request_timeout_s, "Per-request timeout in seconds")
        ->capture_default_str()
        ->group(model);
    app.add_option("--max-retries", cfg.model.max_retries, "Retries after a timeout or 5xx")
        ->capture_default_str()
        ->group(model);
    app.add_option("--retry-backoff", cfg.model.retry_backoff_s, "First retry delay in seconds, doubled per retry")
        ->capture_default_str()
        ->group(model);
    app.add_option("--max-image-bytes", cfg.model.max_image_bytes, "Largest image sent to the model")
        ->capture_default_str()
        ->group(model);
    app.add_option("--api-key", cfg.model.api_key, "Bearer token (prefer the GEORAG_API_KEY variable)")->group(model);
    app.add_option("--mock-script", cfg.mock_script, "Answer requests from a JSON mock script instead of HTTP")
        ->group(model);
}

/// Command-line arguments synthesized from GEORAG_* variables for every long
/// option of `app`. They go before the user's arguments so that explicit
/// flags win and any environment value beats the config file.
inline std::vector<std::string> environment_arguments(const CLI::App& app) {
    std::vector<std::string> args;
    for (const CLI::Option* opt : app.get_options()) {
        for (const auto& name : opt->get_lnames()) {
            if (name == "help" || name == "config") continue;
            const char* value = std::getenv(env_var_for(name).c_str());
            if (value == nullptr) continue;
            if (opt->get_type_size() == 0) {
                args.push_back("--" + name + "=" + value);
            } else {
                args.push_back("--" + name);
                args.emplace_back(value);
            }
        }
    }
    return args;
}

}  // namespace georag
