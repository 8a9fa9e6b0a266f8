#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reid/dataset.hpp"
#include "reid/eval.hpp"
#include "reid/fusion.hpp"
#include "reid/lomo.hpp"
#include "reid/types.hpp"

namespace reid {

// One experiment, fully serializable: the JSON dump is hashed into every
// report so a run can be reproduced from its artifacts.
struct RunConfig {
    std::string dataset_root;
    std::string split_manifest;
    std::string output_dir = "out";
    std::string cache_dir;        // empty -> $REID_CACHE_DIR or output_dir/cache
    std::string embeddings_path;  // deep part features, CSV or DEEP cache
    std::string joints_path;      // optional pose keypoints for region CSV
    std::string model_path;       // empty -> output_dir/xqda_model.bin

    LomoConfig lomo;
    FusionMode fusion = FusionMode::LOMO_ONLY;
    float alpha = 0.5f;
    Metric metric = Metric::COSINE;
    ProtocolKind protocol = ProtocolKind::SINGLE_QUERY_MAP;
    int trials = 100;
    std::vector<int> ranks_reported = {1, 5, 10};
    uint64_t seed = 0;
    int topk = 0;     // > 0 emits ranked lists in eval
    int workers = 0;  // 0 -> hardware concurrency
    bool force = false;
    bool montage = false;  // query: write a probe|matches image strip

    double xqda_reg = 1e-3;
    int xqda_max_dim = 0;
    double xqda_eig_threshold = 1.0;

    std::string to_json() const;
    static RunConfig from_json_file(const std::string& path);

    std::string config_hash() const;  // FNV-1a 64 over the canonical dump
    std::string resolved_cache_dir() const;
    std::string resolved_model_path() const;
};

// Subcommand bodies. Each writes its artifacts plus a JSON report carrying
// the config hash, and throws reid::Error subclasses on failure.
void cmd_split(const RunConfig& config, const std::string& dataset_kind,
               const SplitOptions& options = {});
void cmd_extract(const RunConfig& config);
void cmd_train(const RunConfig& config);
void cmd_eval(const RunConfig& config);
void cmd_query(const RunConfig& config, const std::string& probe_key, int k);
void cmd_ablate(const RunConfig& config);

// Full argv-level entry point (CLI11 parsing, error -> exit-code mapping).
// The `reid` binary forwards straight here; tests call it in-process.
int cli_main(const std::vector<std::string>& args);
int exit_code_for(const Error& error);

}  // namespace reid
