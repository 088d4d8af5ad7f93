#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "privlex/datasets.hpp"
#include "privlex/explain.hpp"
#include "privlex/metrics.hpp"
#include "privlex/score.hpp"
#include "privlex/tune.hpp"
#include "privlex/vocab.hpp"

namespace privlex {

std::string_view tool_version() noexcept;

/// report.json: overall ACC/BA/F1-macro plus precision/recall/F1 for each class.
std::string render_evaluation_report(const metrics::ConfusionCounts& counts, const std::string& dataset_tag,
                                     const std::string& split_name);
void save_evaluation_report(const metrics::ConfusionCounts& counts, const std::string& dataset_tag,
                            const std::string& split_name, const std::filesystem::path& path);

}  // namespace privlex

namespace privlex::pipeline {

inline constexpr std::array<std::string_view, 9> kStageOrder = {
    "vocab", "embed", "score", "tune", "train", "evaluate", "explain", "zeroshot", "bias"};

enum class StageStatus { Ran, Cached };

struct StageRecord {
    std::string name;
    StageStatus status = StageStatus::Ran;
    std::string cache_key;
    std::map<std::string, std::string> inputs;   // logical name -> sha256
    std::map<std::string, std::string> outputs;  // file name in the output directory -> sha256
};

struct RunManifest {
    std::vector<std::string> command_line;
    std::string tool_version;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string config_path;
    std::string config_hash;
    std::map<std::string, std::string> input_hashes;
    std::map<std::string, std::string> output_hashes;
    std::vector<StageRecord> stages;
    std::vector<std::string> warnings;
    std::string started_utc;
    double wall_seconds = 0.0;
};

void save_run_manifest(const RunManifest& manifest, const std::filesystem::path& path);

/// Command-line overrides; unset fields fall back to the config file.
struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::filesystem::path> cache_dir;
    std::vector<std::string> command_line;
};

struct PipelineConfig {
    std::filesystem::path config_path;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::filesystem::path out_dir;
    std::filesystem::path cache_dir;
    bool cache = true;
    std::vector<std::string> stages;  // dependency order

    std::optional<std::filesystem::path> vocab_path;
    std::optional<std::filesystem::path> prompts_path;  // precompiled prompts instead of the vocab stage
    TemplateStyle template_style = TemplateStyle::Description;
    SelectionMode selection = SelectionMode::HierarchyRule;

    std::optional<std::filesystem::path> image_model;
    std::optional<std::filesystem::path> text_model;
    std::optional<std::filesystem::path> image_list;
    std::size_t batch_size = 32;
    std::optional<std::filesystem::path> image_embeddings;    // precomputed
    std::optional<std::filesystem::path> concept_embeddings;  // precomputed

    NormalizerMode normalizer_mode = NormalizerMode::PerConcept;

    std::optional<std::filesystem::path> labels_path;
    LabelSchema label_schema = LabelSchema::DirectBinary;
    std::string safe_attribute = "safe";
    std::optional<std::filesystem::path> split_path;
    std::string dataset_tag;

    int budget = 100;
    tune::Strategy strategy = tune::Strategy::Random;

    std::optional<double> C;
    std::optional<int> max_iter;

    double tau = kDefaultTau;
    ThresholdTarget tau_target = ThresholdTarget::Raw;
    std::vector<ReportFormat> report_formats{ReportFormat::Json};

    std::optional<std::filesystem::path> annotations_path;

    std::vector<std::filesystem::path> bias_models;
};

/// Parses and validates a TOML pipeline config. Relative paths resolve against the
/// config file's directory; referenced input files must exist.
PipelineConfig load_config(const std::filesystem::path& path, const RunOptions& options = {});

/// Runs the configured stages in dependency order, reusing cached stage outputs whose
/// input hashes match. Writes `run_manifest.json` into the output directory.
RunManifest run_pipeline(const std::filesystem::path& config_path, const RunOptions& options = {});
RunManifest run_pipeline(const PipelineConfig& config, const RunOptions& options = {});

/// Manifest for a single CLI subcommand: hashes the given inputs and outputs and writes
/// `<first output>.run.json`.
void write_command_manifest(const std::vector<std::string>& command_line, std::uint64_t seed, unsigned threads,
                            const std::vector<std::filesystem::path>& inputs,
                            const std::vector<std::filesystem::path>& outputs, double wall_seconds);

std::string utc_timestamp();

}  // namespace privlex::pipeline
