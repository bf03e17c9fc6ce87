#pragma once

#include "dabc/trainer.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace dabc {

enum class ExperimentKind { cls_vs_reg, attention_ablation, confusion, attention_dump };

std::string to_string(ExperimentKind kind);
/// Throws ParameterError for an unknown name.
ExperimentKind experiment_from_string(const std::string& text);

/// Sizes of the synthetic train/validation splits. Samples are generated at twice the
/// training resize target so that test-time halving matches the training scale.
struct SyntheticSplit
{
    int train_indoor = 108;
    int train_outdoor = 92;
    int val_indoor = 24;
    int val_outdoor = 20;
    /// Outdoor frames with LiDAR-like sparse depth. Training targets are densified first;
    /// validation is scored on the sparse valid pixels only.
    bool sparse_outdoor = false;
};

void to_json(nlohmann::json& j, const SyntheticSplit& s);
void from_json(const nlohmann::json& j, SyntheticSplit& s);

/// Everything that defines an experiment run. Serialized verbatim to `<dir>/config.json`.
struct ExperimentConfig
{
    std::string output_dir = "reports";
    std::uint64_t seed = 0;
    SyntheticSplit data;
    TrainGeometry geometry;
    TrainSchedule schedule = TrainSchedule::toy();
    /// Classification network; the regression and no-attention variants are derived from it.
    ModelConfig model = small_model();
    QuantizationSpec quantization;
    /// Optional pre-trained checkpoints ("classification", "regression") used instead of
    /// training where an experiment needs them.
    std::map<std::string, std::string> checkpoints;
    int dump_inputs = 4;
    int window_lo = 60;
    int window_hi = 95;
    int validate_every = 5;

    static ModelConfig small_model();
    void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Synthetic train and validation sets for a seed; independent of the model and schedule.
struct SyntheticData
{
    DomainSets train;
    DomainSets validation;
};

SyntheticData make_synthetic_data(const SyntheticSplit& split, const TrainGeometry& geometry, std::uint64_t seed);

struct MethodRow
{
    std::string method;
    MetricReport metrics;
};

inline constexpr const char* kMethodTableHeader = "method,absRel,sqRel,imae,irmse,SI,SILog,Q";

void write_method_table(const std::vector<MethodRow>& rows, const std::string& path);
/// Throws IngestionError on a malformed table.
std::vector<MethodRow> read_method_table(const std::string& path);

struct ExperimentResult
{
    std::string directory;
    /// Table name (file stem under tables/) to rows.
    std::map<std::string, std::vector<MethodRow>> tables;
    /// Evaluation reports by model variant.
    std::map<std::string, EvaluationReport> reports;
    /// Gate vectors collected for the attention dump.
    std::vector<AttentionRecord> gates;
    std::vector<std::string> files;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Trains or loads the required variants on synthetic mixed data, evaluates them and writes
/// `<output_dir>/<kind>/{tables/*.csv, figures/*.png, config.json}`. Throws Error with
/// instructions when a configured checkpoint file is missing.
ExperimentResult run_experiment(ExperimentKind kind, const ExperimentConfig& config, const ProgressFn& progress = {});

} // namespace dabc
