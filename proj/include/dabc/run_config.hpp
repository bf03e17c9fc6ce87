#pragma once

#include "dabc/experiment.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace dabc {

/// Everything that defines a `train` / `eval` / `infer` invocation. Folder paths take
/// precedence over the synthetic split; a domain with no folder and a zero synthetic count
/// is left out.
struct RunConfig
{
    ModelConfig model = ExperimentConfig::small_model();
    TrainSchedule schedule = TrainSchedule::toy();
    TrainGeometry geometry;
    QuantizationSpec quantization;
    SyntheticSplit synthetic;
    std::uint64_t data_seed = 0;
    std::string train_indoor;
    std::string train_outdoor;
    std::string val_indoor;
    std::string val_outdoor;
    int validate_every = 1;

    void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Reads a JSON file; throws IngestionError naming the file if it is missing or malformed.
nlohmann::json read_json_file(const std::string& path);

/// Loads the folder datasets named in the config, filling missing domains synthetically.
SyntheticData load_run_data(const RunConfig& config);

} // namespace dabc
