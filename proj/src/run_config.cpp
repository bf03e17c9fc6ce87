#include "dabc/run_config.hpp"

#include "dabc/dataset.hpp"
#include "dabc/errors.hpp"

#include <fstream>

namespace dabc {

void RunConfig::validate() const
{
    model.validate(quantization);
    schedule.validate();
    geometry.validate();
    if (validate_every < 0)
        throw ParameterError("validate_every must be non-negative");
}

void to_json(nlohmann::json& j, const RunConfig& c)
{
    j = nlohmann::json{{"model", c.model},
                       {"schedule", c.schedule},
                       {"geometry", c.geometry},
                       {"quantization", c.quantization},
                       {"synthetic", c.synthetic},
                       {"data_seed", c.data_seed},
                       {"data",
                        {{"train_indoor", c.train_indoor},
                         {"train_outdoor", c.train_outdoor},
                         {"val_indoor", c.val_indoor},
                         {"val_outdoor", c.val_outdoor}}},
                       {"validate_every", c.validate_every}};
}

void from_json(const nlohmann::json& j, RunConfig& c)
{
    RunConfig out;
    if (j.contains("model")) {
        nlohmann::json m = out.model;
        m.update(j.at("model"));
        out.model = m.get<ModelConfig>();
    }
    if (j.contains("schedule")) {
        nlohmann::json s = j.at("schedule");
        if (!s.contains("preset"))
            s["preset"] = "toy";
        out.schedule = s.get<TrainSchedule>();
    }
    if (j.contains("geometry"))
        out.geometry = j.at("geometry").get<TrainGeometry>();
    if (j.contains("quantization"))
        out.quantization = j.at("quantization").get<QuantizationSpec>();
    if (j.contains("synthetic"))
        out.synthetic = j.at("synthetic").get<SyntheticSplit>();
    out.data_seed = j.value("data_seed", out.data_seed);
    if (j.contains("data")) {
        const auto& d = j.at("data");
        out.train_indoor = d.value("train_indoor", out.train_indoor);
        out.train_outdoor = d.value("train_outdoor", out.train_outdoor);
        out.val_indoor = d.value("val_indoor", out.val_indoor);
        out.val_outdoor = d.value("val_outdoor", out.val_outdoor);
    }
    out.validate_every = j.value("validate_every", out.validate_every);
    out.validate();
    c = out;
}

nlohmann::json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IngestionError("cannot open config file " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError("malformed JSON in " + path + ": " + e.what());
    }
}

SyntheticData load_run_data(const RunConfig& config)
{
    const bool any_folder = !config.train_indoor.empty() || !config.train_outdoor.empty();
    SyntheticData d;
    if (!any_folder)
        d = make_synthetic_data(config.synthetic, config.geometry, config.data_seed);
    auto load = [](const std::string& dir, Domain domain, std::vector<SceneSample>& into) {
        if (!dir.empty())
            into = load_folder_dataset(dir, domain);
    };
    load(config.train_indoor, Domain::indoor, d.train.indoor);
    load(config.train_outdoor, Domain::outdoor, d.train.outdoor);
    load(config.val_indoor, Domain::indoor, d.validation.indoor);
    load(config.val_outdoor, Domain::outdoor, d.validation.outdoor);
    return d;
}

} // namespace dabc
