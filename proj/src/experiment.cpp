#include "dabc/experiment.hpp"

#include "dabc/densify.hpp"
#include "dabc/errors.hpp"
#include "dabc/image_ops.hpp"
#include "dabc/render.hpp"
#include "dabc/synthetic.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fs = std::filesystem;

namespace dabc {

std::string to_string(ExperimentKind kind)
{
    switch (kind) {
    case ExperimentKind::cls_vs_reg:
        return "cls_vs_reg";
    case ExperimentKind::attention_ablation:
        return "attention_ablation";
    case ExperimentKind::confusion:
        return "confusion";
    case ExperimentKind::attention_dump:
        return "attention_dump";
    }
    return "unknown";
}

ExperimentKind experiment_from_string(const std::string& text)
{
    for (auto k : {ExperimentKind::cls_vs_reg, ExperimentKind::attention_ablation, ExperimentKind::confusion,
                   ExperimentKind::attention_dump})
        if (to_string(k) == text)
            return k;
    throw ParameterError("unknown experiment '" + text +
                         "' (expected cls_vs_reg, attention_ablation, confusion or attention_dump)");
}

void to_json(nlohmann::json& j, const SyntheticSplit& s)
{
    j = nlohmann::json{{"train_indoor", s.train_indoor}, {"train_outdoor", s.train_outdoor},
                       {"val_indoor", s.val_indoor},     {"val_outdoor", s.val_outdoor},
                       {"sparse_outdoor", s.sparse_outdoor}};
}

void from_json(const nlohmann::json& j, SyntheticSplit& s)
{
    SyntheticSplit out;
    out.train_indoor = j.value("train_indoor", out.train_indoor);
    out.train_outdoor = j.value("train_outdoor", out.train_outdoor);
    out.val_indoor = j.value("val_indoor", out.val_indoor);
    out.val_outdoor = j.value("val_outdoor", out.val_outdoor);
    out.sparse_outdoor = j.value("sparse_outdoor", out.sparse_outdoor);
    if (out.train_indoor < 0 || out.train_outdoor < 0 || out.val_indoor < 0 || out.val_outdoor < 0)
        throw ParameterError("split sizes must be non-negative");
    s = out;
}

ModelConfig ExperimentConfig::small_model()
{
    ModelConfig cfg = ModelConfig::classification_default();
    cfg.stage_widths = {24, 48, 96, 192};
    cfg.fusion_width = 48;
    return cfg;
}

void ExperimentConfig::validate() const
{
    geometry.validate();
    schedule.validate();
    model.validate(quantization);
    if (data.train_indoor < 1 || data.train_outdoor < 1 || data.val_indoor < 1 || data.val_outdoor < 1)
        throw ParameterError("experiments need at least one train and validation sample per domain");
    if (dump_inputs < 1)
        throw ParameterError("dump_inputs must be positive");
    if (window_lo < 0 || window_hi < window_lo || window_hi >= quantization.num_classes())
        throw ParameterError("confusion window outside the label range");
    if (validate_every < 0)
        throw ParameterError("validate_every must be non-negative");
}

void to_json(nlohmann::json& j, const ExperimentConfig& c)
{
    j = nlohmann::json{{"output_dir", c.output_dir},
                       {"seed", c.seed},
                       {"data", c.data},
                       {"geometry", c.geometry},
                       {"schedule", c.schedule},
                       {"model", c.model},
                       {"quantization", c.quantization},
                       {"checkpoints", c.checkpoints},
                       {"dump_inputs", c.dump_inputs},
                       {"window", {c.window_lo, c.window_hi}},
                       {"validate_every", c.validate_every}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c)
{
    ExperimentConfig out;
    out.output_dir = j.value("output_dir", out.output_dir);
    out.seed = j.value("seed", out.seed);
    if (j.contains("data"))
        out.data = j.at("data").get<SyntheticSplit>();
    if (j.contains("geometry"))
        out.geometry = j.at("geometry").get<TrainGeometry>();
    if (j.contains("schedule")) {
        nlohmann::json s = j.at("schedule");
        if (!s.contains("preset"))
            s["preset"] = "toy";
        out.schedule = s.get<TrainSchedule>();
    }
    if (j.contains("model")) {
        // start from the experiment network so partial overrides keep the small widths
        nlohmann::json m = out.model;
        m.update(j.at("model"));
        out.model = m.get<ModelConfig>();
    }
    if (j.contains("quantization"))
        out.quantization = j.at("quantization").get<QuantizationSpec>();
    if (j.contains("checkpoints"))
        out.checkpoints = j.at("checkpoints").get<std::map<std::string, std::string>>();
    out.dump_inputs = j.value("dump_inputs", out.dump_inputs);
    if (j.contains("window")) {
        const auto& w = j.at("window");
        if (!w.is_array() || w.size() != 2)
            throw ParameterError("window must be [lo, hi]");
        out.window_lo = w[0].get<int>();
        out.window_hi = w[1].get<int>();
    }
    out.validate_every = j.value("validate_every", out.validate_every);
    out.validate();
    c = out;
}

namespace {

std::vector<SceneSample> generate_split(Domain domain, int count, std::uint64_t seed, const TrainGeometry& geometry,
                                        bool sparse)
{
    const auto [h, w] = geometry.native_size(domain);
    GeneratorConfig g;
    g.count = count;
    g.height = h;
    g.width = w;
    g.seed = seed;
    g.domain = domain;
    g.sparse = sparse;
    return generate_dataset(g);
}

} // namespace

SyntheticData make_synthetic_data(const SyntheticSplit& split, const TrainGeometry& geometry, std::uint64_t seed)
{
    SyntheticData d;
    d.train.indoor = generate_split(Domain::indoor, split.train_indoor, derive_seed(seed, 101), geometry, false);
    d.train.outdoor =
        generate_split(Domain::outdoor, split.train_outdoor, derive_seed(seed, 102), geometry, split.sparse_outdoor);
    d.validation.indoor = generate_split(Domain::indoor, split.val_indoor, derive_seed(seed, 201), geometry, false);
    d.validation.outdoor =
        generate_split(Domain::outdoor, split.val_outdoor, derive_seed(seed, 202), geometry, split.sparse_outdoor);
    if (split.sparse_outdoor) {
        for (auto& s : d.train.outdoor) {
            s.depth = densify_depth(s.depth, s.valid, s.rgb);
            std::fill(s.valid.data.begin(), s.valid.data.end(), std::uint8_t{1});
        }
    }
    for (auto* set : {&d.validation.indoor, &d.validation.outdoor})
        for (auto& s : *set)
            s.id = "val_" + s.id;
    return d;
}

void write_method_table(const std::vector<MethodRow>& rows, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write " + path);
    out << kMethodTableHeader << '\n';
    for (const auto& r : rows)
        out << r.method << ',' << metric_csv_row(r.metrics) << '\n';
}

std::vector<MethodRow> read_method_table(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IngestionError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || line != kMethodTableHeader)
        throw IngestionError("unexpected table header in " + path);
    std::vector<MethodRow> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw IngestionError("malformed row in " + path);
        MethodRow row;
        row.method = line.substr(0, comma);
        std::istringstream fields(line.substr(comma + 1));
        std::string cell;
        std::vector<double> v;
        while (std::getline(fields, cell, ','))
            v.push_back(std::stod(cell));
        if (v.size() != 7)
            throw IngestionError("malformed row in " + path);
        row.metrics = MetricReport{v[0], v[1], v[2], v[3], v[4], v[5], static_cast<std::int64_t>(v[6])};
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

/// FNV-1a, so variant seeds do not depend on the standard library's std::hash.
std::uint64_t name_hash(const std::string& name)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char c : name)
        h = (h ^ c) * 0x100000001b3ull;
    return h;
}

class Run
{
public:
    Run(ExperimentKind kind, const ExperimentConfig& config, const ProgressFn& progress)
        : kind_(kind), config_(config), progress_(progress)
    {
        config_.validate();
        result_.directory = (fs::path(config.output_dir) / to_string(kind)).string();
        fs::create_directories(dir() / "tables");
        fs::create_directories(dir() / "figures");
        nlohmann::json j = config_;
        j["experiment"] = to_string(kind);
        std::ofstream(dir() / "config.json") << j.dump(2) << '\n';
        result_.files.push_back((dir() / "config.json").string());
    }

    fs::path dir() const { return result_.directory; }

    void say(const std::string& msg) const
    {
        if (progress_)
            progress_("[" + to_string(kind_) + "] " + msg);
    }

    const SyntheticData& data()
    {
        if (!data_) {
            say("generating synthetic data");
            data_ = make_synthetic_data(config_.data, config_.geometry, config_.seed);
        }
        return *data_;
    }

    EvaluationOptions eval_options() const
    {
        EvaluationOptions o;
        o.net_height = config_.geometry.net_height;
        o.net_width = config_.geometry.net_width;
        o.tile_width = config_.geometry.net_width;
        return o;
    }

    /// Loads the configured checkpoint for `key`, or trains `cfg` on `train_set` and saves it.
    Checkpoint obtain(const std::string& name, const std::string& key, const ModelConfig& cfg,
                      const DomainSets& train_set)
    {
        if (auto it = config_.checkpoints.find(key); it != config_.checkpoints.end()) {
            if (!fs::exists(it->second))
                throw Error("checkpoint '" + it->second + "' (checkpoints." + key +
                            ") not found; create it with `dabc train` or `dabc experiment cls_vs_reg`, "
                            "or remove the entry to train in place");
            say("loading " + key + " checkpoint " + it->second);
            Checkpoint ckpt = load_checkpoint(it->second);
            if (!(ckpt.quantization == config_.quantization))
                throw Error("checkpoint '" + it->second + "' uses a different quantization than the config");
            if (ckpt.model.head != cfg.head)
                throw Error("checkpoint '" + it->second + "' has a " + to_string(ckpt.model.head) +
                            " head, expected " + to_string(cfg.head));
            return ckpt;
        }
        TrainSchedule schedule = config_.schedule;
        schedule.seed = derive_seed(config_.seed, name_hash(name));
        TrainOptions options;
        options.geometry = config_.geometry;
        options.validate_every = config_.validate_every;
        options.on_epoch = [&](const EpochLog& e) {
            std::ostringstream msg;
            msg << name << " epoch " << e.epoch << "/" << schedule.total_epochs() << " loss " << std::setprecision(4)
                << e.train_loss;
            for (const auto& [d, v] : e.validation)
                msg << " " << to_string(d) << " absRel " << v.first;
            say(msg.str());
        };
        say("training " + name + " on " + std::to_string(train_set.indoor.size()) + " indoor + " +
            std::to_string(train_set.outdoor.size()) + " outdoor samples");
        DomainSets val;
        if (!train_set.indoor.empty())
            val.indoor = data().validation.indoor;
        if (!train_set.outdoor.empty())
            val.outdoor = data().validation.outdoor;
        TrainResult r = train(cfg, schedule, config_.quantization, train_set, val, options);
        fs::create_directories(dir() / "checkpoints");
        fs::create_directories(dir() / "logs");
        const std::string ckpt_path = (dir() / "checkpoints" / (name + ".ckpt")).string();
        save_checkpoint(r.checkpoint, ckpt_path);
        write_training_log(r.log, (dir() / "logs" / (name + ".csv")).string());
        result_.files.push_back(ckpt_path);
        return r.checkpoint;
    }

    EvaluationReport evaluate_on(const std::string& name, const Checkpoint& ckpt, const std::vector<SceneSample>& set)
    {
        say("evaluating " + name);
        EvaluationReport rep = evaluate(ckpt, set, eval_options());
        result_.reports[name] = rep;
        return rep;
    }

    void table(const std::string& name, std::vector<MethodRow> rows)
    {
        const std::string path = (dir() / "tables" / (name + ".csv")).string();
        write_method_table(rows, path);
        result_.files.push_back(path);
        result_.tables[name] = std::move(rows);
    }

    std::string figure(const std::string& name) const { return (dir() / "figures" / (name + ".png")).string(); }
    std::string table_path(const std::string& name) const { return (dir() / "tables" / (name + ".csv")).string(); }

    ModelConfig classification() const { return config_.model; }
    ModelConfig regression() const
    {
        ModelConfig cfg = config_.model;
        cfg.head = HeadKind::regression;
        cfg.attention_enabled = false;
        return cfg;
    }

    void dump_gates(const Checkpoint& ckpt);

    ExperimentKind kind_;
    ExperimentConfig config_;
    ProgressFn progress_;
    std::optional<SyntheticData> data_;
    ExperimentResult result_;
};

void Run::dump_gates(const Checkpoint& ckpt)
{
    if (!ckpt.model.attention_enabled)
        throw Error("attention dump needs a model with attention enabled");
    Model<float> model = restore_model<float>(ckpt);
    Predictor predictor(model, ckpt.quantization, config_.geometry.net_height, config_.geometry.net_width,
                        config_.geometry.net_width);
    const auto& val = data().validation;

    const std::string csv_path = table_path("gates");
    std::ofstream csv(csv_path);
    csv << "input,id,domain,block,channel,value\n" << std::setprecision(9);
    std::size_t next_in = 0;
    std::size_t next_out = 0;
    for (int k = 0; k < config_.dump_inputs; ++k) {
        const bool want_indoor = k % 2 == 0;
        const SceneSample* s = nullptr;
        if ((want_indoor && next_in < val.indoor.size()) || next_out >= val.outdoor.size())
            s = next_in < val.indoor.size() ? &val.indoor[next_in++] : nullptr;
        else
            s = &val.outdoor[next_out++];
        if (!s)
            break;

        // the gates of the left-most tile describe the input
        const TilePlan plan = predictor.plan(s->height(), s->width());
        const RgbImage down = resize_bilinear(s->rgb, plan.down_height, plan.down_width);
        const auto [x0, x1] = plan.tiles.front();
        std::vector<AttentionRecord> records;
        predictor.predict_window(crop(down, 0, x0, plan.down_height, x1 - x0), &records);

        std::vector<PlotSeries> series;
        for (auto& r : records) {
            r.input = k;
            for (std::size_t c = 0; c < r.gate.size(); ++c)
                csv << k << ',' << s->id << ',' << to_string(s->domain) << ',' << r.block << ',' << c << ','
                    << r.gate[c] << '\n';
            series.push_back({"AFA block " + std::to_string(r.block), r.gate});
            result_.gates.push_back(r);
        }
        const std::string fig = figure("gates_input" + std::to_string(k));
        write_line_plot_png(series, fig, "AFA gate activations, " + to_string(s->domain) + " input " + s->id);
        result_.files.push_back(fig);

        const DepthMap pred = predictor.tiled(s->rgb);
        const double lo = s->domain == Domain::indoor ? kIndoorMinDepth : kOutdoorMinDepth;
        const double hi = s->domain == Domain::indoor ? kIndoorMaxDepth : kOutdoorMaxDepth;
        write_depth_png(pred, s->domain, figure("depth_input" + std::to_string(k)), lo, hi);
        write_depth_png(s->depth, s->domain, figure("gt_input" + std::to_string(k)), lo, hi, &s->valid);
    }
    result_.files.push_back(csv_path);
}

std::vector<MethodRow> domain_rows(const std::vector<std::pair<std::string, const EvaluationReport*>>& entries,
                                   Domain domain)
{
    std::vector<MethodRow> rows;
    for (const auto& [label, rep] : entries)
        rows.push_back({label, rep->per_domain.at(domain)});
    return rows;
}

void run_cls_vs_reg(Run& run)
{
    const auto& d = run.data();
    const DomainSets indoor_only{d.train.indoor, {}};
    const DomainSets outdoor_only{{}, d.train.outdoor};
    const auto val = d.validation.all();

    const Checkpoint reg_in = run.obtain("regression_indoor", "regression_indoor", run.regression(), indoor_only);
    const Checkpoint reg_out = run.obtain("regression_outdoor", "regression_outdoor", run.regression(), outdoor_only);
    const Checkpoint reg_mix = run.obtain("regression_mixed", "regression", run.regression(), d.train);
    const Checkpoint cls_in =
        run.obtain("classification_indoor", "classification_indoor", run.classification(), indoor_only);
    const Checkpoint cls_out =
        run.obtain("classification_outdoor", "classification_outdoor", run.classification(), outdoor_only);
    const Checkpoint cls_mix = run.obtain("classification_mixed", "classification", run.classification(), d.train);

    const auto r_in = run.evaluate_on("regression_indoor", reg_in, d.validation.indoor);
    const auto r_out = run.evaluate_on("regression_outdoor", reg_out, d.validation.outdoor);
    const auto r_mix = run.evaluate_on("regression_mixed", reg_mix, val);
    const auto c_in = run.evaluate_on("classification_indoor", cls_in, d.validation.indoor);
    const auto c_out = run.evaluate_on("classification_outdoor", cls_out, d.validation.outdoor);
    const auto c_mix = run.evaluate_on("classification_mixed", cls_mix, val);

    // starred rows are trained and evaluated on the same domain
    run.table("indoor", domain_rows({{"Regression*", &r_in},
                                     {"Regression", &r_mix},
                                     {"Classification*", &c_in},
                                     {"Classification", &c_mix}},
                                    Domain::indoor));
    run.table("outdoor", domain_rows({{"Regression*", &r_out},
                                      {"Regression", &r_mix},
                                      {"Classification*", &c_out},
                                      {"Classification", &c_mix}},
                                     Domain::outdoor));
    run.table("mixed", {{"Regression", r_mix.combined}, {"Classification", c_mix.combined}});
}

void run_attention_ablation(Run& run)
{
    const auto& d = run.data();
    ModelConfig plain = run.classification();
    plain.attention_enabled = false;
    const Checkpoint with = run.obtain("dabc", "classification", run.classification(), d.train);
    const Checkpoint without = run.obtain("dabc_no_attention", "no_attention", plain, d.train);
    const auto val = d.validation.all();
    const auto r_with = run.evaluate_on("dabc", with, val);
    const auto r_without = run.evaluate_on("dabc_no_attention", without, val);
    run.table("indoor", domain_rows({{"DABC w/o attention", &r_without}, {"DABC", &r_with}}, Domain::indoor));
    run.table("outdoor", domain_rows({{"DABC w/o attention", &r_without}, {"DABC", &r_with}}, Domain::outdoor));
    run.table("mixed", {{"DABC w/o attention", r_without.combined}, {"DABC", r_with.combined}});
    run.dump_gates(with);
}

void run_confusion(Run& run)
{
    const auto& d = run.data();
    const Checkpoint cls = run.obtain("classification", "classification", run.classification(), d.train);
    const Checkpoint reg = run.obtain("regression", "regression", run.regression(), d.train);
    const auto val = d.validation.all();

    const std::string mass_path = run.table_path("diagonal_mass");
    std::ofstream mass(mass_path);
    mass << "head,band,full_matrix,window_" << run.config_.window_lo << "_" << run.config_.window_hi << '\n'
         << std::setprecision(9);
    for (const auto& [name, ckpt] : {std::pair{std::string("classification"), &cls}, {"regression", &reg}}) {
        const EvaluationReport rep = run.evaluate_on(name, *ckpt, val);
        const ConfusionMatrix window = rep.confusion.submatrix(run.config_.window_lo, run.config_.window_hi);
        const std::string lohi = std::to_string(run.config_.window_lo) + "_" + std::to_string(run.config_.window_hi);
        rep.confusion.write_csv(run.table_path("confusion_" + name));
        window.write_csv(run.table_path("confusion_" + name + "_" + lohi));
        write_confusion_png(rep.confusion, run.figure("confusion_" + name), name + ", all labels");
        write_confusion_png(window, run.figure("confusion_" + name + "_" + lohi),
                            name + ", labels " + std::to_string(run.config_.window_lo) + "-" +
                                std::to_string(run.config_.window_hi));
        mass << name << ",5," << rep.confusion.diagonal_band_mass(5) << ',' << window.diagonal_band_mass(5) << '\n';
        for (const auto& f : {run.table_path("confusion_" + name), run.table_path("confusion_" + name + "_" + lohi),
                              run.figure("confusion_" + name), run.figure("confusion_" + name + "_" + lohi)})
            run.result_.files.push_back(f);
    }
    run.result_.files.push_back(mass_path);
}

void run_attention_dump(Run& run)
{
    const Checkpoint cls = run.obtain("classification", "classification", run.classification(), run.data().train);
    run.dump_gates(cls);
}

} // namespace

ExperimentResult run_experiment(ExperimentKind kind, const ExperimentConfig& config, const ProgressFn& progress)
{
    Run run(kind, config, progress);
    switch (kind) {
    case ExperimentKind::cls_vs_reg:
        run_cls_vs_reg(run);
        break;
    case ExperimentKind::attention_ablation:
        run_attention_ablation(run);
        break;
    case ExperimentKind::confusion:
        run_confusion(run);
        break;
    case ExperimentKind::attention_dump:
        run_attention_dump(run);
        break;
    }
    run.say("wrote " + run.result_.directory);
    return run.result_;
}

} // namespace dabc
