#include "dabc/cli.hpp"

#include "dabc/dataset.hpp"
#include "dabc/errors.hpp"
#include "dabc/image_io.hpp"
#include "dabc/render.hpp"
#include "dabc/run_config.hpp"
#include "dabc/synthetic.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;

namespace dabc {

namespace {

struct CommonOptions
{
    std::string config;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& opts)
{
    cmd->add_option("--config", opts.config, "JSON configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", opts.seed, "Random seed (overrides the config)");
}

RunConfig load_run_config(const CommonOptions& common)
{
    RunConfig cfg;
    if (!common.config.empty())
        cfg = read_json_file(common.config).get<RunConfig>();
    if (common.seed) {
        cfg.schedule.seed = *common.seed;
        cfg.data_seed = *common.seed;
    }
    return cfg;
}

EvaluationOptions eval_options(const TrainGeometry& g)
{
    EvaluationOptions o;
    o.net_height = g.net_height;
    o.net_width = g.net_width;
    o.tile_width = g.net_width;
    return o;
}

void print_report(std::ostream& out, const std::string& label, const MetricReport& m)
{
    out << std::left << std::setw(10) << label << std::right << std::fixed << std::setprecision(4)
        << " absRel " << m.absRel << "  sqRel " << m.sqRel << "  imae " << m.imae << "  irmse " << m.irmse
        << "  SI " << m.SI << "  SILog " << m.SILog << "  Q " << m.Q << '\n';
    out.unsetf(std::ios::floatfield);
}

std::vector<SceneSample> load_eval_sets(const std::string& indoor, const std::string& outdoor)
{
    std::vector<SceneSample> data;
    if (!indoor.empty())
        data = load_folder_dataset(indoor, Domain::indoor);
    if (!outdoor.empty()) {
        auto more = load_folder_dataset(outdoor, Domain::outdoor);
        data.insert(data.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
    }
    return data;
}

/// Scores stored `<id>.depth.pfm` predictions against the ground-truth samples.
EvaluationReport evaluate_prediction_folder(const std::string& dir, const std::vector<SceneSample>& data,
                                            const QuantizationSpec& spec)
{
    if (data.empty())
        throw EmptyEvaluationError("evaluation set is empty");
    EvaluationReport report;
    report.confusion = ConfusionMatrix(spec.num_classes());
    std::map<Domain, MetricAccumulator> acc;
    MetricAccumulator pooled;
    for (const auto& s : data) {
        const std::string path = (fs::path(dir) / (s.id + ".depth.pfm")).string();
        if (!fs::exists(path))
            throw IngestionError("missing prediction " + path);
        const Grid<float> raw = read_pfm(path);
        DepthMap pred(raw.height, raw.width);
        std::copy(raw.data.begin(), raw.data.end(), pred.data.begin());
        acc[s.domain].add(pred, s.depth, s.valid);
        pooled.add(pred, s.depth, s.valid);
        accumulate_confusion(report.confusion, pred, s.depth, s.valid, spec);
    }
    for (const auto& [d, a] : acc)
        report.per_domain[d] = a.report();
    report.combined = pooled.report();
    return report;
}

int cmd_generate(const CommonOptions& common, const std::string& out_dir, std::optional<int> count,
                 std::optional<int> height, std::optional<int> width, const std::string& domain, bool sparse,
                 std::ostream& out)
{
    GeneratorConfig g;
    bool sized = false;
    if (!common.config.empty()) {
        const auto j = read_json_file(common.config);
        g = j.get<GeneratorConfig>();
        sized = j.contains("height") || j.contains("width");
    }
    if (!domain.empty())
        g.domain = domain_from_string(domain);
    if (count)
        g.count = *count;
    if (common.seed)
        g.seed = *common.seed;
    if (sparse)
        g.sparse = true;
    if (!sized && !height && !width) {
        const auto [h, w] = TrainGeometry::toy().native_size(g.domain);
        g.height = h;
        g.width = w;
    }
    if (height)
        g.height = *height;
    if (width)
        g.width = *width;
    nlohmann::json check = g;
    g = check.get<GeneratorConfig>();
    const auto samples = generate_dataset(g);
    save_folder_dataset(samples, out_dir);
    out << "wrote " << samples.size() << ' ' << to_string(g.domain) << " samples (" << g.height << "x" << g.width
        << ") to " << out_dir << '\n';
    return 0;
}

int cmd_train(const CommonOptions& common, const std::string& ckpt_path, std::string log_path,
              const std::map<std::string, std::string>& dirs, std::ostream& out)
{
    RunConfig cfg = load_run_config(common);
    for (const auto& [key, dir] : dirs) {
        if (dir.empty())
            continue;
        if (key == "train_indoor")
            cfg.train_indoor = dir;
        else if (key == "train_outdoor")
            cfg.train_outdoor = dir;
        else if (key == "val_indoor")
            cfg.val_indoor = dir;
        else if (key == "val_outdoor")
            cfg.val_outdoor = dir;
    }
    cfg.validate();
    const SyntheticData data = load_run_data(cfg);

    TrainOptions options;
    options.geometry = cfg.geometry;
    options.validate_every = cfg.validate_every;
    options.on_epoch = [&](const EpochLog& e) {
        out << "epoch " << e.epoch << " step " << e.step << " lr " << e.lr << " loss " << e.train_loss;
        for (const auto& [d, v] : e.validation)
            out << "  " << to_string(d) << " absRel " << v.first << " SILog " << v.second;
        out << std::endl;
    };
    const TrainResult r = train(cfg.model, cfg.schedule, cfg.quantization, data.train, data.validation, options);

    if (const auto parent = fs::path(ckpt_path).parent_path(); !parent.empty())
        fs::create_directories(parent);
    save_checkpoint(r.checkpoint, ckpt_path);
    if (log_path.empty())
        log_path = ckpt_path + ".log.csv";
    write_training_log(r.log, log_path);
    nlohmann::json resolved = cfg;
    std::ofstream(ckpt_path + ".json") << resolved.dump(2) << '\n';
    out << "wrote " << ckpt_path << ", " << log_path << '\n';
    return 0;
}

int cmd_eval(const CommonOptions& common, const std::string& ckpt_path, const std::string& predictions,
             const std::string& indoor, const std::string& outdoor, const std::string& csv_path,
             const std::string& json_path, const std::string& confusion_path, std::ostream& out)
{
    const RunConfig cfg = load_run_config(common);
    if (ckpt_path.empty() == predictions.empty())
        throw ParameterError("eval needs exactly one of --checkpoint or --predictions");
    if (indoor.empty() && outdoor.empty())
        throw ParameterError("eval needs --indoor and/or --outdoor ground-truth folders");
    const auto data = load_eval_sets(indoor, outdoor);

    EvaluationReport rep;
    if (!ckpt_path.empty()) {
        const Checkpoint ckpt = load_checkpoint(ckpt_path);
        rep = evaluate(ckpt, data, eval_options(cfg.geometry));
    } else {
        rep = evaluate_prediction_folder(predictions, data, cfg.quantization);
    }

    for (const auto& [d, m] : rep.per_domain)
        print_report(out, to_string(d), m);
    print_report(out, "combined", rep.combined);
    if (!csv_path.empty())
        write_metric_csv({rep.combined}, csv_path);
    if (!json_path.empty()) {
        nlohmann::json j;
        j["combined"] = rep.combined;
        for (const auto& [d, m] : rep.per_domain)
            j[to_string(d)] = m;
        std::ofstream(json_path) << j.dump(2) << '\n';
    }
    if (!confusion_path.empty())
        rep.confusion.write_csv(confusion_path);
    return 0;
}

int cmd_infer(const CommonOptions& common, const std::string& ckpt_path, const std::string& input,
              const std::string& output, const std::string& color, const std::string& domain, std::ostream& out)
{
    const RunConfig cfg = load_run_config(common);
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    Model<float> model = restore_model<float>(ckpt);
    Predictor predictor(model, ckpt.quantization, cfg.geometry.net_height, cfg.geometry.net_width,
                        cfg.geometry.net_width);
    const RgbImage image = read_png(input);
    const DepthMap depth = predictor.tiled(image);
    write_pfm(depth, output);
    if (!color.empty()) {
        const Domain d = domain_from_string(domain);
        write_depth_png(depth, d, color, d == Domain::indoor ? kIndoorMinDepth : kOutdoorMinDepth,
                        d == Domain::indoor ? kIndoorMaxDepth : kOutdoorMaxDepth);
    }
    out << "wrote " << output << " (" << depth.height << "x" << depth.width << ")\n";
    return 0;
}

int cmd_experiment(const CommonOptions& common, const std::string& kind, const std::string& out_dir,
                   std::ostream& out)
{
    ExperimentConfig cfg;
    if (!common.config.empty())
        cfg = read_json_file(common.config).get<ExperimentConfig>();
    if (common.seed)
        cfg.seed = *common.seed;
    if (!out_dir.empty())
        cfg.output_dir = out_dir;
    const ExperimentResult r =
        run_experiment(experiment_from_string(kind), cfg, [&](const std::string& msg) { out << msg << std::endl; });
    for (const auto& [name, rows] : r.tables) {
        out << "table " << name << '\n';
        for (const auto& row : rows)
            print_report(out, row.method, row.metrics);
    }
    return 0;
}

int cmd_plot(const std::string& kind, const std::string& input, const std::string& output, const std::string& domain,
             const std::vector<int>& window, std::ostream& out)
{
    if (kind == "depth") {
        const Grid<float> raw = read_pfm(input);
        DepthMap depth(raw.height, raw.width);
        std::copy(raw.data.begin(), raw.data.end(), depth.data.begin());
        ValidMask mask(raw.height, raw.width);
        for (std::size_t k = 0; k < raw.size(); ++k)
            mask.data[k] = raw.data[k] > 0.0f;
        const Domain d = domain_from_string(domain);
        write_depth_png(depth, d, output, d == Domain::indoor ? kIndoorMinDepth : kOutdoorMinDepth,
                        d == Domain::indoor ? kIndoorMaxDepth : kOutdoorMaxDepth, &mask);
    } else if (kind == "confusion") {
        ConfusionMatrix cm = ConfusionMatrix::read_csv(input);
        std::string title = fs::path(input).stem().string();
        if (!window.empty()) {
            if (window.size() != 2)
                throw ParameterError("--window takes two labels");
            cm = cm.submatrix(window[0] - cm.offset(), window[1] - cm.offset());
            title += ", labels " + std::to_string(window[0]) + "-" + std::to_string(window[1]);
        }
        write_confusion_png(cm, output, title);
    } else if (kind == "gates") {
        std::ifstream in(input);
        if (!in)
            throw IngestionError("cannot read " + input);
        std::string line;
        std::getline(in, line);
        if (line != "input,id,domain,block,channel,value")
            throw IngestionError("not a gate table: " + input);
        std::map<int, std::map<int, PlotSeries>> by_input;
        std::map<int, std::string> names;
        while (std::getline(in, line)) {
            std::istringstream row(line);
            std::string cell[6];
            for (auto& c : cell)
                if (!std::getline(row, c, ','))
                    throw IngestionError("malformed gate row in " + input);
            const int k = std::stoi(cell[0]);
            const int block = std::stoi(cell[3]);
            auto& series = by_input[k][-block];
            series.label = "AFA block " + cell[3];
            series.values.push_back(std::stod(cell[5]));
            names[k] = cell[2] + " input " + cell[1];
        }
        fs::create_directories(output);
        for (const auto& [k, blocks] : by_input) {
            std::vector<PlotSeries> series;
            for (const auto& [b, s] : blocks)
                series.push_back(s);
            write_line_plot_png(series, (fs::path(output) / ("gates_input" + std::to_string(k) + ".png")).string(),
                                "AFA gate activations, " + names[k]);
        }
    } else {
        throw ParameterError("unknown plot kind '" + kind + "' (expected depth, confusion or gates)");
    }
    out << "wrote " << output << '\n';
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Depth prediction by attention-based classification over log-depth bins", "dabc"};
    app.require_subcommand(1);

    CommonOptions gen_common, train_common, eval_common, infer_common, exp_common, plot_common;

    auto* gen = app.add_subcommand("generate", "Write a synthetic RGB-D folder dataset");
    add_common(gen, gen_common);
    std::string gen_out;
    std::optional<int> gen_count, gen_height, gen_width;
    std::string gen_domain;
    bool gen_sparse = false;
    gen->add_option("--out", gen_out, "Output folder")->required();
    gen->add_option("--count", gen_count, "Number of samples");
    gen->add_option("--height", gen_height, "Image height");
    gen->add_option("--width", gen_width, "Image width");
    gen->add_option("--domain", gen_domain, "indoor or outdoor")->check(CLI::IsMember({"indoor", "outdoor"}));
    gen->add_flag("--sparse", gen_sparse, "Keep at most 5% of outdoor depth pixels");

    auto* tr = app.add_subcommand("train", "Train a model");
    add_common(tr, train_common);
    std::string tr_out = "model.ckpt", tr_log;
    std::map<std::string, std::string> tr_dirs{
        {"train_indoor", ""}, {"train_outdoor", ""}, {"val_indoor", ""}, {"val_outdoor", ""}};
    tr->add_option("--out", tr_out, "Checkpoint path");
    tr->add_option("--log", tr_log, "Training log CSV (default <out>.log.csv)");
    tr->add_option("--train-indoor", tr_dirs["train_indoor"], "Indoor training folder")->check(CLI::ExistingDirectory);
    tr->add_option("--train-outdoor", tr_dirs["train_outdoor"], "Outdoor training folder")
        ->check(CLI::ExistingDirectory);
    tr->add_option("--val-indoor", tr_dirs["val_indoor"], "Indoor validation folder")->check(CLI::ExistingDirectory);
    tr->add_option("--val-outdoor", tr_dirs["val_outdoor"], "Outdoor validation folder")
        ->check(CLI::ExistingDirectory);

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint or a folder of predictions");
    add_common(ev, eval_common);
    std::string ev_ckpt, ev_pred, ev_indoor, ev_outdoor, ev_csv, ev_json, ev_confusion;
    ev->add_option("--checkpoint", ev_ckpt, "Checkpoint to evaluate")->check(CLI::ExistingFile);
    ev->add_option("--predictions", ev_pred, "Folder of <id>.depth.pfm predictions")->check(CLI::ExistingDirectory);
    ev->add_option("--indoor", ev_indoor, "Indoor ground-truth folder")->check(CLI::ExistingDirectory);
    ev->add_option("--outdoor", ev_outdoor, "Outdoor ground-truth folder")->check(CLI::ExistingDirectory);
    ev->add_option("--out", ev_csv, "Metric CSV of the pooled evaluation");
    ev->add_option("--json", ev_json, "Per-domain and pooled metrics as JSON");
    ev->add_option("--confusion", ev_confusion, "Confusion matrix CSV");

    auto* inf = app.add_subcommand("infer", "Predict depth for one RGB image");
    add_common(inf, infer_common);
    std::string inf_ckpt, inf_in, inf_out, inf_color, inf_domain = "indoor";
    inf->add_option("--checkpoint", inf_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    inf->add_option("--input", inf_in, "RGB PNG")->required()->check(CLI::ExistingFile);
    inf->add_option("--output", inf_out, "Depth PFM")->required();
    inf->add_option("--color", inf_color, "Colour-mapped depth PNG");
    inf->add_option("--domain", inf_domain, "Colour map: indoor or outdoor")
        ->check(CLI::IsMember({"indoor", "outdoor"}));

    auto* ex = app.add_subcommand("experiment", "Run an analysis on synthetic mixed data");
    add_common(ex, exp_common);
    std::string ex_kind, ex_out;
    ex->add_option("kind", ex_kind, "cls_vs_reg, attention_ablation, confusion or attention_dump")
        ->required()
        ->check(CLI::IsMember({"cls_vs_reg", "attention_ablation", "confusion", "attention_dump"}));
    ex->add_option("--out", ex_out, "Report root (overrides output_dir)");

    auto* pl = app.add_subcommand("plot", "Render a depth map, confusion matrix or gate table");
    add_common(pl, plot_common);
    std::string pl_kind, pl_in, pl_out, pl_domain = "indoor";
    std::vector<int> pl_window;
    pl->add_option("kind", pl_kind, "depth, confusion or gates")
        ->required()
        ->check(CLI::IsMember({"depth", "confusion", "gates"}));
    pl->add_option("--input", pl_in, "Input file")->required()->check(CLI::ExistingFile);
    pl->add_option("--output", pl_out, "Output PNG (a folder for gates)")->required();
    pl->add_option("--domain", pl_domain, "Colour map for depth")->check(CLI::IsMember({"indoor", "outdoor"}));
    pl->add_option("--window", pl_window, "Label window lo hi for confusion plots")->expected(2);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n' << "run `dabc --help` for usage\n";
        return 2;
    }

    try {
        if (*gen)
            return cmd_generate(gen_common, gen_out, gen_count, gen_height, gen_width, gen_domain, gen_sparse, out);
        if (*tr)
            return cmd_train(train_common, tr_out, tr_log, tr_dirs, out);
        if (*ev)
            return cmd_eval(eval_common, ev_ckpt, ev_pred, ev_indoor, ev_outdoor, ev_csv, ev_json, ev_confusion, out);
        if (*inf)
            return cmd_infer(infer_common, inf_ckpt, inf_in, inf_out, inf_color, inf_domain, out);
        if (*ex)
            return cmd_experiment(exp_common, ex_kind, ex_out, out);
        if (*pl)
            return cmd_plot(pl_kind, pl_in, pl_out, pl_domain, pl_window, out);
    } catch (const ParameterError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

} // namespace dabc
