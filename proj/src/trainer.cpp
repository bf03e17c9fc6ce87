#include "dabc/trainer.hpp"

#include "dabc/dataset.hpp"
#include "dabc/errors.hpp"
#include "dabc/image_ops.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>

namespace dabc {

namespace {

enum SeedStream : std::uint64_t { kInitStream = 1, kSamplerStream = 2, kAugmentStream = 3, kDropoutStream = 4 };

} // namespace

TrainSchedule TrainSchedule::toy()
{
    TrainSchedule s;
    s.base_lr = 0.02;
    s.grad_clip = 5.0;
    s.phase1_epochs = 15;
    s.phase2_epochs = 10;
    return s;
}

double TrainSchedule::lr_at(int epoch) const
{
    return epoch <= phase1_epochs ? base_lr : base_lr * lr_drop_factor;
}

void TrainSchedule::validate() const
{
    if (!(base_lr > 0.0) || !(lr_drop_factor >= 0.0) || phase1_epochs < 0 || phase2_epochs < 0 ||
        total_epochs() < 1 || !(momentum >= 0.0 && momentum < 1.0) || !(weight_decay >= 0.0) || batch_size < 1 ||
        !(grad_clip >= 0.0))
        throw ParameterError("invalid training schedule");
}

void to_json(nlohmann::json& j, const TrainSchedule& s)
{
    j = nlohmann::json{{"base_lr", s.base_lr},           {"lr_drop_factor", s.lr_drop_factor},
                       {"phase1_epochs", s.phase1_epochs}, {"phase2_epochs", s.phase2_epochs},
                       {"momentum", s.momentum},         {"weight_decay", s.weight_decay},
                       {"batch_size", s.batch_size},     {"seed", s.seed},
                       {"grad_clip", s.grad_clip}};
}

void from_json(const nlohmann::json& j, TrainSchedule& s)
{
    TrainSchedule out = j.value("preset", std::string("default")) == "toy" ? TrainSchedule::toy() : TrainSchedule{};
    out.base_lr = j.value("base_lr", out.base_lr);
    out.lr_drop_factor = j.value("lr_drop_factor", out.lr_drop_factor);
    out.phase1_epochs = j.value("phase1_epochs", out.phase1_epochs);
    out.phase2_epochs = j.value("phase2_epochs", out.phase2_epochs);
    out.momentum = j.value("momentum", out.momentum);
    out.weight_decay = j.value("weight_decay", out.weight_decay);
    out.batch_size = j.value("batch_size", out.batch_size);
    out.seed = j.value("seed", out.seed);
    out.grad_clip = j.value("grad_clip", out.grad_clip);
    out.validate();
    s = out;
}

template <typename T>
Sgd<T>::Sgd(ParameterList<T> params, double momentum, double weight_decay, double clip)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay), clip_(clip)
{
    for (auto* p : params_)
        velocity_.emplace_back(p->value.size(), T(0));
}

template <typename T>
double Sgd<T>::step(double lr)
{
    double norm2 = 0.0;
    for (const auto* p : params_)
        for (const T g : p->grad.values())
            norm2 += static_cast<double>(g) * g;
    const double norm = std::sqrt(norm2);
    const T scale = static_cast<T>(clip_ > 0.0 && norm > clip_ ? clip_ / norm : 1.0);

    const T mu = static_cast<T>(momentum_);
    const T rate = static_cast<T>(lr);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Parameter<T>& p = *params_[i];
        const T decay = p.decay ? static_cast<T>(weight_decay_) : T(0);
        T* theta = p.value.data();
        const T* g = p.grad.data();
        T* v = velocity_[i].data();
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            v[k] = mu * v[k] + scale * g[k] + decay * theta[k];
            theta[k] -= rate * v[k];
        }
    }
    return norm;
}

Targets make_batch_targets(const std::vector<TrainExample>& batch, int height, int width, const QuantizationSpec& spec)
{
    const int n = static_cast<int>(batch.size());
    Tensor<double> depth(n, 1, height, width);
    Tensor<std::uint8_t> mask(n, 1, height, width);
    for (int i = 0; i < n; ++i) {
        const DepthMap d = resize_nearest(batch[i].depth, height, width);
        const ValidMask m = resize_nearest(batch[i].valid, height, width);
        std::copy(d.data.begin(), d.data.end(), depth.plane(i, 0));
        std::copy(m.data.begin(), m.data.end(), mask.plane(i, 0));
    }
    return make_targets(std::move(depth), std::move(mask), spec);
}

template <typename T>
Trainer<T>::Trainer(const ModelConfig& cfg, const TrainSchedule& schedule, const QuantizationSpec& spec)
    : model_((cfg.validate(spec), cfg), derive_seed(schedule.seed, kInitStream)),
      sgd_(model_.parameters(), schedule.momentum, schedule.weight_decay, schedule.grad_clip), spec_(spec),
      dropout_rng_(derive_seed(schedule.seed, kDropoutStream))
{
    schedule.validate();
}

template <typename T>
LossResult<T> Trainer<T>::loss(const std::vector<TrainExample>& batch, Mode mode)
{
    std::vector<const RgbImage*> images;
    for (const auto& ex : batch)
        images.push_back(&ex.rgb);
    const Tensor<T> input = make_input(images).template cast<T>();
    const ForwardOutput<T> out = model_.forward(input, mode, mode == Mode::train ? &dropout_rng_ : nullptr);
    const Targets targets = make_batch_targets(batch, out.scores.h(), out.scores.w(), spec_);
    return model_.config().head == HeadKind::classification ? classification_loss(out.scores, targets)
                                                            : regression_loss(out.scores, targets);
}

template <typename T>
double Trainer<T>::step(const std::vector<TrainExample>& batch, double lr)
{
    LossResult<T> r = loss(batch, Mode::train);
    if (!std::isfinite(r.loss))
        return r.loss;
    model_.zero_grad();
    model_.backward(r.grad);
    grad_norm_ = sgd_.step(lr);
    return r.loss;
}

std::vector<SceneSample> DomainSets::all() const
{
    std::vector<SceneSample> out = indoor;
    out.insert(out.end(), outdoor.begin(), outdoor.end());
    return out;
}

EvaluationReport evaluate(Model<float>& model, const std::vector<SceneSample>& data, const QuantizationSpec& spec,
                          const EvaluationOptions& options)
{
    if (data.empty())
        throw EmptyEvaluationError("evaluation set is empty");
    Predictor predictor(model, spec, options.net_height, options.net_width, options.tile_width);

    EvaluationReport report;
    report.confusion = ConfusionMatrix(spec.num_classes());
    std::map<Domain, MetricAccumulator> acc;
    MetricAccumulator pooled;
    for (const auto& sample : data) {
        check_sample(sample);
        DepthMap pred;
        try {
            pred = predictor.tiled(sample.rgb);
        } catch (const ParameterError& e) {
            throw ShapeError("sample '" + sample.id + "' does not fit the network geometry: " + e.what());
        }
        acc[sample.domain].add(pred, sample.depth, sample.valid);
        pooled.add(pred, sample.depth, sample.valid);
        accumulate_confusion(report.confusion, pred, sample.depth, sample.valid, spec);
        auto [it, inserted] = report.confusion_per_domain.try_emplace(sample.domain, spec.num_classes());
        accumulate_confusion(it->second, pred, sample.depth, sample.valid, spec);
        if (options.keep_predictions)
            report.predictions.push_back(std::move(pred));
    }
    for (const auto& [domain, a] : acc)
        report.per_domain[domain] = a.report();
    report.combined = pooled.report();
    return report;
}

EvaluationReport evaluate(const Checkpoint& ckpt, const std::vector<SceneSample>& data,
                          const EvaluationOptions& options)
{
    Model<float> model = restore_model<float>(ckpt);
    return evaluate(model, data, ckpt.quantization, options);
}

void write_training_log(const std::vector<EpochLog>& log, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write " + path);
    out << kTrainingLogHeader << '\n' << std::setprecision(9);
    auto field = [&](const EpochLog& e, Domain d, bool first) {
        auto it = e.validation.find(d);
        out << ',';
        if (it != e.validation.end())
            out << (first ? it->second.first : it->second.second);
    };
    for (const auto& e : log) {
        out << e.epoch << ',' << e.step << ',' << e.lr << ',' << e.train_loss;
        field(e, Domain::indoor, true);
        field(e, Domain::indoor, false);
        field(e, Domain::outdoor, true);
        field(e, Domain::outdoor, false);
        out << '\n';
    }
}

TrainResult train(const ModelConfig& cfg, const TrainSchedule& schedule, const QuantizationSpec& spec,
                  const DomainSets& train_set, const DomainSets& validation, const TrainOptions& options)
{
    schedule.validate();
    options.geometry.validate();
    if (train_set.size() == 0)
        throw ParameterError("training set is empty");

    std::function<std::vector<Batch>(int)> epoch_batches;
    if (!train_set.indoor.empty() && !train_set.outdoor.empty()) {
        auto sampler = std::make_shared<MixedBatchSampler>(train_set.indoor.size(), train_set.outdoor.size(),
                                                           schedule.batch_size,
                                                           derive_seed(schedule.seed, kSamplerStream));
        epoch_batches = [sampler](int e) { return sampler->epoch(e); };
    } else {
        const Domain d = train_set.indoor.empty() ? Domain::outdoor : Domain::indoor;
        auto sampler = std::make_shared<DomainBatchSampler>(d, train_set.size(), schedule.batch_size,
                                                            derive_seed(schedule.seed, kSamplerStream));
        epoch_batches = [sampler](int e) { return sampler->epoch(e); };
    }

    Trainer<float> trainer(cfg, schedule, spec);
    Rng augment_rng(derive_seed(schedule.seed, kAugmentStream));
    EvaluationOptions eval_options;
    eval_options.net_height = options.geometry.net_height;
    eval_options.net_width = options.geometry.net_width;
    eval_options.tile_width = options.geometry.net_width;

    TrainResult result;
    int step = 0;
    const int epochs = schedule.total_epochs();
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        const double lr = schedule.lr_at(epoch);
        double loss_sum = 0.0;
        int batches = 0;
        for (const Batch& batch : epoch_batches(epoch)) {
            std::vector<TrainExample> examples;
            examples.reserve(batch.size());
            for (const SampleRef& ref : batch) {
                const SceneSample& s = train_set.at(ref);
                examples.push_back(options.augment ? preprocess_train(s, options.geometry, augment_rng)
                                                   : preprocess_train(s, options.geometry, Augmentation{}));
            }
            ++step;
            const double loss = trainer.step(examples, lr);
            if (!std::isfinite(loss)) {
                std::ostringstream msg;
                msg << "training diverged: non-finite loss at epoch " << epoch << ", step " << step;
                throw DivergenceError(msg.str());
            }
            loss_sum += loss;
            ++batches;
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.step = step;
        entry.lr = lr;
        entry.train_loss = loss_sum / std::max(1, batches);
        const bool validate_now =
            validation.size() > 0 &&
            (epoch == epochs || (options.validate_every > 0 && epoch % options.validate_every == 0));
        if (validate_now) {
            const EvaluationReport rep = evaluate(trainer.model(), validation.all(), spec, eval_options);
            for (const auto& [domain, m] : rep.per_domain)
                entry.validation[domain] = {m.absRel, m.SILog};
        }
        if (options.on_epoch)
            options.on_epoch(entry);
        result.log.push_back(std::move(entry));
    }

    result.checkpoint =
        capture_checkpoint(trainer.model(), spec, ScheduleState{epochs, schedule.lr_at(epochs)}, schedule.seed);
    return result;
}

template class Sgd<float>;
template class Sgd<double>;
template class Trainer<float>;
template class Trainer<double>;

} // namespace dabc
