#pragma once

#include "dabc/checkpoint.hpp"
#include "dabc/dataset.hpp"
#include "dabc/inference.hpp"
#include "dabc/loss.hpp"
#include "dabc/metrics.hpp"
#include "dabc/preprocess.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dabc {

/// SGD hyper-parameters. Epochs are numbered from 1; phase 2 uses base_lr * lr_drop_factor.
struct TrainSchedule
{
    double base_lr = 0.001;
    double lr_drop_factor = 0.1;
    int phase1_epochs = 30;
    int phase2_epochs = 20;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    int batch_size = 8;
    std::uint64_t seed = 0;
    /// Global gradient-norm ceiling; 0 disables clipping.
    double grad_clip = 0.0;

    /// 15 + 10 epochs with a learning rate suited to the from-scratch toy network.
    static TrainSchedule toy();

    int total_epochs() const { return phase1_epochs + phase2_epochs; }
    double lr_at(int epoch) const;
    /// Throws ParameterError unless every field is positive (drop factor and momentum may be 0).
    void validate() const;
};

void to_json(nlohmann::json& j, const TrainSchedule& s);
void from_json(const nlohmann::json& j, TrainSchedule& s);

/// Momentum SGD with the weight decay folded into the gradient as an L2 term:
/// v = momentum * v + grad + decay * theta; theta -= lr * v.
/// With clipping enabled the gradient is first rescaled so its global L2 norm is at most `clip`.
template <typename T>
class Sgd
{
public:
    Sgd(ParameterList<T> params, double momentum, double weight_decay, double clip = 0.0);
    /// Returns the gradient norm before clipping.
    double step(double lr);

private:
    ParameterList<T> params_;
    std::vector<std::vector<T>> velocity_;
    double momentum_;
    double weight_decay_;
    double clip_;
};

/// Depth and mask of each example resampled (nearest) to the network output size, with labels.
Targets make_batch_targets(const std::vector<TrainExample>& batch, int height, int width, const QuantizationSpec& spec);

/// Owns a model and its optimizer; one call to `step` is one SGD iteration.
template <typename T>
class Trainer
{
public:
    Trainer(const ModelConfig& cfg, const TrainSchedule& schedule, const QuantizationSpec& spec);

    /// Forward, loss, backward and update. Returns the batch loss before the update; a
    /// non-finite loss skips the update.
    double step(const std::vector<TrainExample>& batch, double lr);
    double last_grad_norm() const { return grad_norm_; }
    /// Loss and head-output gradient for a batch without touching the parameters.
    LossResult<T> loss(const std::vector<TrainExample>& batch, Mode mode);

    Model<T>& model() { return model_; }
    const QuantizationSpec& spec() const { return spec_; }

private:
    Model<T> model_;
    Sgd<T> sgd_;
    QuantizationSpec spec_;
    Rng dropout_rng_;
    double grad_norm_ = 0.0;
};

/// Both domain sets of one split; either may be empty.
struct DomainSets
{
    std::vector<SceneSample> indoor;
    std::vector<SceneSample> outdoor;

    std::size_t size() const { return indoor.size() + outdoor.size(); }
    const SceneSample& at(const SampleRef& ref) const
    {
        return ref.domain == Domain::indoor ? indoor.at(ref.index) : outdoor.at(ref.index);
    }
    std::vector<SceneSample> all() const;
};

struct EvaluationOptions
{
    int net_height = 96;
    int net_width = 128;
    int tile_width = 128;
    /// Keep the stitched full-resolution predictions in the report.
    bool keep_predictions = false;
};

struct EvaluationReport
{
    std::map<Domain, MetricReport> per_domain;
    MetricReport combined;
    ConfusionMatrix confusion;
    std::map<Domain, ConfusionMatrix> confusion_per_domain;
    std::vector<DepthMap> predictions;
};

/// Eval-mode tiled inference over every sample, decoded per the model head. Metrics are
/// reported per domain tag present in the data and pooled; the confusion matrix re-quantizes
/// the predicted depth. Throws ShapeError if the data does not fit the network geometry and
/// EmptyEvaluationError for an empty dataset.
EvaluationReport evaluate(Model<float>& model, const std::vector<SceneSample>& data, const QuantizationSpec& spec,
                          const EvaluationOptions& options);
EvaluationReport evaluate(const Checkpoint& ckpt, const std::vector<SceneSample>& data,
                          const EvaluationOptions& options);

struct EpochLog
{
    int epoch = 0;
    int step = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    /// Validation absRel / SILog per domain; absent when that domain has no validation data.
    std::map<Domain, std::pair<double, double>> validation;
};

inline constexpr const char* kTrainingLogHeader =
    "epoch,step,lr,train_loss,indoor_absRel,indoor_SILog,outdoor_absRel,outdoor_SILog";

void write_training_log(const std::vector<EpochLog>& log, const std::string& path);

struct TrainOptions
{
    TrainGeometry geometry;
    bool augment = true;
    /// Validate after every n-th epoch and after the last one; 0 validates only at the end.
    int validate_every = 1;
    std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult
{
    Checkpoint checkpoint;
    std::vector<EpochLog> log;
};

/// Runs the full schedule. The stream mixes both domains when both training sets are
/// non-empty and is single-domain otherwise. Deterministic given schedule.seed. Throws
/// DivergenceError naming epoch and step if the loss becomes non-finite.
TrainResult train(const ModelConfig& cfg, const TrainSchedule& schedule, const QuantizationSpec& spec,
                  const DomainSets& train_set, const DomainSets& validation, const TrainOptions& options);

} // namespace dabc
