#pragma once

#include "dabc/layers.hpp"
#include "dabc/quantizer.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace dabc {

enum class HeadKind { classification, regression };
enum class Mode { train, eval };

std::string to_string(HeadKind head);
HeadKind head_from_string(const std::string& text);

/// Architecture of the encoder / fusion decoder / head network.
struct ModelConfig
{
    /// Encoder channels at strides /4, /8, /16, /32.
    std::array<int, 4> stage_widths{32, 64, 128, 256};
    /// Channel width of the fusion decoder.
    int fusion_width = 64;
    /// Width of the fusion level attached to the deepest encoder stage; 0 means fusion_width.
    int top_fusion_width = 0;
    int num_classes = 151;
    bool attention_enabled = true;
    HeadKind head = HeadKind::classification;
    double dropout_rate = 0.5;

    int top_width() const { return top_fusion_width > 0 ? top_fusion_width : fusion_width; }
    int output_channels() const { return head == HeadKind::classification ? num_classes : 1; }

    /// Throws ParameterError on non-positive widths or an out-of-range dropout rate.
    void validate() const;
    /// Additionally checks the class count against the quantization for classification heads.
    void validate(const QuantizationSpec& spec) const;

    static ModelConfig classification_default();
    /// Regression baseline: single-channel log10-depth head, attention removed.
    static ModelConfig regression_default();
};

void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);

/// Channel gate of one AFA block for one input image. Blocks are numbered by the
/// encoder stage they fuse (4 = deepest, applied first).
struct AttentionRecord
{
    int block = 0;
    int input = 0;
    std::vector<double> gate;
};

/// conv - relu - conv with an identity skip, optionally followed by a relu.
template <typename T>
class ResidualUnit
{
public:
    ResidualUnit() = default;
    ResidualUnit(const std::string& name, int channels, bool relu_out);
    void init(Rng& rng, double input_gain);
    Tensor<T> forward(const Tensor<T>& x);
    Tensor<T> backward(const Tensor<T>& dy);
    void collect(ParameterList<T>& out);

    Conv2d<T> first;
    Conv2d<T> second;

private:
    bool relu_out_ = false;
    Tensor<T> hidden_;
    Tensor<T> output_;
};

/// Feature transfer block: 1x1 projection to the fusion width followed by one residual unit.
template <typename T>
class FeatureTransfer
{
public:
    FeatureTransfer() = default;
    FeatureTransfer(const std::string& name, int in_channels, int out_channels);
    void init(Rng& rng, double input_gain);
    Tensor<T> forward(const Tensor<T>& x);
    Tensor<T> backward(const Tensor<T>& dy);
    void collect(ParameterList<T>& out);

    Conv2d<T> project;
    ResidualUnit<T> residual;
};

/// Attention-based feature aggregation. A channel gate a in (0,1)^C is computed from the
/// pooled concatenation of both inputs (fc - relu - fc - sigmoid, hidden width C/4) and the
/// block returns high + a * low. With attention disabled it returns high + low.
template <typename T>
class AttentionAggregation
{
public:
    AttentionAggregation() = default;
    AttentionAggregation(const std::string& name, int channels, bool enabled);
    void init(Rng& rng);

    /// `gate` receives one vector per batch element when attention is enabled.
    Tensor<T> forward(const Tensor<T>& high, const Tensor<T>& low, std::vector<std::vector<double>>* gate = nullptr);
    /// Returns {d high, d low}.
    std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& dy);
    void collect(ParameterList<T>& out);

    bool enabled() const { return enabled_; }
    int channels() const { return channels_; }
    int hidden_width() const { return squeeze.out_channels(); }

    Conv2d<T> squeeze;
    Conv2d<T> excite;

private:
    int channels_ = 0;
    bool enabled_ = true;
    Tensor<T> high_;
    Tensor<T> low_;
    Tensor<T> hidden_;
    Tensor<T> gate_;
};

/// 1x1 reduction of the deepest features, global average pooling, spatial broadcast.
template <typename T>
class GlobalContext
{
public:
    GlobalContext() = default;
    GlobalContext(const std::string& name, int in_channels, int out_channels);
    void init(Rng& rng);
    Tensor<T> forward(const Tensor<T>& f4);
    Tensor<T> backward(const Tensor<T>& dy);
    void collect(ParameterList<T>& out);

    Conv2d<T> reduce;

private:
    int h_ = 0;
    int w_ = 0;
};

/// Four-stage residual encoder producing features at strides /4, /8, /16, /32.
template <typename T>
class Encoder
{
public:
    Encoder() = default;
    explicit Encoder(const ModelConfig& cfg);
    void init(Rng& rng);
    std::array<Tensor<T>, 4> forward(const Tensor<T>& image);
    /// Takes the gradients with respect to each stage output, returns the image gradient.
    Tensor<T> backward(std::array<Tensor<T>, 4> grads);
    void collect(ParameterList<T>& out);

    Conv2d<T> stem1;
    Conv2d<T> stem2;
    std::array<Conv2d<T>, 4> down; // down[0] unused: stage 1 is fed by the stem
    std::array<ResidualUnit<T>, 4> stages;

private:
    Tensor<T> stem1_out_;
    Tensor<T> stem2_out_;
    std::array<Tensor<T>, 4> down_out_;
};

/// Progressive fusion from the global context down to stride /4.
template <typename T>
class Decoder
{
public:
    Decoder() = default;
    explicit Decoder(const ModelConfig& cfg);
    void init(Rng& rng);
    Tensor<T> forward(const std::array<Tensor<T>, 4>& features, const Tensor<T>& context,
                      std::vector<AttentionRecord>* records = nullptr);
    /// Returns the gradients of the four encoder features and of the context.
    std::pair<std::array<Tensor<T>, 4>, Tensor<T>> backward(const Tensor<T>& dy);
    void collect(ParameterList<T>& out);

    /// Index 0 handles stage 4, index 3 handles stage 1.
    std::array<FeatureTransfer<T>, 4> lateral;
    std::array<AttentionAggregation<T>, 4> fuse;
    std::array<FeatureTransfer<T>, 4> refine;

private:
    std::array<Shape, 4> pre_upsample_;
};

/// Dropout and a 3x3 convolution to class logits (or a single log10-depth channel).
template <typename T>
class PredictionHead
{
public:
    PredictionHead() = default;
    PredictionHead(const std::string& name, int in_channels, int out_channels, double dropout_rate);
    void init(Rng& rng);
    Tensor<T> forward(const Tensor<T>& x, bool train, Rng* rng);
    Tensor<T> backward(const Tensor<T>& dy);
    void collect(ParameterList<T>& out);

    Conv2d<T> conv;
    Dropout<T> dropout;
};

template <typename T>
struct ForwardOutput
{
    /// Classification: per-pixel softmax probabilities (N, num_classes, H/4, W/4).
    /// Regression: log10 depth (N, 1, H/4, W/4).
    Tensor<T> scores;
    std::vector<AttentionRecord> attention;
};

template <typename T>
class Model
{
public:
    Model() = default;
    /// Builds the network and draws its initial weights from `seed`.
    explicit Model(const ModelConfig& cfg, std::uint64_t seed = 0);

    const ModelConfig& config() const { return cfg_; }

    /// Throws ShapeError unless the image is (N, 3, H, W) with H and W divisible by 32.
    ForwardOutput<T> forward(const Tensor<T>& image, Mode mode, Rng* rng = nullptr);
    /// Backpropagates the gradient with respect to the head output (the logits for
    /// classification, the log-depth map for regression). Returns the image gradient.
    Tensor<T> backward(const Tensor<T>& d_output);

    /// Pre-softmax logits of the last forward call.
    const Tensor<T>& logits() const { return logits_; }

    ParameterList<T> parameters();
    std::size_t parameter_count() const;
    void zero_grad();

    Encoder<T> encoder;
    GlobalContext<T> context;
    Decoder<T> decoder;
    PredictionHead<T> head;

private:
    ModelConfig cfg_;
    Tensor<T> logits_;
};

/// Number of scalar parameters of the network described by `cfg`.
std::size_t parameter_count(const ModelConfig& cfg);

/// Throws ShapeError unless the image is (N, 3, H, W) with H, W positive multiples of 32.
void check_input_geometry(const Shape& image);

/// Copies parameter values between models of identical configuration, converting precision.
template <typename To, typename From>
void copy_parameters(Model<To>& dst, Model<From>& src);

} // namespace dabc
