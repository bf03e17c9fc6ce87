#include "dabc/model.hpp"

#include "dabc/errors.hpp"

#include <cmath>
#include <map>

namespace dabc {

namespace {

const double kReluGain = std::sqrt(2.0);
// residual branches start small so that stacked units stay close to identity
constexpr double kResidualBranchGain = 0.5;

} // namespace

std::string to_string(HeadKind head)
{
    return head == HeadKind::classification ? "classification" : "regression";
}

HeadKind head_from_string(const std::string& text)
{
    if (text == "classification")
        return HeadKind::classification;
    if (text == "regression")
        return HeadKind::regression;
    throw ParameterError("unknown head kind '" + text + "'");
}

void ModelConfig::validate() const
{
    for (int w : stage_widths)
        if (w <= 0)
            throw ParameterError("stage widths must be positive");
    if (fusion_width <= 0 || top_fusion_width < 0)
        throw ParameterError("fusion widths must be positive");
    if (head == HeadKind::classification && num_classes < 2)
        throw ParameterError("classification head needs at least two classes");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw ParameterError("dropout rate must lie in [0, 1)");
}

void ModelConfig::validate(const QuantizationSpec& spec) const
{
    validate();
    if (head == HeadKind::classification && num_classes != spec.num_classes())
        throw ParameterError("model has " + std::to_string(num_classes) + " classes but the quantization has " +
                             std::to_string(spec.num_classes()));
}

ModelConfig ModelConfig::classification_default()
{
    return ModelConfig{};
}

ModelConfig ModelConfig::regression_default()
{
    ModelConfig cfg;
    cfg.head = HeadKind::regression;
    cfg.attention_enabled = false;
    return cfg;
}

void to_json(nlohmann::json& j, const ModelConfig& cfg)
{
    j = nlohmann::json{{"stage_widths", cfg.stage_widths},
                       {"fusion_width", cfg.fusion_width},
                       {"top_fusion_width", cfg.top_fusion_width},
                       {"num_classes", cfg.num_classes},
                       {"attention_enabled", cfg.attention_enabled},
                       {"head", to_string(cfg.head)},
                       {"dropout_rate", cfg.dropout_rate}};
}

void from_json(const nlohmann::json& j, ModelConfig& cfg)
{
    ModelConfig out;
    if (j.contains("head"))
        out = head_from_string(j.at("head").get<std::string>()) == HeadKind::regression
                  ? ModelConfig::regression_default()
                  : ModelConfig::classification_default();
    if (j.contains("stage_widths"))
        out.stage_widths = j.at("stage_widths").get<std::array<int, 4>>();
    out.fusion_width = j.value("fusion_width", out.fusion_width);
    out.top_fusion_width = j.value("top_fusion_width", out.top_fusion_width);
    out.num_classes = j.value("num_classes", out.num_classes);
    out.attention_enabled = j.value("attention_enabled", out.attention_enabled);
    out.dropout_rate = j.value("dropout_rate", out.dropout_rate);
    out.validate();
    cfg = out;
}

void check_input_geometry(const Shape& image)
{
    if (image.c != 3)
        throw ShapeError("expected a 3-channel image, got " + image.str());
    if (image.n <= 0 || image.h <= 0 || image.w <= 0 || image.h % 32 != 0 || image.w % 32 != 0)
        throw ShapeError("image height and width must be positive multiples of 32, got " + image.str());
}

// ---------------------------------------------------------------------------------------------

template <typename T>
ResidualUnit<T>::ResidualUnit(const std::string& name, int channels, bool relu_out)
    : first(name + ".conv1", channels, channels, 3), second(name + ".conv2", channels, channels, 3),
      relu_out_(relu_out)
{
}

template <typename T>
void ResidualUnit<T>::init(Rng& rng, double input_gain)
{
    first.init(rng, input_gain);
    second.init(rng, kReluGain * kResidualBranchGain);
}

template <typename T>
Tensor<T> ResidualUnit<T>::forward(const Tensor<T>& x)
{
    hidden_ = first.forward(x);
    relu_inplace(hidden_);
    Tensor<T> y = second.forward(hidden_);
    y += x;
    if (relu_out_) {
        relu_inplace(y);
        output_ = y;
    }
    return y;
}

template <typename T>
Tensor<T> ResidualUnit<T>::backward(const Tensor<T>& dy)
{
    const Tensor<T> d = relu_out_ ? relu_backward(dy, output_) : dy;
    Tensor<T> dx = first.backward(relu_backward(second.backward(d), hidden_));
    dx += d;
    return dx;
}

template <typename T>
void ResidualUnit<T>::collect(ParameterList<T>& out)
{
    first.collect(out);
    second.collect(out);
}

// ---------------------------------------------------------------------------------------------

template <typename T>
FeatureTransfer<T>::FeatureTransfer(const std::string& name, int in_channels, int out_channels)
    : project(name + ".project", in_channels, out_channels, 1), residual(name + ".residual", out_channels, false)
{
}

template <typename T>
void FeatureTransfer<T>::init(Rng& rng, double input_gain)
{
    project.init(rng, input_gain);
    residual.init(rng, 1.0);
}

template <typename T>
Tensor<T> FeatureTransfer<T>::forward(const Tensor<T>& x)
{
    return residual.forward(project.forward(x));
}

template <typename T>
Tensor<T> FeatureTransfer<T>::backward(const Tensor<T>& dy)
{
    return project.backward(residual.backward(dy));
}

template <typename T>
void FeatureTransfer<T>::collect(ParameterList<T>& out)
{
    project.collect(out);
    residual.collect(out);
}

// ---------------------------------------------------------------------------------------------

template <typename T>
AttentionAggregation<T>::AttentionAggregation(const std::string& name, int channels, bool enabled)
    : squeeze(name + ".gate.fc1", 2 * channels, std::max(1, channels / 4), 1),
      excite(name + ".gate.fc2", std::max(1, channels / 4), channels, 1), channels_(channels), enabled_(enabled)
{
    squeeze.bias.decay = false;
    excite.bias.decay = false;
}

template <typename T>
void AttentionAggregation<T>::init(Rng& rng)
{
    squeeze.init(rng, 1.0);
    excite.init(rng, kReluGain);
}

template <typename T>
Tensor<T> AttentionAggregation<T>::forward(const Tensor<T>& high, const Tensor<T>& low,
                                           std::vector<std::vector<double>>* gate)
{
    high.require_same_shape(low, "AFA inputs");
    if (high.c() != channels_)
        throw ShapeError("AFA expects " + std::to_string(channels_) + " channels, got " + high.shape().str());
    Tensor<T> out = high;
    if (!enabled_) {
        out += low;
        return out;
    }
    high_ = high;
    low_ = low;
    const int n_batch = high.n();
    const int c_count = high.c();
    const std::size_t plane = high.shape().plane();

    const Tensor<T> pooled_high = global_average_pool(high);
    const Tensor<T> pooled_low = global_average_pool(low);
    Tensor<T> pooled(n_batch, 2 * c_count, 1, 1);
    for (int n = 0; n < n_batch; ++n)
        for (int c = 0; c < c_count; ++c) {
            pooled.at(n, c, 0, 0) = pooled_high.at(n, c, 0, 0);
            pooled.at(n, c_count + c, 0, 0) = pooled_low.at(n, c, 0, 0);
        }
    hidden_ = squeeze.forward(pooled);
    relu_inplace(hidden_);
    const Tensor<T> preact = excite.forward(hidden_);
    gate_ = preact;
    sigmoid_inplace(gate_);

    if (gate != nullptr) {
        gate->assign(n_batch, std::vector<double>(c_count));
        for (int n = 0; n < n_batch; ++n)
            for (int c = 0; c < c_count; ++c)
                (*gate)[n][c] = 1.0 / (1.0 + std::exp(-static_cast<double>(preact.at(n, c, 0, 0))));
    }

    for (int n = 0; n < n_batch; ++n)
        for (int c = 0; c < c_count; ++c) {
            const T a = gate_.at(n, c, 0, 0);
            const T* l = low.plane(n, c);
            T* o = out.plane(n, c);
            for (std::size_t i = 0; i < plane; ++i)
                o[i] += a * l[i];
        }
    return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> AttentionAggregation<T>::backward(const Tensor<T>& dy)
{
    if (!enabled_)
        return {dy, dy};
    dy.require_same_shape(high_, "AFA backward");
    const int n_batch = dy.n();
    const int c_count = dy.c();
    const std::size_t plane = dy.shape().plane();

    Tensor<T> d_high = dy;
    Tensor<T> d_low(dy.shape());
    Tensor<T> d_preact(n_batch, c_count, 1, 1);
    for (int n = 0; n < n_batch; ++n)
        for (int c = 0; c < c_count; ++c) {
            const T a = gate_.at(n, c, 0, 0);
            const T* g = dy.plane(n, c);
            const T* l = low_.plane(n, c);
            T* dl = d_low.plane(n, c);
            double d_gate = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
                dl[i] = a * g[i];
                d_gate += static_cast<double>(g[i]) * l[i];
            }
            d_preact.at(n, c, 0, 0) = static_cast<T>(d_gate) * a * (T(1) - a);
        }
    const Tensor<T> d_hidden = relu_backward(excite.backward(d_preact), hidden_);
    const Tensor<T> d_pooled = squeeze.backward(d_hidden);
    const T inv_plane = T(1) / static_cast<T>(plane);
    for (int n = 0; n < n_batch; ++n)
        for (int c = 0; c < c_count; ++c) {
            const T gh = d_pooled.at(n, c, 0, 0) * inv_plane;
            const T gl = d_pooled.at(n, c_count + c, 0, 0) * inv_plane;
            T* dh = d_high.plane(n, c);
            T* dl = d_low.plane(n, c);
            for (std::size_t i = 0; i < plane; ++i) {
                dh[i] += gh;
                dl[i] += gl;
            }
        }
    return {std::move(d_high), std::move(d_low)};
}

template <typename T>
void AttentionAggregation<T>::collect(ParameterList<T>& out)
{
    if (!enabled_)
        return;
    squeeze.collect(out);
    excite.collect(out);
}

// ---------------------------------------------------------------------------------------------

template <typename T>
GlobalContext<T>::GlobalContext(const std::string& name, int in_channels, int out_channels)
    : reduce(name + ".reduce", in_channels, out_channels, 1)
{
}

template <typename T>
void GlobalContext<T>::init(Rng& rng)
{
    reduce.init(rng, kReluGain);
}

template <typename T>
Tensor<T> GlobalContext<T>::forward(const Tensor<T>& f4)
{
    h_ = f4.h();
    w_ = f4.w();
    return broadcast_spatial(global_average_pool(reduce.forward(f4)), h_, w_);
}

template <typename T>
Tensor<T> GlobalContext<T>::backward(const Tensor<T>& dy)
{
    return reduce.backward(global_average_pool_backward(broadcast_spatial_backward(dy), h_, w_));
}

template <typename T>
void GlobalContext<T>::collect(ParameterList<T>& out)
{
    reduce.collect(out);
}

// ---------------------------------------------------------------------------------------------

template <typename T>
Encoder<T>::Encoder(const ModelConfig& cfg)
{
    const auto& w = cfg.stage_widths;
    const int stem = std::max(8, w[0] / 2);
    stem1 = Conv2d<T>("encoder.stem.conv1", 3, stem, 3, 2);
    stem2 = Conv2d<T>("encoder.stem.conv2", stem, w[0], 3, 2);
    for (int k = 0; k < 4; ++k) {
        const std::string name = "encoder.stage" + std::to_string(k + 1);
        if (k > 0)
            down[k] = Conv2d<T>(name + ".down", w[k - 1], w[k], 3, 2);
        stages[k] = ResidualUnit<T>(name + ".block", w[k], true);
    }
}

template <typename T>
void Encoder<T>::init(Rng& rng)
{
    stem1.init(rng, 1.0);
    stem2.init(rng, kReluGain);
    for (int k = 0; k < 4; ++k) {
        if (k > 0)
            down[k].init(rng, kReluGain);
        stages[k].init(rng, kReluGain);
    }
}

template <typename T>
std::array<Tensor<T>, 4> Encoder<T>::forward(const Tensor<T>& image)
{
    check_input_geometry(image.shape());
    std::array<Tensor<T>, 4> features;
    stem1_out_ = stem1.forward(image);
    relu_inplace(stem1_out_);
    stem2_out_ = stem2.forward(stem1_out_);
    relu_inplace(stem2_out_);
    features[0] = stages[0].forward(stem2_out_);
    for (int k = 1; k < 4; ++k) {
        down_out_[k] = down[k].forward(features[k - 1]);
        relu_inplace(down_out_[k]);
        features[k] = stages[k].forward(down_out_[k]);
    }
    return features;
}

template <typename T>
Tensor<T> Encoder<T>::backward(std::array<Tensor<T>, 4> grads)
{
    for (int k = 3; k >= 1; --k) {
        const Tensor<T> d = down[k].backward(relu_backward(stages[k].backward(grads[k]), down_out_[k]));
        grads[k - 1] += d;
    }
    Tensor<T> d = relu_backward(stages[0].backward(grads[0]), stem2_out_);
    d = relu_backward(stem2.backward(d), stem1_out_);
    return stem1.backward(d);
}

template <typename T>
void Encoder<T>::collect(ParameterList<T>& out)
{
    stem1.collect(out);
    stem2.collect(out);
    for (int k = 0; k < 4; ++k) {
        if (k > 0)
            down[k].collect(out);
        stages[k].collect(out);
    }
}

// ---------------------------------------------------------------------------------------------

template <typename T>
Decoder<T>::Decoder(const ModelConfig& cfg)
{
    for (int i = 0; i < 4; ++i) {
        const int stage = 4 - i;
        const int width = i == 0 ? cfg.top_width() : cfg.fusion_width;
        const std::string name = "decoder.level" + std::to_string(stage);
        lateral[i] = FeatureTransfer<T>(name + ".lateral", cfg.stage_widths[stage - 1], width);
        fuse[i] = AttentionAggregation<T>(name + ".afa", width, cfg.attention_enabled);
        refine[i] = FeatureTransfer<T>(name + ".refine", width, cfg.fusion_width);
    }
}

template <typename T>
void Decoder<T>::init(Rng& rng)
{
    for (int i = 0; i < 4; ++i) {
        lateral[i].init(rng, kReluGain);
        fuse[i].init(rng);
        refine[i].init(rng, 1.0);
    }
}

template <typename T>
Tensor<T> Decoder<T>::forward(const std::array<Tensor<T>, 4>& features, const Tensor<T>& context,
                              std::vector<AttentionRecord>* records)
{
    Tensor<T> state = context;
    std::vector<std::vector<double>> gates;
    for (int i = 0; i < 4; ++i) {
        const int stage = 4 - i;
        const Tensor<T> low = lateral[i].forward(features[stage - 1]);
        state = fuse[i].forward(state, low, records != nullptr ? &gates : nullptr);
        if (records != nullptr && fuse[i].enabled())
            for (std::size_t n = 0; n < gates.size(); ++n)
                records->push_back(AttentionRecord{stage, static_cast<int>(n), std::move(gates[n])});
        state = refine[i].forward(state);
        if (i < 3) {
            pre_upsample_[i] = state.shape();
            state = resize_bilinear(state, 2 * state.h(), 2 * state.w());
        }
    }
    return state;
}

template <typename T>
std::pair<std::array<Tensor<T>, 4>, Tensor<T>> Decoder<T>::backward(const Tensor<T>& dy)
{
    std::array<Tensor<T>, 4> d_features;
    Tensor<T> d = dy;
    for (int i = 3; i >= 0; --i) {
        if (i < 3)
            d = resize_bilinear_backward(d, pre_upsample_[i].h, pre_upsample_[i].w);
        d = refine[i].backward(d);
        auto [d_high, d_low] = fuse[i].backward(d);
        d_features[3 - i] = lateral[i].backward(d_low);
        d = std::move(d_high);
    }
    return {std::move(d_features), std::move(d)};
}

template <typename T>
void Decoder<T>::collect(ParameterList<T>& out)
{
    for (int i = 0; i < 4; ++i) {
        lateral[i].collect(out);
        fuse[i].collect(out);
        refine[i].collect(out);
    }
}

// ---------------------------------------------------------------------------------------------

template <typename T>
PredictionHead<T>::PredictionHead(const std::string& name, int in_channels, int out_channels, double dropout_rate)
    : conv(name + ".conv", in_channels, out_channels, 3), dropout(dropout_rate)
{
}

template <typename T>
void PredictionHead<T>::init(Rng& rng)
{
    conv.init(rng, 1.0);
}

template <typename T>
Tensor<T> PredictionHead<T>::forward(const Tensor<T>& x, bool train, Rng* rng)
{
    return conv.forward(dropout.forward(x, train, rng));
}

template <typename T>
Tensor<T> PredictionHead<T>::backward(const Tensor<T>& dy)
{
    return dropout.backward(conv.backward(dy));
}

template <typename T>
void PredictionHead<T>::collect(ParameterList<T>& out)
{
    conv.collect(out);
}

// ---------------------------------------------------------------------------------------------

template <typename T>
Model<T>::Model(const ModelConfig& cfg, std::uint64_t seed)
    : encoder(cfg), context("context", cfg.stage_widths[3], cfg.top_width()), decoder(cfg),
      head("head", cfg.fusion_width, cfg.output_channels(), cfg.dropout_rate), cfg_(cfg)
{
    cfg.validate();
    Rng rng(derive_seed(seed, 0x5eed));
    encoder.init(rng);
    context.init(rng);
    decoder.init(rng);
    head.init(rng);
}

template <typename T>
ForwardOutput<T> Model<T>::forward(const Tensor<T>& image, Mode mode, Rng* rng)
{
    check_input_geometry(image.shape());
    ForwardOutput<T> out;
    const auto features = encoder.forward(image);
    const Tensor<T> g = context.forward(features[3]);
    const Tensor<T> fused = decoder.forward(features, g, &out.attention);
    logits_ = head.forward(fused, mode == Mode::train, rng);
    out.scores = cfg_.head == HeadKind::classification ? softmax_channels(logits_) : logits_;
    return out;
}

template <typename T>
Tensor<T> Model<T>::backward(const Tensor<T>& d_output)
{
    d_output.require_same_shape(logits_, "model backward");
    auto [d_features, d_context] = decoder.backward(head.backward(d_output));
    d_features[3] += context.backward(d_context);
    return encoder.backward(std::move(d_features));
}

template <typename T>
ParameterList<T> Model<T>::parameters()
{
    ParameterList<T> out;
    encoder.collect(out);
    context.collect(out);
    decoder.collect(out);
    head.collect(out);
    return out;
}

template <typename T>
std::size_t Model<T>::parameter_count() const
{
    std::size_t total = 0;
    for (const auto* p : const_cast<Model<T>*>(this)->parameters())
        total += p->value.size();
    return total;
}

template <typename T>
void Model<T>::zero_grad()
{
    for (auto* p : parameters())
        p->zero_grad();
}

std::size_t parameter_count(const ModelConfig& cfg)
{
    return Model<float>(cfg).parameter_count();
}

template <typename To, typename From>
void copy_parameters(Model<To>& dst, Model<From>& src)
{
    auto d = dst.parameters();
    auto s = src.parameters();
    if (d.size() != s.size())
        throw ShapeError("models have different parameter lists");
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i]->name != s[i]->name || !(d[i]->value.shape() == s[i]->value.shape()))
            throw ShapeError("parameter mismatch at " + d[i]->name);
        d[i]->value = s[i]->value.template cast<To>();
    }
}

template class ResidualUnit<float>;
template class ResidualUnit<double>;
template class FeatureTransfer<float>;
template class FeatureTransfer<double>;
template class AttentionAggregation<float>;
template class AttentionAggregation<double>;
template class GlobalContext<float>;
template class GlobalContext<double>;
template class Encoder<float>;
template class Encoder<double>;
template class Decoder<float>;
template class Decoder<double>;
template class PredictionHead<float>;
template class PredictionHead<double>;
template class Model<float>;
template class Model<double>;
template void copy_parameters<float, double>(Model<float>&, Model<double>&);
template void copy_parameters<double, float>(Model<double>&, Model<float>&);
template void copy_parameters<float, float>(Model<float>&, Model<float>&);
template void copy_parameters<double, double>(Model<double>&, Model<double>&);

} // namespace dabc
