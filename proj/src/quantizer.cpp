#include "dabc/quantizer.hpp"

#include "dabc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dabc {

namespace {

constexpr double kDistributionTolerance = 1e-6;

} // namespace

QuantizationSpec::QuantizationSpec() : QuantizationSpec(0.25, 80.0, 150) {}

QuantizationSpec::QuantizationSpec(double alpha, double beta, int K)
    : alpha_(alpha), beta_(beta), K_(K), q_((std::log10(beta) - std::log10(alpha)) / K)
{
    weights_.resize(static_cast<std::size_t>(K) + 1);
    const double base = std::log10(alpha);
    for (int j = 0; j <= K; ++j)
        weights_[j] = base + q_ * j;
    // the last center must be log10(beta) exactly so that label K decodes to beta
    weights_[K] = std::log10(beta);
}

QuantizationSpec QuantizationSpec::make(double alpha, double beta, int K)
{
    if (!(std::isfinite(alpha) && std::isfinite(beta)) || !(alpha > 0.0) || !(beta > alpha))
        throw ParameterError("quantization range must satisfy 0 < alpha < beta, got [" + std::to_string(alpha) +
                             ", " + std::to_string(beta) + "]");
    if (K < 1)
        throw ParameterError("quantization needs K >= 1, got " + std::to_string(K));
    return QuantizationSpec(alpha, beta, K);
}

void to_json(nlohmann::json& j, const QuantizationSpec& spec)
{
    j = nlohmann::json{{"alpha", spec.alpha()}, {"beta", spec.beta()}, {"K", spec.K()}};
}

void from_json(const nlohmann::json& j, QuantizationSpec& spec)
{
    spec = QuantizationSpec::make(j.at("alpha").get<double>(), j.at("beta").get<double>(), j.at("K").get<int>());
}

int depth_to_label(double depth, const QuantizationSpec& spec)
{
    if (!std::isfinite(depth) || depth <= 0.0)
        throw DomainError("depth must be positive and finite, got " + std::to_string(depth));
    const double clamped = std::clamp(depth, spec.alpha(), spec.beta());
    const double position = (std::log10(clamped) - std::log10(spec.alpha())) / spec.q();
    // std::round is half away from zero; position >= 0 here
    const long label = std::lround(position);
    return static_cast<int>(std::clamp<long>(label, 0, spec.K()));
}

double label_to_depth(int label, const QuantizationSpec& spec)
{
    if (label < 0 || label > spec.K())
        throw DomainError("label " + std::to_string(label) + " outside [0, " + std::to_string(spec.K()) + "]");
    return std::pow(10.0, spec.bin_weights()[label]);
}

void validate_distribution(std::span<const double> p, const QuantizationSpec& spec)
{
    if (p.size() != static_cast<std::size_t>(spec.num_classes()))
        throw ValidationError("score vector has " + std::to_string(p.size()) + " entries, expected " +
                              std::to_string(spec.num_classes()));
    double total = 0.0;
    for (double v : p) {
        if (!(v >= -kDistributionTolerance && v <= 1.0 + kDistributionTolerance))
            throw ValidationError("score vector entry outside [0, 1]: " + std::to_string(v));
        total += v;
    }
    if (std::abs(total - 1.0) > kDistributionTolerance)
        throw ValidationError("score vector sums to " + std::to_string(total) + ", not 1");
}

double soft_weighted_depth(std::span<const double> p, const QuantizationSpec& spec)
{
    validate_distribution(p, spec);
    const auto& w = spec.bin_weights();
    double dot = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j)
        dot += w[j] * p[j];
    return std::pow(10.0, std::clamp(dot, w.front(), w.back()));
}

double hard_max_depth(std::span<const double> p, const QuantizationSpec& spec)
{
    validate_distribution(p, spec);
    // max_element returns the first maximum, i.e. the smaller label on ties
    const auto best = std::max_element(p.begin(), p.end());
    return label_to_depth(static_cast<int>(best - p.begin()), spec);
}

} // namespace dabc
