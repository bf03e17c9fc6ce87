#pragma once

#include <nlohmann/json.hpp>

#include <span>
#include <vector>

namespace dabc {

/// Log-space depth discretization: K equal sub-intervals of [alpha, beta] in log10 units,
/// giving K + 1 class labels 0..K whose centers sit at log10(alpha) + q * l.
class QuantizationSpec
{
public:
    /// Defaults: [0.25 m, 80 m] split into 150 sub-intervals.
    QuantizationSpec();

    /// Throws ParameterError unless 0 < alpha < beta and K >= 1.
    static QuantizationSpec make(double alpha, double beta, int K);

    double alpha() const { return alpha_; }
    double beta() const { return beta_; }
    int K() const { return K_; }
    /// Bin width in log10 units.
    double q() const { return q_; }
    int num_classes() const { return K_ + 1; }

    /// w[j] = log10(alpha) + q * j for j in [0, K].
    const std::vector<double>& bin_weights() const { return weights_; }

    bool operator==(const QuantizationSpec& other) const
    {
        return alpha_ == other.alpha_ && beta_ == other.beta_ && K_ == other.K_;
    }

private:
    QuantizationSpec(double alpha, double beta, int K);

    double alpha_;
    double beta_;
    int K_;
    double q_;
    std::vector<double> weights_;
};

/// Only {alpha, beta, K} are serialized; q and the weights are recomputed on load.
void to_json(nlohmann::json& j, const QuantizationSpec& spec);
void from_json(const nlohmann::json& j, QuantizationSpec& spec);

/// Label of a positive depth. Depths outside [alpha, beta] are clamped first;
/// rounding is half away from zero. Throws DomainError for d <= 0 or non-finite d.
int depth_to_label(double depth, const QuantizationSpec& spec);

/// Bin-center depth 10^w[label]. Throws DomainError for labels outside [0, K].
double label_to_depth(int label, const QuantizationSpec& spec);

/// Throws ValidationError unless p has num_classes entries, all in [0, 1], summing to 1 within 1e-6.
void validate_distribution(std::span<const double> p, const QuantizationSpec& spec);

/// Soft-weighted-sum decoding 10^(w . p). Always within [alpha, beta].
double soft_weighted_depth(std::span<const double> p, const QuantizationSpec& spec);

/// Hard-max decoding: bin center of argmax p, ties resolved toward the smaller label.
double hard_max_depth(std::span<const double> p, const QuantizationSpec& spec);

/// SWS decoding without validation, for the inner loop of inference on trusted softmax output.
/// `p` is strided: element j lives at p[j * stride].
template <typename T>
double soft_weighted_depth_unchecked(const T* p, std::size_t stride, const QuantizationSpec& spec)
{
    const auto& w = spec.bin_weights();
    double dot = 0.0;
    double total = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
        const double pj = static_cast<double>(p[j * stride]);
        dot += w[j] * pj;
        total += pj;
    }
    double exponent = total > 0.0 ? dot / total : w[w.size() / 2];
    if (exponent < w.front())
        exponent = w.front();
    if (exponent > w.back())
        exponent = w.back();
    return std::pow(10.0, exponent);
}

} // namespace dabc
