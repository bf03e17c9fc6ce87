#pragma once

#include "dabc/grid.hpp"
#include "dabc/quantizer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dabc {

/// Pooled error statistics over Q valid pixels. Inverse depths are in 1/m.
struct MetricReport
{
    double absRel = 0.0;
    double sqRel = 0.0;
    double imae = 0.0;
    double irmse = 0.0;
    double SI = 0.0;
    double SILog = 0.0;
    std::int64_t Q = 0;
};

void to_json(nlohmann::json& j, const MetricReport& report);
void from_json(const nlohmann::json& j, MetricReport& report);

/// Column order used by every metric CSV.
inline constexpr const char* kMetricCsvHeader = "absRel,sqRel,imae,irmse,SI,SILog,Q";
std::string metric_csv_row(const MetricReport& report);
void write_metric_csv(const std::vector<MetricReport>& rows, const std::string& path);
std::vector<MetricReport> read_metric_csv(const std::string& path);

/// Streaming form of compute_metrics: images are added one at a time and the residual
/// sums are reduced in insertion order. The SI and SILog offsets are per image.
class MetricAccumulator
{
public:
    /// Throws ShapeError on mismatched shapes and DomainError on a non-positive depth at a valid pixel.
    void add(const DepthMap& pred, const DepthMap& gt, const ValidMask& mask);
    void merge(const MetricAccumulator& other);
    std::int64_t count() const { return count_; }
    /// Throws EmptyEvaluationError when no valid pixel was seen.
    MetricReport report() const;

private:
    std::int64_t count_ = 0;
    double abs_rel_ = 0.0;
    double sq_rel_ = 0.0;
    double inv_abs_ = 0.0;
    double inv_sq_ = 0.0;
    double si_ = 0.0;
    double silog_ = 0.0;
};

MetricReport compute_metrics(const std::vector<DepthMap>& preds, const std::vector<DepthMap>& gts,
                             const std::vector<ValidMask>& masks);

/// counts[i][j] = valid pixels whose ground truth quantizes to label i and prediction to label j.
class ConfusionMatrix
{
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int size);

    int size() const { return size_; }
    /// First label represented by row/column 0. Nonzero only for windowed views.
    int offset() const { return offset_; }
    /// True when rows were re-normalized inside a label window rather than over the full row.
    bool window_normalized() const { return window_normalized_; }

    std::int64_t count(int i, int j) const { return counts_[index(i, j)]; }
    void add(int i, int j, std::int64_t n = 1) { counts_[index(i, j)] += n; }
    std::int64_t row_total(int i) const;
    std::int64_t total() const;

    /// Row-stochastic matrix; rows without counts stay zero.
    std::vector<double> normalized() const;
    double normalized_at(int i, int j) const;

    void merge(const ConfusionMatrix& other);

    /// Restricts rows and columns to labels [lo, hi] and re-normalizes each row within that window.
    /// Throws ParameterError unless 0 <= lo <= hi < size().
    ConfusionMatrix submatrix(int lo, int hi) const;

    /// Mean over occupied rows of the normalized mass within |i - j| <= band.
    double diagonal_band_mass(int band) const;

    void write_csv(const std::string& path) const;
    static ConfusionMatrix read_csv(const std::string& path);

private:
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * size_ + j; }

    int size_ = 0;
    int offset_ = 0;
    bool window_normalized_ = false;
    std::vector<std::int64_t> counts_;
};

/// Tallies re-quantized predictions against re-quantized ground truth at valid pixels.
void accumulate_confusion(ConfusionMatrix& cm, const DepthMap& pred, const DepthMap& gt, const ValidMask& mask,
                          const QuantizationSpec& spec);

ConfusionMatrix confusion_matrix(const std::vector<DepthMap>& preds, const std::vector<DepthMap>& gts,
                                 const std::vector<ValidMask>& masks, const QuantizationSpec& spec);

/// Free-function form of ConfusionMatrix::submatrix.
ConfusionMatrix submatrix_view(const ConfusionMatrix& cm, int lo, int hi);

} // namespace dabc
