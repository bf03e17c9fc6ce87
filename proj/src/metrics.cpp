#include "dabc/metrics.hpp"

#include "dabc/errors.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace dabc {

void to_json(nlohmann::json& j, const MetricReport& r)
{
    j = nlohmann::json{{"absRel", r.absRel}, {"sqRel", r.sqRel}, {"imae", r.imae}, {"irmse", r.irmse},
                       {"SI", r.SI},         {"SILog", r.SILog}, {"Q", r.Q}};
}

void from_json(const nlohmann::json& j, MetricReport& r)
{
    j.at("absRel").get_to(r.absRel);
    j.at("sqRel").get_to(r.sqRel);
    j.at("imae").get_to(r.imae);
    j.at("irmse").get_to(r.irmse);
    j.at("SI").get_to(r.SI);
    j.at("SILog").get_to(r.SILog);
    j.at("Q").get_to(r.Q);
}

std::string metric_csv_row(const MetricReport& r)
{
    std::ostringstream out;
    out << std::setprecision(17) << r.absRel << ',' << r.sqRel << ',' << r.imae << ',' << r.irmse << ',' << r.SI
        << ',' << r.SILog << ',' << r.Q;
    return out.str();
}

void write_metric_csv(const std::vector<MetricReport>& rows, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw IngestionError("cannot write metric CSV " + path);
    out << kMetricCsvHeader << '\n';
    for (const auto& r : rows)
        out << metric_csv_row(r) << '\n';
}

std::vector<MetricReport> read_metric_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IngestionError("cannot read metric CSV " + path);
    std::string line;
    if (!std::getline(in, line) || line != kMetricCsvHeader)
        throw IngestionError("unexpected metric CSV header in " + path);
    std::vector<MetricReport> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::istringstream fields(line);
        MetricReport r;
        char comma = 0;
        fields >> r.absRel >> comma >> r.sqRel >> comma >> r.imae >> comma >> r.irmse >> comma >> r.SI >> comma >>
            r.SILog >> comma >> r.Q;
        if (!fields)
            throw IngestionError("malformed metric CSV row in " + path + ": " + line);
        rows.push_back(r);
    }
    return rows;
}

void MetricAccumulator::add(const DepthMap& pred, const DepthMap& gt, const ValidMask& mask)
{
    if (!pred.same_shape(gt) || !pred.same_shape(mask))
        throw ShapeError("prediction, ground truth and mask shapes differ");

    // first pass: per-image offsets alpha (linear) and alpha' (log)
    std::int64_t n = 0;
    double offset = 0.0;
    double log_offset = 0.0;
    for (std::size_t k = 0; k < gt.size(); ++k) {
        if (!mask.data[k])
            continue;
        const double d = gt.data[k];
        const double e = pred.data[k];
        if (!(d > 0.0) || !std::isfinite(d))
            throw DomainError("non-positive ground-truth depth at a valid pixel");
        if (!(e > 0.0) || !std::isfinite(e))
            throw DomainError("non-positive predicted depth at a valid pixel");
        offset += e - d;
        log_offset += std::log(e) - std::log(d);
        ++n;
    }
    if (n == 0)
        return;
    offset /= static_cast<double>(n);
    log_offset /= static_cast<double>(n);

    for (std::size_t k = 0; k < gt.size(); ++k) {
        if (!mask.data[k])
            continue;
        const double d = gt.data[k];
        const double e = pred.data[k];
        const double diff = d - e;
        abs_rel_ += std::abs(diff) / d;
        sq_rel_ += diff * diff / (d * d);
        const double inv_diff = 1.0 / d - 1.0 / e;
        inv_abs_ += std::abs(inv_diff);
        inv_sq_ += inv_diff * inv_diff;
        const double si = diff + offset;
        si_ += si * si;
        const double silog = std::log(d) - std::log(e) + log_offset;
        silog_ += silog * silog;
    }
    count_ += n;
}

void MetricAccumulator::merge(const MetricAccumulator& other)
{
    count_ += other.count_;
    abs_rel_ += other.abs_rel_;
    sq_rel_ += other.sq_rel_;
    inv_abs_ += other.inv_abs_;
    inv_sq_ += other.inv_sq_;
    si_ += other.si_;
    silog_ += other.silog_;
}

MetricReport MetricAccumulator::report() const
{
    if (count_ == 0)
        throw EmptyEvaluationError("no valid pixels to evaluate");
    const double q = static_cast<double>(count_);
    MetricReport r;
    r.absRel = abs_rel_ / q;
    r.sqRel = sq_rel_ / q;
    r.imae = inv_abs_ / q;
    r.irmse = std::sqrt(inv_sq_ / q);
    r.SI = si_ / q;
    r.SILog = silog_ / q;
    r.Q = count_;
    return r;
}

MetricReport compute_metrics(const std::vector<DepthMap>& preds, const std::vector<DepthMap>& gts,
                             const std::vector<ValidMask>& masks)
{
    if (preds.size() != gts.size() || preds.size() != masks.size())
        throw ShapeError("prediction, ground-truth and mask lists differ in length");
    MetricAccumulator acc;
    for (std::size_t i = 0; i < preds.size(); ++i)
        acc.add(preds[i], gts[i], masks[i]);
    return acc.report();
}

ConfusionMatrix::ConfusionMatrix(int size) : size_(size), counts_(static_cast<std::size_t>(size) * size, 0)
{
    if (size <= 0)
        throw ParameterError("confusion matrix size must be positive");
}

std::int64_t ConfusionMatrix::row_total(int i) const
{
    std::int64_t total = 0;
    for (int j = 0; j < size_; ++j)
        total += count(i, j);
    return total;
}

std::int64_t ConfusionMatrix::total() const
{
    std::int64_t total = 0;
    for (auto c : counts_)
        total += c;
    return total;
}

std::vector<double> ConfusionMatrix::normalized() const
{
    std::vector<double> out(counts_.size(), 0.0);
    for (int i = 0; i < size_; ++i) {
        const std::int64_t row = row_total(i);
        if (row == 0)
            continue;
        for (int j = 0; j < size_; ++j)
            out[index(i, j)] = static_cast<double>(count(i, j)) / static_cast<double>(row);
    }
    return out;
}

double ConfusionMatrix::normalized_at(int i, int j) const
{
    const std::int64_t row = row_total(i);
    return row == 0 ? 0.0 : static_cast<double>(count(i, j)) / static_cast<double>(row);
}

void ConfusionMatrix::merge(const ConfusionMatrix& other)
{
    if (other.size_ != size_ || other.offset_ != offset_)
        throw ShapeError("cannot merge confusion matrices of different geometry");
    for (std::size_t k = 0; k < counts_.size(); ++k)
        counts_[k] += other.counts_[k];
}

ConfusionMatrix ConfusionMatrix::submatrix(int lo, int hi) const
{
    if (lo < 0 || hi < lo || hi >= size_)
        throw ParameterError("label window [" + std::to_string(lo) + ", " + std::to_string(hi) +
                             "] outside [0, " + std::to_string(size_ - 1) + "]");
    ConfusionMatrix view(hi - lo + 1);
    view.offset_ = offset_ + lo;
    view.window_normalized_ = true;
    for (int i = lo; i <= hi; ++i)
        for (int j = lo; j <= hi; ++j)
            view.counts_[view.index(i - lo, j - lo)] = count(i, j);
    return view;
}

double ConfusionMatrix::diagonal_band_mass(int band) const
{
    double sum = 0.0;
    int rows = 0;
    for (int i = 0; i < size_; ++i) {
        const std::int64_t row = row_total(i);
        if (row == 0)
            continue;
        std::int64_t inside = 0;
        for (int j = std::max(0, i - band); j <= std::min(size_ - 1, i + band); ++j)
            inside += count(i, j);
        sum += static_cast<double>(inside) / static_cast<double>(row);
        ++rows;
    }
    return rows == 0 ? 0.0 : sum / rows;
}

void ConfusionMatrix::write_csv(const std::string& path) const
{
    std::ofstream out(path);
    if (!out)
        throw IngestionError("cannot write confusion CSV " + path);
    // metadata line keeps windowed views self-describing
    out << "# size=" << size_ << " offset=" << offset_ << " rows_normalized_within_window="
        << (window_normalized_ ? "true" : "false") << '\n';
    for (int i = 0; i < size_; ++i) {
        for (int j = 0; j < size_; ++j)
            out << (j ? "," : "") << count(i, j);
        out << '\n';
    }
}

ConfusionMatrix ConfusionMatrix::read_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IngestionError("cannot read confusion CSV " + path);
    std::string line;
    int offset = 0;
    bool windowed = false;
    std::vector<std::vector<std::int64_t>> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        if (line[0] == '#') {
            const auto off = line.find("offset=");
            if (off != std::string::npos)
                offset = std::stoi(line.substr(off + 7));
            windowed = line.find("within_window=true") != std::string::npos;
            continue;
        }
        std::vector<std::int64_t> row;
        std::istringstream fields(line);
        std::string cell;
        while (std::getline(fields, cell, ','))
            row.push_back(std::stoll(cell));
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw IngestionError("empty confusion CSV " + path);
    ConfusionMatrix cm(static_cast<int>(rows.size()));
    for (int i = 0; i < cm.size_; ++i) {
        if (rows[i].size() != rows.size())
            throw IngestionError("confusion CSV " + path + " is not square");
        for (int j = 0; j < cm.size_; ++j)
            cm.counts_[cm.index(i, j)] = rows[i][j];
    }
    cm.offset_ = offset;
    cm.window_normalized_ = windowed;
    return cm;
}

void accumulate_confusion(ConfusionMatrix& cm, const DepthMap& pred, const DepthMap& gt, const ValidMask& mask,
                          const QuantizationSpec& spec)
{
    if (cm.size() != spec.num_classes())
        throw ShapeError("confusion matrix size does not match the quantization");
    if (!pred.same_shape(gt) || !pred.same_shape(mask))
        throw ShapeError("prediction, ground truth and mask shapes differ");
    for (std::size_t k = 0; k < gt.size(); ++k) {
        if (!mask.data[k])
            continue;
        cm.add(depth_to_label(gt.data[k], spec), depth_to_label(pred.data[k], spec));
    }
}

ConfusionMatrix confusion_matrix(const std::vector<DepthMap>& preds, const std::vector<DepthMap>& gts,
                                 const std::vector<ValidMask>& masks, const QuantizationSpec& spec)
{
    if (preds.size() != gts.size() || preds.size() != masks.size())
        throw ShapeError("prediction, ground-truth and mask lists differ in length");
    ConfusionMatrix cm(spec.num_classes());
    for (std::size_t i = 0; i < preds.size(); ++i)
        accumulate_confusion(cm, preds[i], gts[i], masks[i], spec);
    if (cm.total() == 0)
        throw EmptyEvaluationError("no valid pixels to tally");
    return cm;
}

ConfusionMatrix submatrix_view(const ConfusionMatrix& cm, int lo, int hi)
{
    return cm.submatrix(lo, hi);
}

} // namespace dabc
