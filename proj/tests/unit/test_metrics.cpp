#include "dabc/errors.hpp"
#include "dabc/metrics.hpp"
#include "dabc/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace dabc;

namespace {

struct Images
{
    std::vector<DepthMap> pred;
    std::vector<DepthMap> gt;
    std::vector<ValidMask> mask;
};

Images random_images(std::uint64_t seed, int count, int h, int w, double valid_p = 0.7)
{
    Rng rng(seed);
    Images out;
    for (int i = 0; i < count; ++i) {
        DepthMap p(h, w), g(h, w);
        ValidMask m(h, w);
        for (std::size_t k = 0; k < p.size(); ++k) {
            g.data[k] = std::pow(10.0, rng.uniform(-0.5, 1.8));
            p.data[k] = g.data[k] * std::exp(rng.normal() * 0.3);
            m.data[k] = rng.bernoulli(valid_p);
        }
        m.data[0] = 1;
        out.pred.push_back(p);
        out.gt.push_back(g);
        out.mask.push_back(m);
    }
    return out;
}

/// Direct transcription of the metric definitions, one pass per metric.
MetricReport naive_metrics(const Images& im)
{
    MetricReport r;
    double q = 0;
    for (std::size_t i = 0; i < im.pred.size(); ++i) {
        double n = 0, alpha = 0, alpha_log = 0;
        for (std::size_t k = 0; k < im.pred[i].size(); ++k)
            if (im.mask[i].data[k]) {
                n += 1;
                alpha += im.pred[i].data[k] - im.gt[i].data[k];
                alpha_log += std::log(im.pred[i].data[k]) - std::log(im.gt[i].data[k]);
            }
        alpha /= n;
        alpha_log /= n;
        for (std::size_t k = 0; k < im.pred[i].size(); ++k) {
            if (!im.mask[i].data[k])
                continue;
            const double d = im.gt[i].data[k];
            const double e = im.pred[i].data[k];
            r.absRel += std::abs(d - e) / d;
            r.sqRel += (d - e) * (d - e) / (d * d);
            r.imae += std::abs(1 / d - 1 / e);
            r.irmse += (1 / d - 1 / e) * (1 / d - 1 / e);
            r.SI += std::pow(e - d - alpha, 2);
            r.SILog += std::pow(std::log(e) - std::log(d) - alpha_log, 2);
            q += 1;
        }
    }
    r.absRel /= q;
    r.sqRel /= q;
    r.imae /= q;
    r.irmse = std::sqrt(r.irmse / q);
    r.SI /= q;
    r.SILog /= q;
    r.Q = static_cast<std::int64_t>(q);
    return r;
}

void expect_report_near(const MetricReport& a, const MetricReport& b, double tol)
{
    EXPECT_NEAR(a.absRel, b.absRel, tol);
    EXPECT_NEAR(a.sqRel, b.sqRel, tol);
    EXPECT_NEAR(a.imae, b.imae, tol);
    EXPECT_NEAR(a.irmse, b.irmse, tol);
    EXPECT_NEAR(a.SI, b.SI, tol);
    EXPECT_NEAR(a.SILog, b.SILog, tol);
    EXPECT_EQ(a.Q, b.Q);
}

} // namespace

TEST(Metrics, PerfectPredictionIsZero)
{
    const Images im = random_images(1, 3, 8, 9);
    const auto r = compute_metrics(im.gt, im.gt, im.mask);
    expect_report_near(r, MetricReport{0, 0, 0, 0, 0, 0, r.Q}, 0.0);
}

TEST(Metrics, ConstantCaseHandValues)
{
    DepthMap gt(4, 5, 2.0), pred(4, 5, 1.0);
    ValidMask mask(4, 5, 1);
    const auto r = compute_metrics({pred}, {gt}, {mask});
    EXPECT_NEAR(r.absRel, 0.5, 1e-12);
    EXPECT_NEAR(r.sqRel, 0.25, 1e-12);
    EXPECT_NEAR(r.imae, 0.5, 1e-12);
    EXPECT_NEAR(r.irmse, 0.5, 1e-12);
    EXPECT_NEAR(r.SI, 0.0, 1e-12);
    EXPECT_NEAR(r.SILog, 0.0, 1e-12);
    EXPECT_EQ(r.Q, 20);
}

TEST(Metrics, MatchesNaiveOracle)
{
    const Images im = random_images(2, 4, 11, 7);
    expect_report_near(compute_metrics(im.pred, im.gt, im.mask), naive_metrics(im), 1e-10);
}

TEST(Metrics, SILogScaleInvariance)
{
    const Images im = random_images(3, 1, 10, 10);
    const double base = compute_metrics(im.pred, im.gt, im.mask).SILog;
    for (double c : {0.5, 2.0, 10.0}) {
        DepthMap scaled = im.pred[0];
        for (auto& v : scaled.data)
            v *= c;
        EXPECT_NEAR(compute_metrics({scaled}, im.gt, im.mask).SILog, base, 1e-9) << c;
    }
    DepthMap twice = im.gt[0];
    for (auto& v : twice.data)
        v *= 2;
    EXPECT_NEAR(compute_metrics({twice}, im.gt, im.mask).SILog, 0.0, 1e-12);
}

TEST(Metrics, SIShiftInvariance)
{
    const Images im = random_images(4, 1, 10, 10);
    const double base = compute_metrics(im.pred, im.gt, im.mask).SI;
    for (double c : {0.1, 1.0, 7.5}) {
        DepthMap shifted = im.pred[0];
        for (auto& v : shifted.data)
            v += c;
        EXPECT_NEAR(compute_metrics({shifted}, im.gt, im.mask).SI, base, 1e-6) << c;
    }
}

TEST(Metrics, PoolingOverConcatenatedLists)
{
    const Images a = random_images(5, 2, 6, 8);
    const Images b = random_images(6, 3, 5, 4);
    Images all = a;
    all.pred.insert(all.pred.end(), b.pred.begin(), b.pred.end());
    all.gt.insert(all.gt.end(), b.gt.begin(), b.gt.end());
    all.mask.insert(all.mask.end(), b.mask.begin(), b.mask.end());
    const auto ra = compute_metrics(a.pred, a.gt, a.mask);
    const auto rb = compute_metrics(b.pred, b.gt, b.mask);
    const auto r = compute_metrics(all.pred, all.gt, all.mask);
    const double wa = static_cast<double>(ra.Q) / r.Q;
    const double wb = static_cast<double>(rb.Q) / r.Q;
    EXPECT_NEAR(r.absRel, wa * ra.absRel + wb * rb.absRel, 1e-12);
    EXPECT_NEAR(r.SI, wa * ra.SI + wb * rb.SI, 1e-12);
    EXPECT_NEAR(r.SILog, wa * ra.SILog + wb * rb.SILog, 1e-12);
    EXPECT_NEAR(r.irmse * r.irmse, wa * ra.irmse * ra.irmse + wb * rb.irmse * rb.irmse, 1e-12);

    MetricAccumulator x, y;
    for (std::size_t i = 0; i < a.pred.size(); ++i)
        x.add(a.pred[i], a.gt[i], a.mask[i]);
    for (std::size_t i = 0; i < b.pred.size(); ++i)
        y.add(b.pred[i], b.gt[i], b.mask[i]);
    x.merge(y);
    expect_report_near(x.report(), r, 1e-12);
}

TEST(Metrics, ImaeAtMostIrmse)
{
    for (std::uint64_t s = 10; s < 40; ++s) {
        const Images im = random_images(s, 2, 5, 5);
        const auto r = compute_metrics(im.pred, im.gt, im.mask);
        EXPECT_LE(r.imae, r.irmse + 1e-15);
    }
}

TEST(Metrics, Errors)
{
    DepthMap d(2, 2, 1.0);
    ValidMask none(2, 2, 0);
    EXPECT_THROW(compute_metrics({d}, {d}, {none}), EmptyEvaluationError);
    EXPECT_THROW(compute_metrics({}, {}, {}), EmptyEvaluationError);
    ValidMask all(2, 2, 1);
    DepthMap bad = d;
    bad(1, 1) = 0.0;
    EXPECT_THROW(compute_metrics({d}, {bad}, {all}), DomainError);
    EXPECT_THROW(compute_metrics({bad}, {d}, {all}), DomainError);
    EXPECT_THROW(compute_metrics({DepthMap(3, 2, 1.0)}, {d}, {all}), ShapeError);
    // invalid pixels may hold anything
    ValidMask partial = all;
    partial(1, 1) = 0;
    EXPECT_NO_THROW(compute_metrics({bad}, {d}, {partial}));
}

TEST(Metrics, CsvAndJsonRoundTrip)
{
    const Images im = random_images(7, 2, 6, 6);
    const auto r = compute_metrics(im.pred, im.gt, im.mask);
    const auto path = (std::filesystem::temp_directory_path() / "dabc_metrics_test.csv").string();
    write_metric_csv({r, r}, path);
    const auto back = read_metric_csv(path);
    ASSERT_EQ(back.size(), 2u);
    expect_report_near(back[1], r, 1e-6 * std::max(1.0, r.sqRel));
    const nlohmann::json j = r;
    expect_report_near(j.get<MetricReport>(), r, 0.0);
    std::filesystem::remove(path);
}

TEST(Confusion, PerfectPredictionsAreDiagonal)
{
    const QuantizationSpec spec;
    const Images im = random_images(8, 2, 10, 10);
    const auto cm = confusion_matrix(im.gt, im.gt, im.mask, spec);
    for (int i = 0; i < cm.size(); ++i)
        for (int j = 0; j < cm.size(); ++j)
            EXPECT_EQ(cm.normalized_at(i, j), (i == j && cm.row_total(i) > 0) ? 1.0 : 0.0);
}

TEST(Confusion, SinglePixel)
{
    const QuantizationSpec spec;
    DepthMap gt(1, 1, label_to_depth(10, spec)), pred(1, 1, label_to_depth(12, spec));
    ValidMask m(1, 1, 1);
    const auto cm = confusion_matrix({pred}, {gt}, {m}, spec);
    EXPECT_EQ(cm.count(10, 12), 1);
    EXPECT_EQ(cm.normalized_at(10, 12), 1.0);
    EXPECT_EQ(cm.total(), 1);
}

TEST(Confusion, MatchesBruteForceTally)
{
    const QuantizationSpec spec;
    Rng rng(9);
    DepthMap gt(25, 40), pred(25, 40);
    ValidMask m(25, 40, 1);
    for (std::size_t k = 0; k < gt.size(); ++k) {
        gt.data[k] = std::pow(10.0, rng.uniform(-0.6, 1.9));
        pred.data[k] = std::pow(10.0, rng.uniform(-0.6, 1.9));
    }
    const auto cm = confusion_matrix({pred}, {gt}, {m}, spec);
    // independent tally: bin index by scanning the bin edges
    std::vector<std::vector<long>> tally(151, std::vector<long>(151, 0));
    const auto bin = [&](double d) {
        const double x = std::log10(d);
        int best = 0;
        for (int j = 1; j < 151; ++j)
            if (std::abs(x - spec.bin_weights()[j]) < std::abs(x - spec.bin_weights()[best]))
                best = j;
        return best;
    };
    for (std::size_t k = 0; k < gt.size(); ++k)
        ++tally[bin(gt.data[k])][bin(pred.data[k])];
    for (int i = 0; i < 151; ++i)
        for (int j = 0; j < 151; ++j)
            EXPECT_EQ(cm.count(i, j), tally[i][j]);
    EXPECT_EQ(cm.total(), 1000);
}

TEST(Confusion, RowsNormalized)
{
    const QuantizationSpec spec;
    const Images im = random_images(10, 3, 12, 12);
    const auto cm = confusion_matrix(im.pred, im.gt, im.mask, spec);
    std::int64_t q = 0;
    for (const auto& m : im.mask)
        q += static_cast<std::int64_t>(count_valid(m));
    EXPECT_EQ(cm.total(), q);
    const auto n = cm.normalized();
    for (int i = 0; i < cm.size(); ++i) {
        double s = 0;
        for (int j = 0; j < cm.size(); ++j)
            s += n[i * cm.size() + j];
        EXPECT_NEAR(s, cm.row_total(i) > 0 ? 1.0 : 0.0, 1e-9);
    }
}

TEST(Confusion, Submatrix)
{
    ConfusionMatrix cm(151);
    for (int i = 0; i < 151; ++i)
        cm.add(i, i, 3);
    const auto full = submatrix_view(cm, 0, 150);
    EXPECT_EQ(full.normalized(), cm.normalized());
    const auto win = submatrix_view(cm, 60, 95);
    ASSERT_EQ(win.size(), 36);
    EXPECT_EQ(win.offset(), 60);
    EXPECT_TRUE(win.window_normalized());
    for (int i = 0; i < 36; ++i)
        for (int j = 0; j < 36; ++j)
            EXPECT_EQ(win.normalized_at(i, j), i == j ? 1.0 : 0.0);
    EXPECT_THROW(submatrix_view(cm, 10, 5), ParameterError);
    EXPECT_THROW(submatrix_view(cm, -1, 5), ParameterError);
    EXPECT_THROW(submatrix_view(cm, 0, 151), ParameterError);
}

TEST(Confusion, SubmatrixMatchesSliceOracle)
{
    Rng rng(11);
    ConfusionMatrix cm(151);
    for (int i = 0; i < 151; ++i)
        for (int j = 0; j < 151; ++j)
            cm.add(i, j, static_cast<std::int64_t>(rng.below(5)));
    const int lo = 60, hi = 95;
    const auto win = cm.submatrix(lo, hi);
    for (int i = lo; i <= hi; ++i) {
        double row = 0;
        for (int j = lo; j <= hi; ++j)
            row += static_cast<double>(cm.count(i, j));
        for (int j = lo; j <= hi; ++j) {
            const double expect = row > 0 ? cm.count(i, j) / row : 0.0;
            EXPECT_NEAR(win.normalized_at(i - lo, j - lo), expect, 1e-12);
        }
    }
}

TEST(Confusion, DiagonalBandMass)
{
    ConfusionMatrix cm(20);
    cm.add(3, 3, 2);
    cm.add(3, 10, 2);
    cm.add(7, 9, 1);
    EXPECT_DOUBLE_EQ(cm.diagonal_band_mass(5), (0.5 + 1.0) / 2);
}

TEST(Confusion, CsvRoundTripKeepsWindowMetadata)
{
    Rng rng(12);
    ConfusionMatrix cm(151);
    for (int k = 0; k < 500; ++k)
        cm.add(static_cast<int>(rng.below(151)), static_cast<int>(rng.below(151)));
    const auto path = (std::filesystem::temp_directory_path() / "dabc_confusion_test.csv").string();
    const auto win = cm.submatrix(60, 95);
    win.write_csv(path);
    const auto back = ConfusionMatrix::read_csv(path);
    EXPECT_EQ(back.size(), 36);
    EXPECT_EQ(back.offset(), 60);
    EXPECT_TRUE(back.window_normalized());
    for (int i = 0; i < 36; ++i)
        for (int j = 0; j < 36; ++j)
            EXPECT_EQ(back.count(i, j), win.count(i, j));
    std::filesystem::remove(path);
}
