#include "dabc/checkpoint.hpp"
#include "dabc/errors.hpp"
#include "dabc/inference.hpp"
#include "dabc/loss.hpp"
#include "dabc/synthetic.hpp"
#include "dabc/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace dabc;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config(HeadKind head = HeadKind::classification)
{
    ModelConfig cfg = head == HeadKind::classification ? ModelConfig::classification_default()
                                                       : ModelConfig::regression_default();
    cfg.stage_widths = {4, 6, 8, 8};
    cfg.fusion_width = 4;
    cfg.dropout_rate = 0.0;
    return cfg;
}

Targets constant_targets(int n, int h, int w, double depth, const QuantizationSpec& spec)
{
    Tensor<double> d(n, 1, h, w);
    d.fill(depth);
    Tensor<std::uint8_t> m(n, 1, h, w);
    m.fill(1);
    return make_targets(std::move(d), std::move(m), spec);
}

DomainSets tiny_sets(int indoor, int outdoor, std::uint64_t seed)
{
    const auto geometry = TrainGeometry::toy();
    DomainSets sets;
    for (int i = 0; i < indoor; ++i) {
        auto [h, w] = geometry.native_size(Domain::indoor);
        sets.indoor.push_back(generate_indoor(seed + i, h, w));
    }
    for (int i = 0; i < outdoor; ++i) {
        auto [h, w] = geometry.native_size(Domain::outdoor);
        auto s = generate_outdoor(seed + 100 + i, h, w);
        s.domain = Domain::outdoor;
        sets.outdoor.push_back(std::move(s));
    }
    return sets;
}

TrainSchedule tiny_schedule()
{
    TrainSchedule s = TrainSchedule::toy();
    s.phase1_epochs = 1;
    s.phase2_epochs = 1;
    s.batch_size = 2;
    s.seed = 4;
    return s;
}

} // namespace

// --- losses --------------------------------------------------------------------------------

TEST(Loss, UniformDistributionGivesLogClassCount)
{
    const QuantizationSpec spec;
    Tensor<double> probs(2, 151, 3, 4);
    probs.fill(1.0 / 151.0);
    const auto r = classification_loss(probs, constant_targets(2, 3, 4, 7.0, spec));
    EXPECT_NEAR(r.loss, std::log(151.0), 1e-12);
    EXPECT_NEAR(r.loss, 5.01728, 1e-5);
    EXPECT_EQ(r.count, 24u);
}

TEST(Loss, PerfectPredictionGivesZero)
{
    const QuantizationSpec spec;
    const auto t = constant_targets(1, 2, 2, 3.0, spec);
    Tensor<double> probs(1, 151, 2, 2);
    const int label = t.labels.data()[0];
    for (std::size_t i = 0; i < 4; ++i)
        probs.plane(0, label)[i] = 1.0;
    EXPECT_EQ(classification_loss(probs, t).loss, 0.0);

    Tensor<double> pred(1, 1, 2, 2);
    pred.fill(std::log10(3.0));
    EXPECT_NEAR(regression_loss(pred, t).loss, 0.0, 1e-30);
}

TEST(Loss, MaskedPixelsHaveZeroGradient)
{
    const QuantizationSpec spec;
    Tensor<double> d(1, 1, 2, 3);
    d.fill(5.0);
    Tensor<std::uint8_t> m(1, 1, 2, 3);
    m.fill(1);
    m.at(0, 0, 1, 2) = 0;
    d.at(0, 0, 1, 2) = 0.0;
    const auto t = make_targets(d, m, spec);
    Tensor<double> probs(1, 151, 2, 3);
    probs.fill(1.0 / 151.0);
    const auto c = classification_loss(probs, t);
    EXPECT_EQ(c.count, 5u);
    for (int k = 0; k < 151; ++k)
        EXPECT_EQ(c.grad.at(0, k, 1, 2), 0.0);
    Tensor<double> pred(1, 1, 2, 3);
    pred.fill(0.3);
    const auto r = regression_loss(pred, t);
    EXPECT_EQ(r.grad.at(0, 0, 1, 2), 0.0);
    EXPECT_NE(r.grad.at(0, 0, 0, 0), 0.0);
}

TEST(Loss, RegressionExample)
{
    const QuantizationSpec spec;
    Tensor<double> pred(1, 1, 1, 2);
    const auto r = regression_loss(pred, constant_targets(1, 1, 2, 10.0, spec));
    EXPECT_NEAR(r.loss, 1.0, 1e-15);
    EXPECT_NEAR(r.grad.data()[0], 2.0 * (0.0 - 1.0) / 2.0, 1e-15);
}

TEST(Loss, EmptyMaskThrows)
{
    const QuantizationSpec spec;
    Tensor<double> d(1, 1, 2, 2);
    Tensor<std::uint8_t> m(1, 1, 2, 2);
    const auto t = make_targets(d, m, spec);
    Tensor<double> probs(1, 151, 2, 2);
    probs.fill(1.0 / 151.0);
    EXPECT_THROW(classification_loss(probs, t), EmptyBatchError);
    EXPECT_THROW(regression_loss(Tensor<double>(1, 1, 2, 2), t), EmptyBatchError);
}

// --- optimizer and schedule ----------------------------------------------------------------

TEST(Schedule, StepDropAfterPhaseOne)
{
    const auto s = TrainSchedule::toy();
    EXPECT_EQ(s.total_epochs(), 25);
    EXPECT_DOUBLE_EQ(s.lr_at(1), s.base_lr);
    EXPECT_DOUBLE_EQ(s.lr_at(15), s.base_lr);
    EXPECT_DOUBLE_EQ(s.lr_at(16), s.base_lr * s.lr_drop_factor);
    EXPECT_DOUBLE_EQ(s.lr_at(25), s.base_lr * s.lr_drop_factor);
    TrainSchedule bad;
    bad.batch_size = 0;
    EXPECT_THROW(bad.validate(), ParameterError);
    bad = TrainSchedule{};
    bad.base_lr = -1;
    EXPECT_THROW(bad.validate(), ParameterError);
    const nlohmann::json j = s;
    const auto back = j.get<TrainSchedule>();
    EXPECT_EQ(back.grad_clip, s.grad_clip);
    EXPECT_EQ(back.phase1_epochs, s.phase1_epochs);
}

TEST(Sgd, ZeroLearningRateLeavesParametersUnchanged)
{
    Model<double> model(tiny_config(), 3);
    Rng rng(1);
    for (auto* p : model.parameters())
        for (auto& g : p->grad.values())
            g = rng.normal();
    std::vector<Tensor<double>> before;
    for (auto* p : model.parameters())
        before.push_back(p->value);
    Sgd<double> sgd(model.parameters(), 0.9, 0.0005);
    sgd.step(0.0);
    sgd.step(0.0);
    auto params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i)
        EXPECT_EQ(params[i]->value, before[i]);
}

TEST(Sgd, WeightDecayAloneShrinksGeometrically)
{
    Parameter<double> p{"w", Tensor<double>(1, 1, 1, 3), Tensor<double>(1, 1, 1, 3)};
    p.value.data()[0] = 1.0;
    p.value.data()[1] = -2.0;
    p.value.data()[2] = 0.5;
    Parameter<double> frozen{"b", Tensor<double>(1, 1, 1, 1), Tensor<double>(1, 1, 1, 1), false};
    frozen.value.fill(3.0);
    const auto start = p.value;
    Sgd<double> sgd({&p, &frozen}, 0.0, 0.1);
    for (int t = 0; t < 10; ++t)
        sgd.step(0.5);
    const double factor = std::pow(1.0 - 0.5 * 0.1, 10);
    for (int k = 0; k < 3; ++k)
        EXPECT_NEAR(p.value.data()[k], start.data()[k] * factor, 1e-14);
    EXPECT_EQ(frozen.value.data()[0], 3.0);
}

TEST(Sgd, MomentumAccumulates)
{
    Parameter<double> p{"w", Tensor<double>(1, 1, 1, 1), Tensor<double>(1, 1, 1, 1)};
    p.grad.fill(1.0);
    Sgd<double> sgd({&p}, 0.9, 0.0);
    sgd.step(0.1); // v = 1
    sgd.step(0.1); // v = 1.9
    EXPECT_NEAR(p.value.data()[0], -0.1 * (1.0 + 1.9), 1e-15);
}

TEST(Sgd, ClippingBoundsTheUpdate)
{
    Parameter<double> p{"w", Tensor<double>(1, 1, 1, 2), Tensor<double>(1, 1, 1, 2)};
    p.grad.data()[0] = 30.0;
    p.grad.data()[1] = 40.0;
    Sgd<double> sgd({&p}, 0.0, 0.0, 5.0);
    EXPECT_NEAR(sgd.step(1.0), 50.0, 1e-12);
    EXPECT_NEAR(p.value.data()[0], -3.0, 1e-12);
    EXPECT_NEAR(p.value.data()[1], -4.0, 1e-12);
}

// --- tiling --------------------------------------------------------------------------------

TEST(Tiling, WideFrameUsesTwoEdgeAnchoredTiles)
{
    const auto plan = plan_tiles(376, 1242, 320, 256, 320);
    EXPECT_EQ(plan.down_height, 188);
    EXPECT_EQ(plan.down_width, 621);
    ASSERT_EQ(plan.tiles.size(), 2u);
    EXPECT_EQ(plan.tiles[0], (std::pair<int, int>{0, 320}));
    EXPECT_EQ(plan.tiles[1], (std::pair<int, int>{301, 621}));
    EXPECT_EQ(plan.overlap, 19);
    for (int x = 0; x < 621; ++x)
        EXPECT_EQ(plan.coverage(x), (x >= 301 && x < 320) ? 2 : 1) << x;
}

TEST(Tiling, NarrowFramesUseOneTile)
{
    const auto indoor = plan_tiles(480, 640, 320, 256, 320);
    ASSERT_EQ(indoor.tiles.size(), 1u);
    EXPECT_EQ(indoor.tiles[0], (std::pair<int, int>{0, 320}));
    EXPECT_EQ(indoor.overlap, 0);
    const auto exact = plan_tiles(100, 256, 128, 96, 128);
    ASSERT_EQ(exact.tiles.size(), 1u);
    EXPECT_EQ(exact.overlap, 0);
    const auto odd = plan_tiles(181, 255, 128, 96, 128);
    EXPECT_EQ(odd.down_height, 91);
    EXPECT_EQ(odd.down_width, 128);
}

TEST(Tiling, VeryWideFramesCoverEveryColumn)
{
    const auto plan = plan_tiles(100, 1400, 128, 96, 128);
    EXPECT_GT(plan.tiles.size(), 2u);
    EXPECT_EQ(plan.tiles.front().first, 0);
    EXPECT_EQ(plan.tiles.back().second, plan.down_width);
    for (int x = 0; x < plan.down_width; ++x)
        EXPECT_GE(plan.coverage(x), 1);
    for (const auto& [a, b] : plan.tiles)
        EXPECT_EQ(b - a, 128);
}

TEST(Tiling, InvalidGeometryThrows)
{
    EXPECT_THROW(plan_tiles(0, 100, 64, 96, 128), ParameterError);
    EXPECT_THROW(plan_tiles(100, 100, 0, 96, 128), ParameterError);
    EXPECT_THROW(plan_tiles(100, 100, 200, 96, 128), ParameterError);
    EXPECT_THROW(plan_tiles(400, 200, 128, 96, 128), ParameterError);
}

TEST(Tiling, StitchAveragesOverlapInLinearDepth)
{
    const auto plan = plan_tiles(20, 28, 8, 32, 32);
    ASSERT_EQ(plan.tiles.size(), 2u);
    const DepthMap a(10, 8, 2.0), b(10, 8, 6.0);
    const auto out = stitch_tiles({a, b}, plan);
    ASSERT_EQ(out.width, 14);
    for (int x = 0; x < 14; ++x) {
        const double expect = plan.coverage(x) == 2 ? 4.0 : (x < 8 ? 2.0 : 6.0);
        EXPECT_DOUBLE_EQ(out(3, x), expect) << x;
    }
    EXPECT_THROW(stitch_tiles({a}, plan), ShapeError);
}

TEST(Inference, SingleTileMatchesDirectBitExactly)
{
    Model<float> model(tiny_config(), 8);
    const QuantizationSpec spec;
    Predictor predictor(model, spec, 96, 128, 128);
    const auto s = generate_indoor(3, 180, 256);
    const auto direct = predictor.direct(s.rgb);
    const auto tiled = predictor.tiled(s.rgb);
    ASSERT_EQ(tiled.height, 180);
    ASSERT_EQ(tiled.width, 256);
    EXPECT_EQ(direct, tiled);
}

TEST(Inference, ConstantNetworkGivesConstantDepth)
{
    Model<float> model(tiny_config(HeadKind::regression), 8);
    const QuantizationSpec spec;
    for (auto* p : model.parameters())
        p->value.fill(0.0f);
    auto params = model.parameters();
    params.back()->value.fill(static_cast<float>(std::log10(5.0)));
    ASSERT_NE(params.back()->name.find("bias"), std::string::npos);
    Predictor predictor(model, spec, 96, 128, 128);
    const auto s = generate_outdoor(1, 136, 490);
    std::vector<DepthMap> tiles;
    const auto out = predictor.tiled(s.rgb, &tiles);
    EXPECT_EQ(tiles.size(), 2u);
    ASSERT_EQ(out.height, 136);
    ASSERT_EQ(out.width, 490);
    for (double d : out.data)
        EXPECT_NEAR(d, 5.0, 1e-5);
}

TEST(Inference, DecodingClampsToRange)
{
    const QuantizationSpec spec;
    Tensor<float> scores(1, 1, 1, 3);
    scores.data()[0] = -5.0f;
    scores.data()[1] = 1.0f;
    scores.data()[2] = 9.0f;
    const auto d = decode_depth(scores, 0, HeadKind::regression, spec);
    EXPECT_DOUBLE_EQ(d.data[0], 0.25);
    EXPECT_NEAR(d.data[1], 10.0, 1e-5);
    EXPECT_DOUBLE_EQ(d.data[2], 80.0);

    Tensor<float> probs(1, 151, 1, 1);
    probs.plane(0, 40)[0] = 0.5f;
    probs.plane(0, 41)[0] = 0.5f;
    const auto soft = decode_depth(probs, 0, HeadKind::classification, spec);
    const auto& w = spec.bin_weights();
    EXPECT_NEAR(soft.data[0], std::pow(10.0, 0.5 * (w[40] + w[41])), 1e-4);
    EXPECT_NEAR(decode_depth_hard_max(probs, 0, spec).data[0], std::pow(10.0, w[40]), 1e-9);
}

// --- checkpoint ----------------------------------------------------------------------------

TEST(Checkpoint, RoundTripIsBitExact)
{
    const auto dir = fs::temp_directory_path() / "dabc_ckpt_test";
    fs::create_directories(dir);
    Model<float> model(tiny_config(), 12);
    const QuantizationSpec spec;
    const auto ckpt = capture_checkpoint(model, spec, ScheduleState{3, 0.01}, 77);
    const auto path = (dir / "m.ckpt").string();
    save_checkpoint(ckpt, path);
    const auto back = load_checkpoint(path);
    EXPECT_TRUE(back == ckpt);
    EXPECT_EQ(back.seed, 77u);
    EXPECT_EQ(back.schedule.epoch, 3);

    auto restored = restore_model<float>(back);
    Rng rng(1);
    Tensor<float> x(1, 3, 32, 64);
    for (auto& v : x.values())
        v = static_cast<float>(rng.normal());
    EXPECT_EQ(restored.forward(x, Mode::eval).scores, model.forward(x, Mode::eval).scores);

    Model<float> other(tiny_config(HeadKind::regression), 1);
    EXPECT_THROW(load_parameters(other, back), ShapeError);
    {
        std::ofstream f((dir / "bad.ckpt").string(), std::ios::binary);
        f << "NOTACKPT";
    }
    EXPECT_THROW(load_checkpoint((dir / "bad.ckpt").string()), IngestionError);
    fs::remove_all(dir);
}

// --- training loop and evaluation ----------------------------------------------------------

TEST(Training, RunsAreDeterministic)
{
    const auto train_set = tiny_sets(2, 2, 1);
    const auto val = tiny_sets(1, 1, 50);
    TrainOptions opts;
    opts.geometry = TrainGeometry::toy();
    const QuantizationSpec spec;
    const auto a = train(tiny_config(), tiny_schedule(), spec, train_set, val, opts);
    const auto b = train(tiny_config(), tiny_schedule(), spec, train_set, val, opts);
    EXPECT_TRUE(a.checkpoint == b.checkpoint);
    ASSERT_EQ(a.log.size(), 2u);
    EXPECT_EQ(a.log[1].epoch, 2);
    EXPECT_EQ(a.log[1].step, 4);
    EXPECT_DOUBLE_EQ(a.log[1].lr, tiny_schedule().lr_at(2));
    EXPECT_EQ(a.log[0].train_loss, b.log[0].train_loss);
    EXPECT_TRUE(a.log[1].validation.count(Domain::indoor));
    EXPECT_TRUE(a.log[1].validation.count(Domain::outdoor));

    auto other = tiny_schedule();
    other.seed = 5;
    const auto c = train(tiny_config(), other, spec, train_set, val, opts);
    EXPECT_FALSE(a.checkpoint == c.checkpoint);
}

TEST(Training, SingleDomainRunNeverSeesOtherDomain)
{
    auto train_set = tiny_sets(2, 0, 1);
    TrainOptions opts;
    opts.geometry = TrainGeometry::toy();
    opts.validate_every = 0;
    const auto r = train(tiny_config(HeadKind::regression), tiny_schedule(), QuantizationSpec(), train_set,
                         DomainSets{}, opts);
    ASSERT_EQ(r.log.size(), 2u);
    EXPECT_TRUE(std::isfinite(r.log.back().train_loss));
    EXPECT_TRUE(r.log.back().validation.empty());
    EXPECT_THROW(train(tiny_config(), tiny_schedule(), QuantizationSpec(), DomainSets{}, DomainSets{}, opts),
                 ParameterError);
}

TEST(Evaluation, RepeatableAndConsistentWithMetrics)
{
    Model<float> model(tiny_config(), 21);
    const QuantizationSpec spec;
    const auto data = tiny_sets(2, 2, 9);
    EvaluationOptions opts;
    opts.keep_predictions = true;
    const auto all = data.all();
    const auto r1 = evaluate(model, all, spec, opts);
    const auto r2 = evaluate(model, all, spec, opts);
    EXPECT_EQ(r1.combined.absRel, r2.combined.absRel);
    EXPECT_EQ(r1.confusion.normalized(), r2.confusion.normalized());
    EXPECT_EQ(r1.confusion.total(), r2.confusion.total());
    ASSERT_EQ(r1.predictions.size(), 4u);

    std::vector<DepthMap> gts;
    std::vector<ValidMask> masks;
    for (const auto& s : all) {
        gts.push_back(s.depth);
        masks.push_back(s.valid);
    }
    const auto direct = compute_metrics(r1.predictions, gts, masks);
    EXPECT_NEAR(direct.absRel, r1.combined.absRel, 1e-12);
    EXPECT_NEAR(direct.SILog, r1.combined.SILog, 1e-12);
    EXPECT_NEAR(direct.irmse, r1.combined.irmse, 1e-12);

    const auto indoor_only = evaluate(model, data.indoor, spec, opts);
    ASSERT_EQ(indoor_only.per_domain.size(), 1u);
    EXPECT_EQ(indoor_only.per_domain.at(Domain::indoor).absRel, indoor_only.combined.absRel);
    EXPECT_NEAR(indoor_only.combined.absRel, r1.per_domain.at(Domain::indoor).absRel, 1e-12);

    EXPECT_THROW(evaluate(model, {}, spec, opts), EmptyEvaluationError);
    std::vector<SceneSample> too_tall{generate_indoor(1, 300, 200)};
    EXPECT_THROW(evaluate(model, too_tall, spec, opts), ShapeError);
}

TEST(Evaluation, TrainingLogFormat)
{
    const auto dir = fs::temp_directory_path() / "dabc_log_test";
    fs::create_directories(dir);
    EpochLog e;
    e.epoch = 1;
    e.step = 5;
    e.lr = 0.02;
    e.train_loss = 3.5;
    e.validation[Domain::outdoor] = {0.2, 0.05};
    write_training_log({e}, (dir / "log.csv").string());
    std::ifstream f((dir / "log.csv").string());
    std::string header, row;
    std::getline(f, header);
    std::getline(f, row);
    EXPECT_EQ(header, kTrainingLogHeader);
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), 7);
    EXPECT_EQ(row.substr(0, 4), "1,5,");
    fs::remove_all(dir);
}
