#include "dabc/cli.hpp"
#include "dabc/dataset.hpp"
#include "dabc/experiment.hpp"
#include "dabc/image_io.hpp"
#include "dabc/metrics.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dabc;
namespace fs = std::filesystem;

namespace {

struct CliResult
{
    int code = 0;
    std::string out;
    std::string err;
};

CliResult run(const std::vector<std::string>& args)
{
    std::ostringstream out, err;
    CliResult r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

class CliTest : public ::testing::Test
{
protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        root = fs::temp_directory_path() / ("dabc_cli_" + std::string(info->name()));
        fs::remove_all(root);
        fs::create_directories(root);
    }
    void TearDown() override { fs::remove_all(root); }

    std::string path(const std::string& leaf) const { return (root / leaf).string(); }

    std::string write_json(const std::string& leaf, const std::string& text) const
    {
        std::ofstream(path(leaf)) << text;
        return path(leaf);
    }

    fs::path root;
};

constexpr const char* kTinyModel = R"("model": {"stage_widths": [4, 6, 8, 8], "fusion_width": 4, "dropout_rate": 0.0})";
constexpr const char* kTinySchedule = R"("schedule": {"phase1_epochs": 1, "phase2_epochs": 1, "batch_size": 2})";

} // namespace

TEST_F(CliTest, UsageErrorsExitWithTwo)
{
    auto r = run({});
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(r.err.empty());
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({"generate"}).code, 2) << "missing --out";
    EXPECT_EQ(run({"generate", "--out", path("x"), "--domain", "sky"}).code, 2);
    EXPECT_EQ(run({"experiment", "nope"}).code, 2);
    EXPECT_EQ(run({"eval", "--indoor", root.string()}).code, 2) << "needs a checkpoint or predictions";
}

TEST_F(CliTest, HelpExitsCleanly)
{
    const auto r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("generate"), std::string::npos);
    EXPECT_NE(r.out.find("experiment"), std::string::npos);
}

TEST_F(CliTest, MissingConfigFileIsReported)
{
    const auto r = run({"train", "--config", path("absent.json")});
    EXPECT_NE(r.code, 0);
    const auto bad = write_json("bad.json", "{ not json");
    const auto r2 = run({"train", "--config", bad});
    EXPECT_EQ(r2.code, 1);
    EXPECT_NE(r2.err.find("bad.json"), std::string::npos) << r2.err;
}

TEST_F(CliTest, GenerateWritesFolderDataset)
{
    const auto r = run({"generate", "--out", path("gen"), "--count", "3", "--domain", "outdoor", "--sparse",
                        "--seed", "4", "--height", "40", "--width", "120"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto samples = load_folder_dataset(path("gen"), Domain::outdoor);
    ASSERT_EQ(samples.size(), 3u);
    EXPECT_EQ(samples[0].height(), 40);
    EXPECT_EQ(samples[0].width(), 120);
    EXPECT_LE(count_valid(samples[1].valid), static_cast<std::size_t>(0.05 * 40 * 120));

    ASSERT_EQ(run({"generate", "--out", path("native"), "--count", "1"}).code, 0);
    const auto native = load_folder_dataset(path("native"), Domain::indoor);
    EXPECT_EQ(native[0].height(), 180);
    EXPECT_EQ(native[0].width(), 256);
}

TEST_F(CliTest, TrainInferAndEvaluate)
{
    ASSERT_EQ(run({"generate", "--out", path("ti"), "--count", "2", "--domain", "indoor", "--seed", "1"}).code, 0);
    ASSERT_EQ(run({"generate", "--out", path("to"), "--count", "2", "--domain", "outdoor", "--seed", "2"}).code, 0);
    ASSERT_EQ(run({"generate", "--out", path("vi"), "--count", "1", "--domain", "indoor", "--seed", "3"}).code, 0);
    const auto cfg = write_json("run.json", std::string("{") + kTinyModel + "," + kTinySchedule + "}");

    const auto ckpt = path("out/model.ckpt");
    const auto tr = run({"train", "--config", cfg, "--out", ckpt, "--train-indoor", path("ti"), "--train-outdoor",
                         path("to"), "--val-indoor", path("vi")});
    ASSERT_EQ(tr.code, 0) << tr.err;
    EXPECT_TRUE(fs::exists(ckpt));
    EXPECT_TRUE(fs::exists(ckpt + ".json"));
    EXPECT_TRUE(fs::exists(ckpt + ".log.csv"));
    EXPECT_NE(tr.out.find("epoch 2"), std::string::npos);

    const auto inf = run({"infer", "--checkpoint", ckpt, "--input", path("to/outdoor_0.rgb.png"), "--output",
                          path("pred.pfm"), "--color", path("pred.png"), "--domain", "outdoor"});
    ASSERT_EQ(inf.code, 0) << inf.err;
    const auto pred = read_pfm(path("pred.pfm"));
    EXPECT_EQ(pred.height, 136);
    EXPECT_EQ(pred.width, 490);
    for (float v : pred.data) {
        EXPECT_GE(v, 0.25f);
        EXPECT_LE(v, 80.0f);
    }
    EXPECT_TRUE(fs::exists(path("pred.png")));

    const auto ev = run({"eval", "--checkpoint", ckpt, "--indoor", path("vi"), "--out", path("m.csv"), "--json",
                         path("m.json"), "--confusion", path("cm.csv")});
    ASSERT_EQ(ev.code, 0) << ev.err;
    EXPECT_NE(ev.out.find("combined"), std::string::npos);
    EXPECT_EQ(read_metric_csv(path("m.csv")).size(), 1u);
    EXPECT_EQ(ConfusionMatrix::read_csv(path("cm.csv")).size(), 151);
}

TEST_F(CliTest, PerfectPredictionsScoreZero)
{
    ASSERT_EQ(run({"generate", "--out", path("gt"), "--count", "2", "--domain", "outdoor", "--seed", "5",
                   "--height", "30", "--width", "60"})
                  .code,
              0);
    fs::create_directories(path("pred"));
    for (const auto& s : load_folder_dataset(path("gt"), Domain::outdoor))
        write_pfm(s.depth, path("pred/" + s.id + ".depth.pfm"));
    const auto ev =
        run({"eval", "--predictions", path("pred"), "--outdoor", path("gt"), "--out", path("m.csv")});
    ASSERT_EQ(ev.code, 0) << ev.err;
    const auto rows = read_metric_csv(path("m.csv"));
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].absRel, 0.0);
    EXPECT_EQ(rows[0].sqRel, 0.0);
    EXPECT_EQ(rows[0].imae, 0.0);
    EXPECT_EQ(rows[0].irmse, 0.0);
    EXPECT_NEAR(rows[0].SI, 0.0, 1e-12);
    EXPECT_NEAR(rows[0].SILog, 0.0, 1e-12);

    fs::remove(path("pred/outdoor_1.depth.pfm"));
    const auto missing = run({"eval", "--predictions", path("pred"), "--outdoor", path("gt")});
    EXPECT_EQ(missing.code, 1);
    EXPECT_NE(missing.err.find("outdoor_1.depth.pfm"), std::string::npos) << missing.err;
}

TEST_F(CliTest, ExperimentAndPlotSmoke)
{
    const auto cfg = write_json("exp.json", std::string("{") + kTinyModel + "," + kTinySchedule +
                                                R"(, "data": {"train_indoor": 2, "train_outdoor": 2,
                                                   "val_indoor": 1, "val_outdoor": 1}, "dump_inputs": 2})");
    const auto r = run({"experiment", "attention_dump", "--config", cfg, "--out", path("reports")});
    ASSERT_EQ(r.code, 0) << r.err;
    const fs::path dir = root / "reports" / "attention_dump";
    EXPECT_TRUE(fs::exists(dir / "config.json"));
    EXPECT_TRUE(fs::exists(dir / "tables" / "gates.csv"));
    EXPECT_TRUE(fs::exists(dir / "figures" / "gates_input0.png"));
    EXPECT_TRUE(fs::exists(dir / "figures" / "gates_input1.png"));

    const auto pg = run({"plot", "gates", "--input", (dir / "tables" / "gates.csv").string(), "--output",
                         path("gate_plots")});
    ASSERT_EQ(pg.code, 0) << pg.err;
    EXPECT_TRUE(fs::exists(path("gate_plots/gates_input1.png")));

    ConfusionMatrix cm(151);
    cm.add(70, 70, 5);
    cm.add(70, 72, 1);
    cm.write_csv(path("cm.csv"));
    const auto pc = run({"plot", "confusion", "--input", path("cm.csv"), "--output", path("cm.png"), "--window",
                         "60", "95"});
    ASSERT_EQ(pc.code, 0) << pc.err;
    EXPECT_TRUE(fs::exists(path("cm.png")));
}
