#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vesselseg/app.hpp"

using namespace vesselseg;
using testutil::read_bytes;
using testutil::TempDir;

namespace {

RunConfig small_config(const fs::path& out) {
    RunConfig cfg;
    cfg.out_dir = out.string();
    cfg.synth.width = 192;
    cfg.synth.height = 192;
    cfg.synth.vessels = 12;
    cfg.em.k_per_class = 4;
    cfg.em.restarts = 1;
    cfg.em.tol = 1e-4;
    cfg.n_samples = 8000;
    return cfg;
}

std::size_t count_files(const fs::path& dir) {
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir)) n += e.is_regular_file();
    return n;
}

// One training split and one test split shared by the tests below.
class AppTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        root_ = new TempDir();
        RunConfig cfg = small_config(root_->path() / "out");
        cfg.synth.count = 3;
        cmd_synth(cfg, train_root());
        cfg.synth.count = 2;
        cfg.synth.first_id = 11;
        cmd_synth(cfg, test_root());
        cfg.train_root = train_root().string();
        trained_ = new TrainResult(cmd_train(cfg));
    }
    static void TearDownTestSuite() {
        delete trained_;
        delete root_;
    }

    static fs::path train_root() { return root_->path() / "train"; }
    static fs::path test_root() { return root_->path() / "test"; }

    static TempDir* root_;
    static TrainResult* trained_;
};

TempDir* AppTest::root_ = nullptr;
TrainResult* AppTest::trained_ = nullptr;

}  // namespace

TEST(Synth, FivePhantomsFifteenFiles) {
    TempDir dir;
    RunConfig cfg = small_config(dir / "out");
    cfg.synth.count = 5;
    const auto files = cmd_synth(cfg, dir / "ds");
    EXPECT_EQ(files.size(), 15u);
    EXPECT_EQ(count_files(dir / "ds"), 15u);
    for (const char* sub : {"images", "mask", "1st_manual"})
        EXPECT_EQ(std::distance(fs::directory_iterator(dir / "ds" / sub), fs::directory_iterator{}), 5);
    EXPECT_EQ(discover_split(dir / "ds", SplitRole::train).records.size(), 5u);
}

TEST(Synth, FixedSeedIsByteIdentical) {
    TempDir dir;
    RunConfig cfg = small_config(dir / "out");
    cfg.synth.count = 2;
    const auto a = cmd_synth(cfg, dir / "a");
    const auto b = cmd_synth(cfg, dir / "b");
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(read_bytes(a[i]), read_bytes(b[i]));
    cfg.seed = 1;
    EXPECT_NE(read_bytes(cmd_synth(cfg, dir / "c")[0]), read_bytes(a[0]));
}

TEST(Train, EmptyRootIsLayoutError) {
    TempDir dir;
    fs::create_directories(dir / "empty");
    RunConfig cfg = small_config(dir / "out");
    cfg.train_root = (dir / "empty").string();
    EXPECT_THROW(cmd_train(cfg), LayoutError);
    EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST_F(AppTest, TrainWritesModelAndManifest) {
    const auto& m = trained_->model;
    EXPECT_EQ(m.vessel.size(), 4);
    EXPECT_EQ(m.background.size(), 4);
    EXPECT_EQ(m.dim(), 4);
    ASSERT_TRUE(fs::exists(trained_->model_path));
    const auto manifest = manifest_from_json(read_bytes(trained_->run_dir / "manifest.json"));
    EXPECT_EQ(manifest.command, "train");
    EXPECT_EQ(manifest.inputs.size(), 9u);
    EXPECT_EQ(manifest.outputs.at(trained_->model_path.string()), file_digest(trained_->model_path));
    EXPECT_TRUE(manifest.timings.contains("em"));
    RunConfig expected = small_config(root_->path() / "out");
    expected.synth.count = 2;
    expected.synth.first_id = 11;
    expected.train_root = train_root().string();
    EXPECT_EQ(parse_config(manifest.config_text), expected);
}

TEST_F(AppTest, TrainingTwiceIsByteIdentical) {
    RunConfig cfg = small_config(root_->path() / "out2");
    cfg.train_root = train_root().string();
    cfg.synth.count = 2;
    cfg.synth.first_id = 11;
    const auto again = cmd_train(cfg);
    EXPECT_EQ(read_bytes(again.model_path), read_bytes(trained_->model_path));
    cfg.jobs = 3;
    EXPECT_EQ(read_bytes(cmd_train(cfg).model_path), read_bytes(trained_->model_path));
}

TEST_F(AppTest, StreamingSampleMatchesInMemorySample) {
    RunConfig cfg = small_config(root_->path() / "unused");
    const auto split = discover_split(train_root(), SplitRole::train);
    const auto streamed = train_on_split(split, cfg).training_set;

    std::vector<LoadedRecord> data;
    std::vector<ImageFeatures> feats;
    for (const auto& rec : split.records) {
        data.push_back(load_record(rec));
        feats.push_back(extract_features(data.back().image, data.back().fov, cfg));
    }
    std::vector<TrainingImage> views;
    for (std::size_t i = 0; i < data.size(); ++i) views.push_back({feats[i].normalized, data[i].truth, data[i].fov});
    const auto direct = sample_training_set(views, cfg.n_samples, cfg.em.seed);
    EXPECT_EQ(streamed.samples, direct.samples);
    EXPECT_EQ(streamed.labels, direct.labels);
}

TEST_F(AppTest, SegmentOutputsMatchInputSize) {
    const auto split = discover_split(test_root(), SplitRole::test);
    const auto& rec = split.records.front();
    RunConfig cfg = small_config(root_->path() / "seg");
    const auto r = cmd_segment(cfg, trained_->model_path, rec.image, rec.fov);
    const auto img = load_image(rec.image);
    const auto stem = rec.image.stem().string();
    for (const char* suffix : {"_mask.png", "_posterior.png", "_overlay.png"}) {
        const auto out = load_image(r.run_dir / (stem + suffix));
        EXPECT_EQ(out.width(), img.width());
        EXPECT_EQ(out.height(), img.height());
    }
    const auto mask = load_mask(r.run_dir / (stem + "_mask.png"));
    EXPECT_EQ(mask, r.segmentation.mask);
    const auto overlay = load_image(r.run_dir / (stem + "_overlay.png"));
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) {
            ASSERT_EQ(overlay.red()[i], 1.0);
            ASSERT_EQ(overlay.green()[i], 0.0);
        }
    EXPECT_TRUE(fs::exists(r.run_dir / "manifest.json"));
}

TEST_F(AppTest, SegmentWithoutFovFallsBackToFullFrame) {
    const auto split = discover_split(test_root(), SplitRole::test);
    RunConfig cfg = small_config(root_->path() / "seg-nofov");
    const auto r = cmd_segment(cfg, trained_->model_path, split.records.front().image, std::nullopt);
    EXPECT_EQ(r.segmentation.mask.width(), 192);
}

TEST_F(AppTest, VesselFreePhantomGivesNearEmptyMask) {
    TempDir dir;
    RunConfig cfg = small_config(dir / "out");
    cfg.synth.count = 1;
    cfg.synth.vessels = 0;
    cfg.synth.first_id = 50;
    cmd_synth(cfg, dir / "blank");
    const auto rec = discover_split(dir / "blank", SplitRole::test).records.front();
    const auto r = cmd_segment(cfg, trained_->model_path, rec.image, rec.fov);
    const auto fov = load_mask(rec.fov);
    EXPECT_LT(static_cast<double>(count_true(r.segmentation.mask)), 0.01 * static_cast<double>(count_true(fov)));
}

TEST_F(AppTest, SegmentRejectsMismatchedScales) {
    const auto split = discover_split(test_root(), SplitRole::test);
    RunConfig cfg = small_config(root_->path() / "seg-bad");
    cfg.scales = {2.0, 4.0};
    EXPECT_THROW(cmd_segment(cfg, trained_->model_path, split.records.front().image, split.records.front().fov),
                 StatsMismatch);
}

TEST_F(AppTest, EvaluateWritesReportsAndRocRederives) {
    RunConfig cfg = small_config(root_->path() / "eval");
    const auto r = cmd_evaluate(cfg, trained_->model_path, test_root());
    ASSERT_EQ(r.report.per_image.size(), 2u);
    EXPECT_GE(r.report.mean_accuracy, 0.9);
    EXPECT_GE(r.roc.auc, 0.9);
    std::istringstream csv(read_bytes(r.run_dir / "metrics.csv"));
    std::size_t rows = 0;
    for (std::string line; std::getline(csv, line);) ++rows;
    EXPECT_EQ(rows, 1u + 2u + 2u);
    EXPECT_TRUE(fs::exists(r.run_dir / "roc.csv"));
    EXPECT_NE(read_bytes(r.run_dir / "report.txt").find("0.9571"), std::string::npos);
    EXPECT_TRUE(fs::exists(r.run_dir / "predictions" / "11_mask.png"));

    const auto again = cmd_roc(cfg, r.run_dir / "predictions", test_root());
    EXPECT_NEAR(again.roc.auc, r.roc.auc, 0.01);
    EXPECT_TRUE(fs::exists(again.run_dir / "roc.csv"));

    // same inputs, same bytes
    const auto second = cmd_evaluate(cfg, trained_->model_path, test_root());
    for (const char* f : {"metrics.csv", "roc.csv", "report.txt", "predictions/12_posterior.png"})
        EXPECT_EQ(read_bytes(second.run_dir / f), read_bytes(r.run_dir / f)) << f;
}

TEST_F(AppTest, TruthAgainstItselfIsPerfect) {
    const auto split = discover_split(test_root(), SplitRole::test);
    std::vector<BinaryMask> masks;
    std::vector<GrayImage> probs;
    for (const auto& rec : split.records) {
        masks.push_back(load_mask(rec.truth));
        GrayImage p(masks.back().width(), masks.back().height());
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = masks.back()[i];
        probs.push_back(p);
    }
    const auto r = evaluate_predictions(split, masks, probs, 1000);
    for (const auto& m : r.report.per_image) EXPECT_EQ(m.accuracy, 1.0);
    EXPECT_EQ(r.roc.auc, 1.0);
}

TEST(Train, RecordErrorsCarryTheRecordId) {
    TempDir dir;
    RunConfig cfg = small_config(dir / "out");
    cfg.synth.count = 2;
    cmd_synth(cfg, dir / "ds");
    testutil::write_bytes(dir / "ds/images/02_synth.png", "\x89PNG\r\n\x1a\n garbage");
    cfg.train_root = (dir / "ds").string();
    cfg.model_path = (dir / "model.json").string();
    try {
        cmd_train(cfg);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("record 02"), std::string::npos) << e.what();
    }
    EXPECT_FALSE(fs::exists(dir / "model.json"));
}

TEST(Train, MixedBitDepthsAreRejected) {
    TempDir dir;
    RunConfig cfg = small_config(dir / "out");
    cfg.synth.count = 2;
    cmd_synth(cfg, dir / "ds");
    const auto img = load_image(dir / "ds/images/02_synth.png");
    cv::Mat m16(img.height(), img.width(), CV_16UC1);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            m16.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::lround(img.green()(x, y) * 65535.0));
    cv::imwrite((dir / "ds/images/02_synth.png").string(), m16);
    cfg.train_root = (dir / "ds").string();
    EXPECT_THROW(cmd_train(cfg), FormatError);
}

TEST(Manifest, JsonRoundTrip) {
    const RunManifest m{"evaluate", "[run]\nseed = 1\n", {{"segment", 1.5}}, {{"a.png", "00ff"}}, {{"b.csv", "ab"}}};
    const auto back = manifest_from_json(manifest_to_json(m));
    EXPECT_EQ(back.command, m.command);
    EXPECT_EQ(back.config_text, m.config_text);
    EXPECT_EQ(back.timings, m.timings);
    EXPECT_EQ(back.inputs, m.inputs);
    EXPECT_EQ(back.outputs, m.outputs);
    EXPECT_THROW(manifest_from_json("[]"), FormatError);
}

TEST(Sha256, KnownDigest) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(RunDir, CollisionsGetSuffixes) {
    TempDir dir;
    const auto a = make_run_dir(dir.path());
    const auto b = make_run_dir(dir.path());
    EXPECT_NE(a, b);
    EXPECT_TRUE(fs::is_directory(a));
    EXPECT_TRUE(fs::is_directory(b));
}

TEST(ParallelFor, RethrowsLowestIndexFailure) {
    std::vector<int> hits(10, 0);
    EXPECT_THROW(parallel_for(10, 3,
                              [&](std::size_t i) {
                                  hits[i] = 1;
                                  if (i == 4 || i == 7) throw ConfigError("boom " + std::to_string(i));
                              }),
                 ConfigError);
    EXPECT_EQ(std::count(hits.begin(), hits.end(), 1), 10);
}

#ifdef VESSELSEG_CLI
namespace {

int run_cli(const std::string& args) {
    const int status = std::system((std::string(VESSELSEG_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
    TempDir dir;
    EXPECT_EQ(run_cli("config"), 0);
    EXPECT_EQ(run_cli("--set nonsense.key=1 config"), 2);
    EXPECT_EQ(run_cli("--set preprocess.window=4 config"), 2);
    EXPECT_EQ(run_cli("train --train-root " + (dir / "nowhere").string()), 2);
    EXPECT_EQ(run_cli("segment --model " + (dir / "missing.json").string() + " --image x.png"), 4);
    testutil::write_bytes(dir / "bad.json", "{not json");
    EXPECT_EQ(run_cli("segment --model " + (dir / "bad.json").string() + " --image x.png"), 4);
}

TEST(Cli, SynthThroughTheBinary) {
    TempDir dir;
    EXPECT_EQ(run_cli("--seed 4 synth " + (dir / "ds").string() + " --count 2"), 0);
    EXPECT_EQ(count_files(dir / "ds"), 6u);
}
#endif
