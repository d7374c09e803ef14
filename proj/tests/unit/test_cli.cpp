#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "hdrgan/checkpoint.hpp"
#include "hdrgan/error.hpp"
#include "hdrgan/evaluation.hpp"
#include "hdrgan/image_io.hpp"
#include "hdrgan/training.hpp"
#include "test_util.hpp"

using namespace hdrgan;
using testutil::TempDir;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// Toy data plus a checkpoint from one quick epoch, shared by the tests below.
class CliFixture : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new TempDir("cli");
        const auto toy = run({"toyset", "--out", (*dir_ / "toy").string(), "--seeds", "0..2", "--size", "32"});
        ASSERT_EQ(toy.code, 0) << toy.err;
        const auto tr = run({"train", "--manifest", (*dir_ / "toy" / "manifest.tsv").string(), "--out",
                             (*dir_ / "run").string(), "--epochs", "1+0", "--image_size", "32", "--base_filters", "2",
                             "--depth", "3", "--disc_filters", "2", "--seed", "4"});
        ASSERT_EQ(tr.code, 0) << tr.err;
    }
    static void TearDownTestSuite() {
        delete dir_;
        dir_ = nullptr;
    }
    static std::filesystem::path path(const std::string& rel) { return *dir_ / rel; }
    static std::string ckpt() { return path("run/final.ckpt").string(); }
    static std::string ldr() { return path("toy/ldr/toy_1_e3.png").string(); }

    static TempDir* dir_;
};

TempDir* CliFixture::dir_ = nullptr;

}  // namespace

TEST(CliParse, EpochsAndSeeds) {
    EXPECT_EQ(cli::parse_epochs("100+100"), std::make_pair(100, 100));
    EXPECT_EQ(cli::parse_epochs("7"), std::make_pair(7, 0));
    EXPECT_THROW(cli::parse_epochs("a+b"), ArgumentError);
    EXPECT_EQ(cli::parse_seed_range("0..8"), (std::pair<std::uint64_t, std::uint64_t>{0, 8}));
    EXPECT_EQ(cli::parse_seed_range("5"), (std::pair<std::uint64_t, std::uint64_t>{5, 6}));
    EXPECT_THROW(cli::parse_seed_range("4..4"), ArgumentError);
}

TEST(CliUsage, UnknownFlagAndMissingCommand) {
    const auto r = run({"infer", "--bogus"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("--ldr"), std::string::npos) << r.err;
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"frobnicate"}).code, 1);
}

TEST(CliUsage, HelpListsDefaults) {
    const auto r = run({"train", "--help"});
    EXPECT_EQ(r.code, 0);
    for (const char* s : {"--lr0", "0.0002", "--mu", "5000", "--rec_weight", "100", "--perc_weight", "0.005", "--adam_beta1",
                          "0.5", "0.999", "--batch_size", "--image_size", "256", "--gamma", "2.2"}) {
        EXPECT_NE(r.out.find(s), std::string::npos) << s;
    }
}

TEST(CliMask, ThresholdWritesPngAndSidecar) {
    TempDir dir("cli_mask");
    save_ldr(LdrImage(2, 1, {1.0f, 1.0f, 1.0f, 0.2f, 0.2f, 0.2f}), dir / "in.png");
    const auto r = run({"mask", "--provider", "threshold", "--tau", "0.98", (dir / "in.png").string(),
                        (dir / "out.png").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(load_gray_png(dir / "out.png").values, (std::vector<std::uint8_t>{255, 0}));
    EXPECT_TRUE(std::filesystem::exists(dir / "out.png.json") || std::filesystem::exists(dir / "out.json"));
    EXPECT_EQ(run({"mask", "--tau", "1.5", (dir / "in.png").string(), (dir / "o2.png").string()}).code, 1);
}

TEST(CliSynth, DirectoryOfHdrFiles) {
    TempDir dir("cli_synth");
    std::filesystem::create_directories(dir / "hdr");
    save_pfm(make_toy_scene(1, 16), dir / "hdr" / "a.pfm");
    save_pfm(make_toy_scene(2, 16), dir / "hdr" / "b.pfm");
    const auto r = run({"synth", "--hdr-dir", (dir / "hdr").string(), "--out", (dir / "o").string(), "--gamma", "2.2",
                        "--exposures", "0.5,1,2,4"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = load_manifest(dir / "o" / "manifest.tsv");
    EXPECT_EQ(m.entries.size(), 8u);
    const LdrImage z = load_ldr(dir / "o" / "a_e1.png");
    EXPECT_EQ(z, LdrImage(z.width(), z.height(),
                          [&] {
                              const auto s = synthesize_ldr(make_toy_scene(1, 16), 2.0);
                              std::vector<float> v;
                              for (float x : s.pixels()) v.push_back(quantize8(x) / 255.0f);
                              return v;
                          }()));
    EXPECT_EQ(run({"synth", "--hdr-dir", (dir / "nope").string(), "--out", (dir / "o2").string()}).code, 2);
}

TEST(CliTonemap, WritesPreview) {
    TempDir dir("cli_tm");
    save_pfm(HdrImage::filled(4, 4, 1.0f), dir / "a.pfm");
    ASSERT_EQ(run({"tonemap", "--mu", "5000", (dir / "a.pfm").string(), (dir / "a.png").string()}).code, 0);
    const LdrImage png = load_ldr(dir / "a.png");
    for (float v : png.pixels()) EXPECT_EQ(v, 1.0f);
    EXPECT_EQ(run({"tonemap", (dir / "missing.pfm").string(), (dir / "b.png").string()}).code, 2);
}

TEST_F(CliFixture, ToysetLayout) {
    const auto m = load_manifest(path("toy/manifest.tsv"));
    EXPECT_EQ(m.entries.size(), 8u);
    EXPECT_TRUE(std::filesystem::exists(path("toy/hdr/toy_0.pfm")));
    EXPECT_TRUE(std::filesystem::exists(path("run/losses.csv")));
    EXPECT_EQ(read_loss_log(path("run/losses.csv")).size(), 8u);
    EXPECT_TRUE(std::filesystem::exists(path("run/run.json")));
}

TEST_F(CliFixture, InferIsByteIdentical) {
    TempDir dir("cli_infer");
    const auto a = run({"infer", "--ldr", ldr(), "--ckpt", ckpt(), "--out", (dir / "a.pfm").string()});
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(run({"infer", "--ldr", ldr(), "--ckpt", ckpt(), "--out", (dir / "b.pfm").string()}).code, 0);
    EXPECT_EQ(slurp(dir / "a.pfm"), slurp(dir / "b.pfm"));
    EXPECT_EQ(load_hdr(dir / "a.pfm").width(), 32);
    const auto meta = nlohmann::json::parse(slurp(dir / "a.pfm.json"));
    EXPECT_TRUE(meta.contains("flags"));
}

TEST_F(CliFixture, DumpStagesWithZeroMask) {
    TempDir dir("cli_stages");
    save_gray_png({32, 32, std::vector<std::uint8_t>(32 * 32, 0)}, dir / "zeros.png");
    const auto r = run({"infer", "--ldr", ldr(), "--ckpt", ckpt(), "--out", (dir / "h.pfm").string(), "--mask",
                        (dir / "zeros.png").string(), "--dump-stages", "--tonemap-preview",
                        (dir / "p.png").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const HdrImage e = load_hdr(dir / "h_linearized.pfm"), m = load_hdr(dir / "h_corrected.pfm");
    const HdrImage h = load_hdr(dir / "h.pfm");
    EXPECT_EQ(e, m);
    EXPECT_EQ(e.width(), h.width());
    EXPECT_EQ(e.height(), h.height());
    EXPECT_TRUE(std::filesystem::exists(dir / "p.png"));
}

TEST_F(CliFixture, InferRejectsWrongMaskSize) {
    TempDir dir("cli_badmask");
    save_gray_png({16, 16, std::vector<std::uint8_t>(256, 0)}, dir / "m.png");
    const auto r = run({"infer", "--ldr", ldr(), "--ckpt", ckpt(), "--out", (dir / "h.pfm").string(), "--mask",
                        (dir / "m.png").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(r.err.empty());
}

TEST_F(CliFixture, EvalWritesReport) {
    TempDir dir("cli_eval");
    const auto r = run({"eval", "--manifest", path("toy/manifest.tsv").string(), "--ckpt", ckpt(), "--out",
                        (dir / "r.csv").string(), "--size", "32"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rep = read_report_csv(dir / "r.csv");
    EXPECT_EQ(rep.rows.size(), 8u);
    EXPECT_EQ(rep.meta.at("resolution"), "32");
    EXPECT_EQ(rep.meta.at("mu"), "5000");
    EXPECT_NE(r.out.find("PSNR"), std::string::npos);
}

TEST_F(CliFixture, EvalDefaultsToTrainingResolution) {
    TempDir dir("cli_eval_res");
    const auto r = run({"eval", "--manifest", path("toy/manifest.tsv").string(), "--ckpt", ckpt(), "--out",
                        (dir / "r.csv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rep = read_report_csv(dir / "r.csv");
    EXPECT_EQ(rep.meta.at("resolution"), "32");
    EXPECT_EQ(rep.meta.count("jpeg_decoder"), 1u);
}

TEST_F(CliFixture, ConfigFileMergesUnderFlags) {
    TempDir dir("cli_cfg");
    { std::ofstream(dir / "c.toml") << "seed = 11\nlr0 = 0.001\nbase_filters = 2\ndepth = 3\ndisc_filters = 2\n"; }
    const auto r = run({"train", "--manifest", path("toy/manifest.tsv").string(), "--out", (dir / "o").string(),
                        "--config", (dir / "c.toml").string(), "--seed", "12", "--epochs", "1", "--image_size", "32"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto ck = read_checkpoint(dir / "o" / "final.ckpt");
    EXPECT_EQ(ck.meta["config"]["seed"].get<std::uint64_t>(), 12u);
    EXPECT_EQ(ck.meta["config"]["lr0"].get<double>(), 0.001);
    { std::ofstream(dir / "bad.toml") << "no_such_key = 1\n"; }
    EXPECT_EQ(run({"train", "--manifest", path("toy/manifest.tsv").string(), "--out", (dir / "p").string(),
                   "--config", (dir / "bad.toml").string()})
                  .code,
              2);
}

TEST_F(CliFixture, DivergenceExitsThree) {
    TempDir dir("cli_nan");
    const auto r = run({"train", "--manifest", path("toy/manifest.tsv").string(), "--out", (dir / "o").string(),
                        "--epochs", "3+0", "--image_size", "32", "--base_filters", "2", "--depth", "3",
                        "--disc_filters", "2", "--lr0", "1e300", "--checkpoint_every", "1"});
    EXPECT_EQ(r.code, 3) << r.err;
    EXPECT_NE(r.err.find("last checkpoint"), std::string::npos) << r.err;
}

TEST_F(CliFixture, MissingCheckpointIsDataError) {
    TempDir dir("cli_missing");
    EXPECT_EQ(run({"infer", "--ldr", ldr(), "--ckpt", (dir / "x.ckpt").string(), "--out", (dir / "h.pfm").string()})
                  .code,
              2);
}
