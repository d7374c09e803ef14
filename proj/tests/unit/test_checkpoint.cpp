#include <gtest/gtest.h>

#include <fstream>
#include <iterator>

#include "hdrgan/checkpoint.hpp"
#include "hdrgan/error.hpp"
#include "test_util.hpp"

using namespace hdrgan;
using testutil::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Checkpoint sample() {
    Checkpoint c;
    c.meta = {{"kind", "test"}, {"epoch", 3}, {"nested", {{"b", 1.5}, {"a", "x"}}}};
    c.tensors.emplace_back("z/first", testutil::random_tensor({1, 2, 3, 4}, 1, -1, 1));
    c.tensors.emplace_back("a/second", ag::Tensor({2, 1, 1, 1}, {1e-300, -0.0}));
    return c;
}

}  // namespace

TEST(Checkpoint, RoundTripPreservesEverything) {
    TempDir dir("ckpt");
    const Checkpoint c = sample();
    write_checkpoint(c, dir / "a.ckpt");
    const Checkpoint r = read_checkpoint(dir / "a.ckpt");
    EXPECT_EQ(r.meta, c.meta);
    ASSERT_EQ(r.tensors.size(), 2u);
    EXPECT_EQ(r.tensors[0].first, "z/first");
    EXPECT_EQ(r.tensor("z/first").data, c.tensors[0].second.data);
    EXPECT_EQ(r.tensor("a/second").shape, (ag::Shape{2, 1, 1, 1}));
    EXPECT_TRUE(std::signbit(r.tensor("a/second").data[1]));
    EXPECT_FALSE(r.has_tensor("nope"));
    EXPECT_THROW(r.tensor("nope"), ConfigError);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
    TempDir dir("ckpt_bytes");
    write_checkpoint(sample(), dir / "a.ckpt");
    write_checkpoint(read_checkpoint(dir / "a.ckpt"), dir / "b.ckpt");
    EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));
    EXPECT_EQ(slurp(dir / "a.ckpt").rfind(kCheckpointMagic, 0), 0u);
}

TEST(Checkpoint, RejectsForeignAndTruncatedFiles) {
    TempDir dir("ckpt_bad");
    { std::ofstream(dir / "x.ckpt") << "HDRGAN-CKPT v0\n........"; }
    EXPECT_THROW(read_checkpoint(dir / "x.ckpt"), ConfigError);
    write_checkpoint(sample(), dir / "a.ckpt");
    const std::string bytes = slurp(dir / "a.ckpt");
    { std::ofstream(dir / "t.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 9); }
    EXPECT_THROW(read_checkpoint(dir / "t.ckpt"), FormatError);
    EXPECT_THROW(read_checkpoint(dir / "missing.ckpt"), IoError);
}
