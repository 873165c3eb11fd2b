#include <filesystem>

#include <gtest/gtest.h>

#include "simt/checkpoint.hpp"

namespace simt {
namespace {

Checkpoint sample_checkpoint() {
  Checkpoint ck;
  for (const char* t : {"a", "b", "c"}) ck.source_vocab.add(t);
  for (const char* t : {"x", "y"}) ck.target_vocab.add(t);
  ck.config = {ck.source_vocab.size(), ck.target_vocab.size(), 3, 4, 5};
  Rng rng(21);
  ck.params = ModelParams::random(ck.config, rng);
  ck.params.out_b.data[1] = -0.125;
  return ck;
}

CheckpointError::Kind kind_of(const std::vector<char>& buf) {
  try {
    deserialize_checkpoint(buf);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return CheckpointError::Kind::io;
}

TEST(Checkpoint, RoundTripIsBitwise) {
  const auto ck = sample_checkpoint();
  const auto buf = serialize_checkpoint(ck);
  const auto back = deserialize_checkpoint(buf);
  EXPECT_EQ(back, ck);
  EXPECT_EQ(serialize_checkpoint(back), buf);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto ck = sample_checkpoint();
  const auto path = std::filesystem::temp_directory_path() / "simt_checkpoint_test.smdc";
  save_checkpoint(ck, path);
  EXPECT_EQ(load_checkpoint(path), ck);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), CheckpointError);
}

TEST(Checkpoint, HeaderLayout) {
  const auto buf = serialize_checkpoint(sample_checkpoint());
  ASSERT_GT(buf.size(), 25u);
  EXPECT_EQ(std::string(buf.data(), 4), "SMDC");
  EXPECT_EQ(buf[4], 1);
  EXPECT_EQ(static_cast<unsigned char>(buf[5]), 6u);  // src_vocab, little-endian u32
  EXPECT_EQ(buf[6], 0);
}

TEST(Checkpoint, BadMagic) {
  auto buf = serialize_checkpoint(sample_checkpoint());
  buf[0] = 'X';
  EXPECT_EQ(kind_of(buf), CheckpointError::Kind::bad_magic);
  try {
    deserialize_checkpoint(buf);
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos);
  }
}

TEST(Checkpoint, UnsupportedVersion) {
  auto buf = serialize_checkpoint(sample_checkpoint());
  buf[4] = 7;
  EXPECT_EQ(kind_of(buf), CheckpointError::Kind::unsupported_version);
  try {
    deserialize_checkpoint(buf);
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported version"), std::string::npos);
  }
}

TEST(Checkpoint, Truncated) {
  const auto buf = serialize_checkpoint(sample_checkpoint());
  for (std::size_t cut : {std::size_t{5}, std::size_t{12}, buf.size() / 2, buf.size() - 1}) {
    const std::vector<char> part(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_EQ(kind_of(part), CheckpointError::Kind::truncated) << cut;
  }
}

TEST(Checkpoint, ShapeMismatch) {
  auto buf = serialize_checkpoint(sample_checkpoint());
  buf.push_back(0);
  EXPECT_EQ(kind_of(buf), CheckpointError::Kind::shape_mismatch);

  auto wrong = serialize_checkpoint(sample_checkpoint());
  wrong[5] = 9;  // source vocabulary size no longer matches the stored tokens
  EXPECT_EQ(kind_of(wrong), CheckpointError::Kind::shape_mismatch);

  auto ck = sample_checkpoint();
  ck.config.hidden = 5;
  EXPECT_THROW(serialize_checkpoint(ck), CheckpointError);
}

}  // namespace
}  // namespace simt
