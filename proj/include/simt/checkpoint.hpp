#ifndef SIMT_CHECKPOINT_HPP
#define SIMT_CHECKPOINT_HPP

// Binary checkpoint format, all integers and floats little-endian:
//
//   "SMDC"                      4 bytes magic
//   version                     u8, currently 1
//   src_vocab tgt_vocab embedding hidden attention     u32 each
//   source vocabulary, target vocabulary:
//       count u32, then per token: length u32 + UTF-8 bytes
//   tensors in ModelParams::for_each order, row-major f64:
//       src_emb tgt_emb
//       enc.{w_r u_r b_r w_u u_u b_u w_c u_c b_c}
//       dec.{w_r u_r b_r w_u u_u b_u w_c u_c b_c}
//       att_w att_u att_e att_b att_v out_w out_b init_w init_b

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "simt/error.hpp"
#include "simt/model.hpp"

namespace simt {

inline constexpr char kCheckpointMagic[4] = {'S', 'M', 'D', 'C'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

class CheckpointError : public DataError {
 public:
  enum class Kind { io, bad_magic, unsupported_version, truncated, shape_mismatch };

  CheckpointError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct Checkpoint {
  ModelConfig config;
  Vocabulary source_vocab;
  Vocabulary target_vocab;
  ModelParams params;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
void put_le(std::vector<char>& buf, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  buf.insert(buf.end(), bytes, bytes + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<char>& buf) : buf_(buf) {}

  template <class T>
  T get() {
    need(sizeof(T));
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const noexcept { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n)
      throw CheckpointError(CheckpointError::Kind::truncated, "checkpoint truncated");
  }

  const std::vector<char>& buf_;
  std::size_t pos_ = 0;
};

inline void put_vocab(std::vector<char>& buf, const Vocabulary& v) {
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(v.size()));
  for (const auto& tok : v.tokens()) {
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(tok.size()));
    buf.insert(buf.end(), tok.begin(), tok.end());
  }
}

inline Vocabulary get_vocab(Reader& in, std::size_t expected) {
  const auto count = in.get<std::uint32_t>();
  if (count != expected)
    throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                          "vocabulary size " + std::to_string(count) + " does not match config " +
                              std::to_string(expected));
  Vocabulary v;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = in.get<std::uint32_t>();
    const std::string tok = in.bytes(len);
    if (i < v.size()) {
      if (v.token(static_cast<TokenId>(i)) != tok)
        throw CheckpointError(CheckpointError::Kind::shape_mismatch, "reserved token mismatch");
      continue;
    }
    if (v.contains(tok))
      throw CheckpointError(CheckpointError::Kind::shape_mismatch, "duplicate vocabulary token");
    v.add(tok);
  }
  return v;
}

}  // namespace detail

inline std::vector<char> serialize_checkpoint(const Checkpoint& ck) {
  if (ck.params.config() != ck.config)
    throw CheckpointError(CheckpointError::Kind::shape_mismatch, "params do not match config");
  std::vector<char> buf(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  buf.push_back(static_cast<char>(kCheckpointVersion));
  for (std::size_t d : {ck.config.src_vocab, ck.config.tgt_vocab, ck.config.embedding, ck.config.hidden,
                        ck.config.attention})
    detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(d));
  detail::put_vocab(buf, ck.source_vocab);
  detail::put_vocab(buf, ck.target_vocab);
  ck.params.for_each([&](const RealMatrix& m) {
    for (double x : m.data) detail::put_le<double>(buf, x);
  });
  return buf;
}

inline Checkpoint deserialize_checkpoint(const std::vector<char>& buf) {
  using Kind = CheckpointError::Kind;
  if (buf.size() < 4 || std::memcmp(buf.data(), kCheckpointMagic, 4) != 0)
    throw CheckpointError(Kind::bad_magic, "bad magic");
  detail::Reader in(buf);
  in.bytes(4);
  const auto version = in.get<std::uint8_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError(Kind::unsupported_version, "unsupported version " + std::to_string(version));
  Checkpoint ck;
  ck.config.src_vocab = in.get<std::uint32_t>();
  ck.config.tgt_vocab = in.get<std::uint32_t>();
  ck.config.embedding = in.get<std::uint32_t>();
  ck.config.hidden = in.get<std::uint32_t>();
  ck.config.attention = in.get<std::uint32_t>();
  try {
    ck.config.validate();
  } catch (const UsageError& e) {
    throw CheckpointError(Kind::shape_mismatch, e.what());
  }
  ck.source_vocab = detail::get_vocab(in, ck.config.src_vocab);
  ck.target_vocab = detail::get_vocab(in, ck.config.tgt_vocab);
  ck.params = ModelParams(ck.config);
  ck.params.for_each([&](RealMatrix& m) {
    for (double& x : m.data) x = in.get<double>();
  });
  if (!in.at_end()) throw CheckpointError(Kind::shape_mismatch, "trailing bytes after last tensor");
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const auto buf = serialize_checkpoint(ck);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Kind::io, "cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::io, "write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::io, "cannot read " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(buf);
}

}  // namespace simt

#endif  // SIMT_CHECKPOINT_HPP
