#pragma once

// Packed binary sketches and Hamming distance.
//
// Bits are stored LSB-first in 64-bit words: bit i lives in word i/64 at
// offset i%64. Padding bits past logical_len are kept at zero, so the
// Hamming distance of two sketches is a plain XOR-popcount over words.
//
// A sketch produced by an embedder is a concatenation of two blocks:
// angular bits occupy positions [0, beta_angular) and shifted bits occupy
// [beta_angular, size()). Sketches built directly (tests, generic bit
// strings) default to beta_angular == size().

#include <bit>
#include <cstdint>
#include <cstring>
#include <climits>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rhpt/error.hpp"

namespace rhpt {

class BinarySketch {
 public:
  static constexpr std::size_t kWordBits = 64;

  BinarySketch() = default;

  explicit BinarySketch(std::size_t logical_len)
      : BinarySketch(logical_len, logical_len) {}

  BinarySketch(std::size_t logical_len, std::size_t beta_angular)
      : logical_len_(logical_len),
        beta_angular_(beta_angular),
        words_((logical_len + kWordBits - 1) / kWordBits, 0) {
    if (logical_len == 0) {
      throw std::invalid_argument("BinarySketch: logical_len must be >= 1");
    }
    if (beta_angular > logical_len) {
      throw std::invalid_argument("BinarySketch: beta_angular exceeds logical_len");
    }
  }

  std::size_t size() const { return logical_len_; }
  std::size_t beta_angular() const { return beta_angular_; }
  std::size_t beta_shifted() const { return logical_len_ - beta_angular_; }
  std::size_t word_count() const { return words_.size(); }

  bool bit(std::size_t i) const {
    return (words_[i / kWordBits] >> (i % kWordBits)) & 1ULL;
  }

  void set_bit(std::size_t i, bool value) {
    const std::uint64_t mask = 1ULL << (i % kWordBits);
    if (value) {
      words_[i / kWordBits] |= mask;
    } else {
      words_[i / kWordBits] &= ~mask;
    }
  }

  std::span<const std::uint64_t> words() const { return words_; }
  std::uint64_t* word_data() { return words_.data(); }
  const std::uint64_t* word_data() const { return words_.data(); }

  bool operator==(const BinarySketch& other) const {
    return logical_len_ == other.logical_len_ &&
           beta_angular_ == other.beta_angular_ && words_ == other.words_;
  }

 private:
  std::size_t logical_len_ = 0;
  std::size_t beta_angular_ = 0;
  std::vector<std::uint64_t> words_;
};

namespace detail {

inline void check_same_layout(const BinarySketch& a, const BinarySketch& b) {
  if (a.size() != b.size() || a.beta_angular() != b.beta_angular()) {
    throw std::invalid_argument(
        "hamming: sketches have different lengths or layouts (" +
        std::to_string(a.size()) + "/" + std::to_string(a.beta_angular()) +
        " vs " + std::to_string(b.size()) + "/" +
        std::to_string(b.beta_angular()) + ")");
  }
}

}  // namespace detail

// Number of differing bit positions. Requires identical length and layout.
inline std::size_t hamming(const BinarySketch& a, const BinarySketch& b) {
  detail::check_same_layout(a, b);
  const auto wa = a.words();
  const auto wb = b.words();
  std::size_t acc = 0;
  for (std::size_t w = 0; w < wa.size(); ++w) {
    acc += static_cast<std::size_t>(std::popcount(wa[w] ^ wb[w]));
  }
  return acc;
}

// Hamming distance restricted to bit positions [first, last).
inline std::size_t hamming_range(const BinarySketch& a, const BinarySketch& b,
                                 std::size_t first, std::size_t last) {
  detail::check_same_layout(a, b);
  if (first > last || last > a.size()) {
    throw std::invalid_argument("hamming_range: bad bit range");
  }
  if (first == last) return 0;
  const auto wa = a.words();
  const auto wb = b.words();
  const std::size_t wfirst = first / BinarySketch::kWordBits;
  const std::size_t wlast = (last - 1) / BinarySketch::kWordBits;
  std::size_t acc = 0;
  for (std::size_t w = wfirst; w <= wlast; ++w) {
    std::uint64_t x = wa[w] ^ wb[w];
    if (w == wfirst) {
      x &= ~0ULL << (first % BinarySketch::kWordBits);
    }
    if (w == wlast) {
      const std::size_t top = (last - 1) % BinarySketch::kWordBits;
      if (top != 63) x &= (2ULL << top) - 1;
    }
    acc += static_cast<std::size_t>(std::popcount(x));
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Binary dump format, for cross-language checks.
//
//   bytes 0..3   magic "RHPT"
//   bytes 4..7   version (u32, little endian, currently 1)
//   bytes 8..15  logical_len (u64, little endian)
//   then ceil(logical_len/64) u64 words per sketch, little endian,
//   sketches back to back. The layout split is not part of the stream;
//   load_sketches assigns beta_angular to every loaded sketch.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u64_le(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t get_u64_le(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace detail

constexpr std::uint32_t kSketchDumpVersion = 1;

inline void dump_sketches(std::ostream& out, std::span<const BinarySketch> sketches) {
  if (sketches.empty()) {
    throw std::invalid_argument("dump_sketches: nothing to write");
  }
  const std::size_t len = sketches.front().size();
  for (const auto& s : sketches) {
    if (s.size() != len) {
      throw std::invalid_argument("dump_sketches: mixed sketch lengths");
    }
  }
  out.write("RHPT", 4);
  unsigned char ver[4] = {kSketchDumpVersion & 0xff, 0, 0, 0};
  out.write(reinterpret_cast<const char*>(ver), 4);
  detail::put_u64_le(out, len);
  for (const auto& s : sketches) {
    for (std::uint64_t w : s.words()) detail::put_u64_le(out, w);
  }
  if (!out) throw IoError("dump_sketches: write failed");
}

inline std::vector<BinarySketch> load_sketches(std::istream& in,
                                               std::size_t beta_angular = SIZE_MAX) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "RHPT", 4) != 0) {
    throw IoError("load_sketches: bad magic");
  }
  unsigned char ver[4];
  in.read(reinterpret_cast<char*>(ver), 4);
  if (!in || ver[0] != kSketchDumpVersion || ver[1] || ver[2] || ver[3]) {
    throw IoError("load_sketches: unsupported version");
  }
  const std::uint64_t len = detail::get_u64_le(in);
  if (!in || len == 0) {
    throw IoError("load_sketches: bad logical length");
  }
  if (beta_angular == SIZE_MAX) beta_angular = static_cast<std::size_t>(len);
  const std::size_t words = (len + BinarySketch::kWordBits - 1) / BinarySketch::kWordBits;
  std::vector<BinarySketch> result;
  while (in.peek() != std::istream::traits_type::eof()) {
    BinarySketch s(static_cast<std::size_t>(len), beta_angular);
    std::uint64_t* data = s.word_data();
    for (std::size_t w = 0; w < words; ++w) data[w] = detail::get_u64_le(in);
    if (!in) {
      throw IoError("load_sketches: truncated stream");
    }
    result.push_back(std::move(s));
  }
  return result;
}

}  // namespace rhpt
