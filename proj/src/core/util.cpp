#include "core/util.hpp"

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace fblin {

namespace {

// Plain SHA-1 (FIPS 180-4). Inputs here are small model/config files, so
// the whole message is buffered.
class Sha1 {
 public:
  void feed(const unsigned char* data, std::size_t len) {
    total_bits_ += static_cast<std::uint64_t>(len) * 8;
    while (len > 0) {
      const std::size_t take = std::min(len, std::size_t{64} - fill_);
      std::memcpy(block_.data() + fill_, data, take);
      fill_ += take;
      data += take;
      len -= take;
      if (fill_ == 64) {
        process();
        fill_ = 0;
      }
    }
  }

  std::string hex_digest() {
    const unsigned char pad = 0x80;
    const std::uint64_t bits = total_bits_;
    feed(&pad, 1);
    const unsigned char zero = 0x00;
    while (fill_ != 56) feed(&zero, 1);
    std::array<unsigned char, 8> len_bytes;
    for (int i = 0; i < 8; ++i)
      len_bytes[static_cast<std::size_t>(i)] =
          static_cast<unsigned char>((bits >> (56 - 8 * i)) & 0xff);
    feed(len_bytes.data(), 8);

    std::string out;
    out.reserve(40);
    static const char* hex = "0123456789abcdef";
    for (std::uint32_t word : h_) {
      for (int shift = 28; shift >= 0; shift -= 4)
        out.push_back(hex[(word >> shift) & 0xf]);
    }
    return out;
  }

 private:
  static std::uint32_t rotl(std::uint32_t x, int n) { return (x << n) | (x >> (32 - n)); }

  void process() {
    std::array<std::uint32_t, 80> w;
    for (int i = 0; i < 16; ++i) {
      const auto base = static_cast<std::size_t>(4 * i);
      w[static_cast<std::size_t>(i)] =
          (static_cast<std::uint32_t>(block_[base]) << 24) |
          (static_cast<std::uint32_t>(block_[base + 1]) << 16) |
          (static_cast<std::uint32_t>(block_[base + 2]) << 8) |
          static_cast<std::uint32_t>(block_[base + 3]);
    }
    for (std::size_t i = 16; i < 80; ++i)
      w[i] = rotl(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);

    std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
    for (std::size_t i = 0; i < 80; ++i) {
      std::uint32_t f;
      std::uint32_t k;
      if (i < 20) {
        f = (b & c) | (~b & d);
        k = 0x5a827999u;
      } else if (i < 40) {
        f = b ^ c ^ d;
        k = 0x6ed9eba1u;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8f1bbcdcu;
      } else {
        f = b ^ c ^ d;
        k = 0xca62c1d6u;
      }
      const std::uint32_t tmp = rotl(a, 5) + f + e + k + w[i];
      e = d;
      d = c;
      c = rotl(b, 30);
      b = a;
      a = tmp;
    }
    h_[0] += a;
    h_[1] += b;
    h_[2] += c;
    h_[3] += d;
    h_[4] += e;
  }

  std::array<std::uint32_t, 5> h_{0x67452301u, 0xefcdab89u, 0x98badcfeu, 0x10325476u,
                                  0xc3d2e1f0u};
  std::array<unsigned char, 64> block_{};
  std::size_t fill_ = 0;
  std::uint64_t total_bits_ = 0;
};

}  // namespace

std::string git_blob_sha1(const std::string& content) {
  Sha1 sha;
  const std::string header = "blob " + std::to_string(content.size());
  sha.feed(reinterpret_cast<const unsigned char*>(header.data()), header.size() + 1);
  sha.feed(reinterpret_cast<const unsigned char*>(content.data()), content.size());
  return sha.hex_digest();
}

std::string git_blob_sha1_file(const std::filesystem::path& path) {
  return git_blob_sha1(read_text_file(path));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << content;
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

std::string format_double(double v) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace fblin
