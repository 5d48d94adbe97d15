#pragma once

// Little-endian byte buffers for the dataset and checkpoint files.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mmt {

class BinaryWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void f64s(std::span<const double> vs) {
    for (double v : vs) f64(v);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  const std::vector<unsigned char>& buffer() const noexcept { return buf_; }
  void save(const std::filesystem::path& path) const;

 private:
  template <typename T>
  void put(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  std::vector<unsigned char> buf_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path);
  explicit BinaryReader(std::vector<unsigned char> data) : buf_(std::move(data)) {}

  void bytes(void* p, std::size_t n);
  std::uint8_t u8();
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  void f64s(std::span<double> out) {
    for (double& v : out) v = f64();
  }
  std::string str();
  void expect_end() const;
  const std::vector<unsigned char>& buffer() const noexcept { return buf_; }

 private:
  template <typename T>
  T get() {
    unsigned char b[sizeof(T)];
    bytes(b, sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
    return v;
  }
  std::vector<unsigned char> buf_;
  std::size_t pos_ = 0;
  std::string origin_;
};

}  // namespace mmt
