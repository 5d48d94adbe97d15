#include "mmt/binary_io.hpp"

#include <fstream>
#include <iterator>

#include "mmt/error.hpp"

namespace mmt {

void BinaryWriter::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
  if (!out) throw FileError("short write to " + path.string());
}

BinaryReader::BinaryReader(const std::filesystem::path& path) : origin_(path.string()) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open " + path.string());
  buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void BinaryReader::bytes(void* p, std::size_t n) {
  if (n > buf_.size() - pos_) throw DataError("unexpected end of file" + (origin_.empty() ? "" : " in " + origin_));
  std::memcpy(p, buf_.data() + pos_, n);
  pos_ += n;
}

std::uint8_t BinaryReader::u8() {
  std::uint8_t v;
  bytes(&v, 1);
  return v;
}

std::string BinaryReader::str() {
  std::string s(u32(), '\0');
  bytes(s.data(), s.size());
  return s;
}

void BinaryReader::expect_end() const {
  if (pos_ != buf_.size()) throw DataError("trailing bytes" + (origin_.empty() ? "" : " in " + origin_));
}

}  // namespace mmt
