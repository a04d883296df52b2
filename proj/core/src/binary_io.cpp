#include "lcmh/binary_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "lcmh/errors.hpp"

namespace lcmh {

void ByteWriter::magic(std::string_view four_chars) {
  for (char ch : four_chars) bytes_.push_back(static_cast<std::uint8_t>(ch));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::f64s(std::span<const double> vs) {
  bytes_.reserve(bytes_.size() + 8 * vs.size());
  for (double v : vs) f64(v);
}

void ByteWriter::raw(std::span<const std::uint8_t> bytes) {
  bytes_.insert(bytes_.end(), bytes.begin(), bytes.end());
}

void ByteReader::need(std::size_t n, const char* what) const {
  if (remaining() < n)
    throw FormatError(std::string("truncated file while reading ") + what, offset_);
}

void ByteReader::expect_magic(std::string_view four_chars) {
  need(four_chars.size(), "magic");
  for (std::size_t i = 0; i < four_chars.size(); ++i) {
    if (bytes_[offset_ + i] != static_cast<std::uint8_t>(four_chars[i]))
      throw FormatError("bad magic, expected '" + std::string(four_chars) + "'", offset_);
  }
  offset_ += four_chars.size();
}

std::uint32_t ByteReader::expect_version(std::uint32_t supported) {
  const std::size_t at = offset_;
  const std::uint32_t v = u32();
  if (v != supported)
    throw FormatError("unsupported format version " + std::to_string(v) + " (expected " +
                          std::to_string(supported) + ")",
                      at);
  return v;
}

std::uint8_t ByteReader::u8() {
  need(1, "u8");
  return bytes_[offset_++];
}

std::uint32_t ByteReader::u32() {
  need(4, "u32");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[offset_ + i]) << (8 * i);
  offset_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8, "u64");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[offset_ + i]) << (8 * i);
  offset_ += 8;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::uint64_t ByteReader::count(std::size_t bytes_per_item, const char* what) {
  const std::size_t at = offset_;
  const std::uint64_t n = u64();
  if (bytes_per_item > 0 && n > remaining() / bytes_per_item)
    throw FormatError(std::string("implausible ") + what + " " + std::to_string(n), at);
  return n;
}

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
  need(n, "raw bytes");
  auto out = bytes_.subspan(offset_, n);
  offset_ += n;
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace lcmh
