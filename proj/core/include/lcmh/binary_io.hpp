#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lcmh {

/// Appends little-endian fields to a byte buffer.
class ByteWriter {
 public:
  void magic(std::string_view four_chars);
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void f64s(std::span<const double> vs);
  void raw(std::span<const std::uint8_t> bytes);

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Reads little-endian fields; every failure is a FormatError carrying the byte offset.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void expect_magic(std::string_view four_chars);
  /// Reads a u32 version and throws unless it equals `supported`.
  std::uint32_t expect_version(std::uint32_t supported);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  /// Reads a u64 count bounded by the remaining bytes at `bytes_per_item` each.
  std::uint64_t count(std::size_t bytes_per_item, const char* what);
  std::span<const std::uint8_t> raw(std::size_t n);

  std::size_t offset() const noexcept { return offset_; }
  std::size_t remaining() const noexcept { return bytes_.size() - offset_; }
  bool at_end() const noexcept { return offset_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const;

  std::span<const std::uint8_t> bytes_;
  std::size_t offset_ = 0;
};

/// Throws IoError when the file cannot be opened.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace lcmh
