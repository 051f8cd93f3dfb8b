#pragma once

// Little-endian byte packing shared by the DNNR-* binary formats, plus the
// FNV-1a trailer every one of them carries.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace dnnr {

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffset) noexcept;

/// SplitMix64 finalizer. Used to derive independent seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Per-user seed that depends only on the run seed and the user id, never on
/// scheduling order.
std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view key) noexcept;

class ByteWriter {
 public:
  void u8(std::uint8_t v);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void raw(std::string_view bytes);
  /// u16 length prefix followed by the bytes.
  void str16(std::string_view s);

  const std::string& bytes() const noexcept { return buf_; }

  /// Appends the FNV-1a checksum of everything written so far and returns the
  /// finished buffer.
  std::string seal() &&;

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : data_(bytes) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string_view raw(std::size_t n);
  std::string str16();

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  bool done() const noexcept { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const;

  std::string_view data_;
  std::size_t pos_ = 0;
};

/// Checks the trailing u64 FNV-1a checksum and returns the payload before it.
/// Throws FormatError naming `what` on mismatch or short input.
std::string_view verify_sealed(std::string_view file_bytes, std::string_view what);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace dnnr
