#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace wsmots {

/// Row-major float32 tensor.
///
/// File layout, little-endian: "MOTK", u16 version (1), u8 dtype (0 =
/// float32), u8 ndim, ndim x u32 dims, then the payload.
struct TensorBlob {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  TensorBlob() = default;
  /// Throws ShapeError when data.size() differs from the product of dims.
  TensorBlob(std::vector<std::uint32_t> dims, std::vector<float> data);

  std::size_t elements() const noexcept;
  std::vector<double> to_doubles() const;
  static TensorBlob from_doubles(std::vector<std::uint32_t> dims, const std::vector<double>& values);

  friend bool operator==(const TensorBlob&, const TensorBlob&) = default;
};

inline constexpr std::uint16_t kBlobVersion = 1;

std::string encode_blob(const TensorBlob& blob);
/// Throws FormatError on a bad magic, version or dtype, truncation or trailing bytes.
TensorBlob decode_blob(std::string_view bytes);

TensorBlob read_blob(const std::filesystem::path& path);
void write_blob(const TensorBlob& blob, const std::filesystem::path& path);

}  // namespace wsmots
