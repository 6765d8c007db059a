#include "wsmots/blob.hpp"

#include <bit>
#include <cstring>
#include <string>

#include "wsmots/error.hpp"
#include "wsmots/fsutil.hpp"

namespace wsmots {

namespace {

constexpr char kMagic[4] = {'M', 'O', 'T', 'K'};
constexpr std::uint8_t kDtypeFloat32 = 0;
constexpr std::size_t kMaxDims = 255;

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::string_view in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)])) << (8 * i);
  }
  return v;
}

std::uint64_t product(const std::vector<std::uint32_t>& dims) {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

}  // namespace

TensorBlob::TensorBlob(std::vector<std::uint32_t> dims_, std::vector<float> data_)
    : dims(std::move(dims_)), data(std::move(data_)) {
  if (dims.size() > kMaxDims) throw ShapeError("tensor has more than 255 dimensions");
  if (product(dims) != data.size()) {
    throw ShapeError("tensor data has " + std::to_string(data.size()) + " values, dims give " +
                     std::to_string(product(dims)));
  }
}

std::size_t TensorBlob::elements() const noexcept { return data.size(); }

std::vector<double> TensorBlob::to_doubles() const { return {data.begin(), data.end()}; }

TensorBlob TensorBlob::from_doubles(std::vector<std::uint32_t> dims, const std::vector<double>& values) {
  std::vector<float> data(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) data[i] = static_cast<float>(values[i]);
  return TensorBlob(std::move(dims), std::move(data));
}

std::string encode_blob(const TensorBlob& blob) {
  if (blob.dims.size() > kMaxDims || product(blob.dims) != blob.data.size()) {
    throw ShapeError("tensor dims do not match its data");
  }
  std::string out(kMagic, 4);
  put_le(out, kBlobVersion, 2);
  put_le(out, kDtypeFloat32, 1);
  put_le(out, blob.dims.size(), 1);
  for (auto d : blob.dims) put_le(out, d, 4);
  out.reserve(out.size() + 4 * blob.data.size());
  for (float v : blob.data) put_le(out, std::bit_cast<std::uint32_t>(v), 4);
  return out;
}

TensorBlob decode_blob(std::string_view bytes) {
  if (bytes.size() < 8) throw FormatError("blob truncated in header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("blob has bad magic");
  const auto version = get_le(bytes, 4, 2);
  if (version != kBlobVersion) throw FormatError("unsupported blob version " + std::to_string(version));
  const auto dtype = get_le(bytes, 6, 1);
  if (dtype != kDtypeFloat32) throw FormatError("unknown blob dtype " + std::to_string(dtype));
  const auto ndim = static_cast<std::size_t>(get_le(bytes, 7, 1));
  std::size_t at = 8;
  if (bytes.size() < at + 4 * ndim) throw FormatError("blob truncated in dims");
  std::vector<std::uint32_t> dims(ndim);
  for (auto& d : dims) {
    d = static_cast<std::uint32_t>(get_le(bytes, at, 4));
    at += 4;
  }
  std::uint64_t n = 1;
  for (auto d : dims) {
    if (d != 0 && n > (std::uint64_t{1} << 60) / d) throw FormatError("blob dims overflow");
    n *= d;
  }
  const std::uint64_t payload = bytes.size() - at;
  if (payload < 4 * n) throw FormatError("blob truncated: payload holds " + std::to_string(payload / 4) +
                                         " of " + std::to_string(n) + " values");
  if (payload > 4 * n) throw FormatError("blob has trailing bytes");
  std::vector<float> data(n);
  for (auto& v : data) {
    v = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, at, 4)));
    at += 4;
  }
  return TensorBlob(std::move(dims), std::move(data));
}

TensorBlob read_blob(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  try {
    return decode_blob(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_blob(const TensorBlob& blob, const std::filesystem::path& path) {
  write_file_atomic(path, encode_blob(blob));
}

}  // namespace wsmots
