#include "wsmots/rle.hpp"

#include <string>

namespace wsmots {

std::vector<std::uint32_t> mask_to_runs(const BinaryMask& m) {
  std::vector<std::uint32_t> runs;
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int c = 0; c < m.width(); ++c) {
    for (int r = 0; r < m.height(); ++r) {
      if (m(r, c) != current) {
        runs.push_back(run);
        run = 0;
        current = m(r, c);
      }
      ++run;
    }
  }
  runs.push_back(run);
  return runs;
}

BinaryMask runs_to_mask(std::span<const std::uint32_t> runs, int height, int width) {
  const std::uint64_t total = static_cast<std::uint64_t>(height) * static_cast<std::uint64_t>(width);
  std::uint64_t sum = 0;
  for (auto r : runs) sum += r;
  if (sum != total) {
    throw FormatError("RLE runs sum to " + std::to_string(sum) + ", expected " +
                      std::to_string(height) + "x" + std::to_string(width) + "=" +
                      std::to_string(total));
  }
  BinaryMask m(height, width);
  std::uint64_t pos = 0;
  std::uint8_t value = 0;
  for (auto run : runs) {
    for (std::uint32_t k = 0; k < run; ++k, ++pos) {
      if (value) {
        m(static_cast<int>(pos % static_cast<std::uint64_t>(height)),
          static_cast<int>(pos / static_cast<std::uint64_t>(height))) = 1;
      }
    }
    value ^= 1;
  }
  return m;
}

std::string compress_runs(std::span<const std::uint32_t> runs) {
  std::string s;
  s.reserve(runs.size() * 2);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::int64_t x = runs[i];
    if (i > 2) x -= static_cast<std::int64_t>(runs[i - 2]);
    bool more = true;
    while (more) {
      char c = static_cast<char>(x & 0x1f);
      x >>= 5;
      more = (c & 0x10) ? x != -1 : x != 0;
      if (more) c |= 0x20;
      s.push_back(static_cast<char>(c + 48));
    }
  }
  return s;
}

std::vector<std::uint32_t> decompress_counts(std::string_view counts) {
  std::vector<std::uint32_t> runs;
  std::size_t p = 0;
  while (p < counts.size()) {
    std::int64_t x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= counts.size()) throw FormatError("truncated RLE counts string");
      const int raw = static_cast<unsigned char>(counts[p]);
      if (raw < 48 || raw > 111) {
        throw FormatError("invalid RLE character '" + std::string(1, counts[p]) + "' at offset " +
                          std::to_string(p));
      }
      if (k >= 12) throw FormatError("RLE run value overflows");
      const int c = raw - 48;
      x |= static_cast<std::int64_t>(c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= static_cast<std::int64_t>(-1) * (std::int64_t{1} << (5 * k));
    }
    if (runs.size() > 2) x += static_cast<std::int64_t>(runs[runs.size() - 2]);
    if (x < 0 || x > 0xffffffffLL) {
      throw FormatError("RLE run " + std::to_string(runs.size()) + " out of range");
    }
    runs.push_back(static_cast<std::uint32_t>(x));
  }
  return runs;
}

RleMask rle_encode(const BinaryMask& m) {
  const auto runs = mask_to_runs(m);
  return {m.height(), m.width(), compress_runs(runs)};
}

BinaryMask rle_decode(const RleMask& r) {
  if (r.height < 0 || r.width < 0) throw FormatError("negative RLE dimensions");
  const auto runs = decompress_counts(r.counts);
  return runs_to_mask(runs, r.height, r.width);
}

std::uint64_t rle_area(const RleMask& r) {
  const auto runs = decompress_counts(r.counts);
  std::uint64_t area = 0;
  for (std::size_t i = 1; i < runs.size(); i += 2) area += runs[i];
  return area;
}

}  // namespace wsmots
