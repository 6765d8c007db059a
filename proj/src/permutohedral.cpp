#include "wsmots/permutohedral.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "wsmots/error.hpp"

namespace wsmots {

namespace {

// Vertex keys are the first `dim` lattice coordinates (the last one is implied
// by the zero-sum constraint), packed most significant first into fixed-width
// biased fields of 64-bit words. The packed order is lexicographic and adding
// a lattice vector is a word-wise integer addition that preserves it, so
// closure steps and neighbour lookups are linear merges of sorted key lists.
class KeyPacking {
 public:
  KeyPacking(int dim, std::vector<std::int32_t> lo, const std::vector<std::int32_t>& hi)
      : dim_(dim), lo_(std::move(lo)) {
    int bits = 1;
    for (int i = 0; i < dim; ++i) {
      // One spare value per field keeps all-ones words free as a sentinel.
      const auto range = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi[i]) - lo_[i]);
      bits = std::max(bits, static_cast<int>(std::bit_width(range + 1)));
    }
    bits_ = bits;
    per_word_ = 64 / bits;
    words_ = (dim + per_word_ - 1) / per_word_;
  }

  int words() const noexcept { return words_; }

  void pack(const std::int32_t* key, std::uint64_t* out) const noexcept {
    std::fill(out, out + words_, 0);
    for (int i = 0; i < dim_; ++i) {
      const auto v = static_cast<std::uint64_t>(static_cast<std::int64_t>(key[i]) - lo_[i]);
      out[i / per_word_] |= v << shift(i);
    }
  }

  // Word-wise increments for a lattice vector, modulo 2^64.
  std::vector<std::uint64_t> increment(const std::int32_t* delta) const {
    std::vector<std::uint64_t> out(static_cast<std::size_t>(words_), 0);
    for (int i = 0; i < dim_; ++i) {
      out[static_cast<std::size_t>(i / per_word_)] +=
          static_cast<std::uint64_t>(static_cast<std::int64_t>(delta[i])) << shift(i);
    }
    return out;
  }

 private:
  int shift(int i) const noexcept { return (per_word_ - 1 - i % per_word_) * bits_; }

  int dim_;
  std::vector<std::int32_t> lo_;
  int bits_ = 1;
  int per_word_ = 1;
  int words_ = 1;
};

int compare_words(const std::uint64_t* a, const std::uint64_t* b, int words) noexcept {
  for (int i = 0; i < words; ++i) {
    if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
  }
  return 0;
}

void step_key(const std::uint64_t* key, const std::uint64_t* inc, int sign, int words,
              std::uint64_t* out) noexcept {
  for (int i = 0; i < words; ++i) {
    out[i] = sign > 0 ? key[i] + inc[i] : sign < 0 ? key[i] - inc[i] : key[i];
  }
}

// For every key x of a sorted list, the position of x + inc in the list, or -1.
// W > 0 fixes the key width at compile time; W == 0 reads it from `words`.
template <int W>
std::vector<std::int32_t> successor_positions(const std::vector<std::uint64_t>& keys, int words,
                                              const std::uint64_t* inc) {
  const int nw = W > 0 ? W : words;
  const auto uw = static_cast<std::size_t>(nw);
  const std::size_t count = keys.size() / uw;
  std::vector<std::int32_t> out(count, -1);
  std::size_t y = 0;
  if constexpr (W == 1) {
    for (std::size_t x = 0; x < count; ++x) {
      const std::uint64_t target = keys[x] + *inc;
      while (y < count && keys[y] < target) ++y;
      if (y == count) break;
      if (keys[y] == target) out[x] = static_cast<std::int32_t>(y);
    }
    return out;
  }
  std::vector<std::uint64_t> target(uw);
  for (std::size_t x = 0; x < count; ++x) {
    step_key(keys.data() + x * uw, inc, 1, nw, target.data());
    int c = -1;
    while (y < count && (c = compare_words(keys.data() + y * uw, target.data(), nw)) < 0) ++y;
    if (y == count) break;
    if (c == 0) out[x] = static_cast<std::int32_t>(y);
  }
  return out;
}

// Closes a sorted key list under `steps` blur steps, the k-th along
// inc[k % inc.size()]. stage[v] is the first step after which v exists.
template <int W>
void close_keys(std::vector<std::uint64_t>& keys, std::vector<std::uint16_t>& stage, int words,
                const std::vector<std::vector<std::uint64_t>>& inc, int steps) {
  const int nw = W > 0 ? W : words;
  const auto uw = static_cast<std::size_t>(nw);
  std::vector<std::uint64_t> next;
  std::vector<std::uint16_t> next_stage;
  std::vector<std::uint64_t> heads(3 * uw);
  std::vector<std::uint64_t> taken(uw);
  const int sign[3] = {0, -1, 1};
  for (int step = 0; step < steps; ++step) {
    const std::uint64_t* u = inc[static_cast<std::size_t>(step) % inc.size()].data();
    const std::size_t count = keys.size() / uw;
    next.assign(3 * keys.size(), 0);
    next_stage.assign(3 * count, 0);
    std::size_t out = 0;
    if constexpr (W == 1) {
      constexpr std::uint64_t kEnd = ~std::uint64_t{0};
      const std::uint64_t du = *u;
      std::size_t i0 = 0, i1 = 0, i2 = 0;
      std::uint64_t h0 = count > 0 ? keys[0] : kEnd;
      std::uint64_t h1 = count > 0 ? keys[0] - du : kEnd;
      std::uint64_t h2 = count > 0 ? keys[0] + du : kEnd;
      while (true) {
        const std::uint64_t x = std::min({h0, h1, h2});
        if (x == kEnd) break;
        next[out] = x;
        next_stage[out++] = h0 == x ? stage[i0] : static_cast<std::uint16_t>(step + 1);
        if (h0 == x) h0 = ++i0 < count ? keys[i0] : kEnd;
        if (h1 == x) h1 = ++i1 < count ? keys[i1] - du : kEnd;
        if (h2 == x) h2 = ++i2 < count ? keys[i2] + du : kEnd;
      }
      next.resize(out);
      next_stage.resize(out);
      keys.swap(next);
      stage.swap(next_stage);
      continue;
    }
    std::size_t cursor[3] = {0, 0, 0};
    auto load = [&](int src) {
      if (cursor[src] < count) {
        step_key(keys.data() + cursor[src] * uw, u, sign[src], nw, heads.data() + static_cast<std::size_t>(src) * uw);
      }
    };
    for (int src = 0; src < 3; ++src) load(src);
    while (true) {
      int best = -1;
      for (int src = 0; src < 3; ++src) {
        if (cursor[src] == count) continue;
        if (best < 0 || compare_words(heads.data() + static_cast<std::size_t>(src) * uw,
                                      heads.data() + static_cast<std::size_t>(best) * uw, nw) < 0) {
          best = src;
        }
      }
      if (best < 0) break;
      std::copy_n(heads.data() + static_cast<std::size_t>(best) * uw, uw, taken.begin());
      std::copy_n(taken.begin(), uw, next.begin() + static_cast<std::ptrdiff_t>(out * uw));
      const bool present = cursor[0] < count && compare_words(heads.data(), taken.data(), nw) == 0;
      next_stage[out++] = present ? stage[cursor[0]] : static_cast<std::uint16_t>(step + 1);
      for (int src = 0; src < 3; ++src) {
        if (cursor[src] < count &&
            compare_words(heads.data() + static_cast<std::size_t>(src) * uw, taken.data(), nw) == 0) {
          ++cursor[src];
          load(src);
        }
      }
    }
    next.resize(out * uw);
    next_stage.resize(out);
    keys.swap(next);
    stage.swap(next_stage);
  }
}

}  // namespace

double PermutohedralLattice::simplex_kernel(int dim, int passes, int j) {
  // One-dimensional taps of `passes` [1/2 1 1/2] blurs: C(2m, m+t) / 2^m.
  const int m = passes;
  std::vector<double> taps(static_cast<std::size_t>(2 * m + 1));
  for (int t = -m; t <= m; ++t) {
    double c = 1.0;
    for (int i = 1; i <= m + t; ++i) c = c * (m - t + i) / i;  // C(2m, m+t)
    taps[static_cast<std::size_t>(t + m)] = c / std::pow(2.0, m);
  }
  auto tap = [&](int t) { return t < -m || t > m ? 0.0 : taps[static_cast<std::size_t>(t + m)]; };
  // The directions sum to zero, so step counts t_k = [k in S] + c for any c
  // reach the same offset.
  double k = 0.0;
  for (int c = -m - 1; c <= m; ++c) {
    k += std::pow(tap(c + 1), j) * std::pow(tap(c), dim + 1 - j);
  }
  return k;
}

PermutohedralLattice::PermutohedralLattice(std::span<const double> features, int dim, int passes,
                                           Execution exec)
    : dim_(dim), passes_(passes), exec_(exec) {
  if (dim < 1 || dim > 30) throw InvalidArgument("lattice dimension must be in [1,30]");
  if (passes < 2 || passes % 2 != 0) throw InvalidArgument("lattice blur passes must be even and positive");
  if (features.size() % static_cast<std::size_t>(dim) != 0) {
    throw ShapeError("feature buffer length " + std::to_string(features.size()) +
                     " is not a multiple of " + std::to_string(dim));
  }
  const int d = dim;
  const int d1 = d + 1;
  const auto ud = static_cast<std::size_t>(d);
  const auto ud1 = static_cast<std::size_t>(d1);
  points_ = features.size() / ud;
  const std::size_t n = points_;

  const double magnify = std::sqrt(0.75 * passes + 0.25);
  // Lattice points per unit feature volume and blur mass fix the dense-limit gain.
  const double cell_volume = std::pow(1.5, 0.5 * d) / std::sqrt(static_cast<double>(d1));
  gain_ = std::pow(2.0, d1 * passes) * cell_volume /
          (std::pow(magnify, d) * std::pow(2.0 * std::numbers::pi, 0.5 * d));

  std::vector<double> scale(ud);
  const double inv_std = std::sqrt(2.0 / 3.0) * d1 * magnify;
  for (int i = 0; i < d; ++i) {
    scale[static_cast<std::size_t>(i)] = inv_std / std::sqrt(static_cast<double>((i + 1) * (i + 2)));
  }
  // canonical[r][j]: offset of vertex r for the coordinate with rank j.
  std::vector<int> canonical(ud1 * ud1);
  for (int r = 0; r <= d; ++r) {
    for (int j = 0; j <= d - r; ++j) canonical[static_cast<std::size_t>(r * d1 + j)] = r;
    for (int j = d - r + 1; j <= d; ++j) canonical[static_cast<std::size_t>(r * d1 + j)] = r - d1;
  }

  offsets_.resize(n * ud1);
  weights_.resize(n * ud1);
  std::vector<std::int32_t> slot_keys(n * ud1 * ud);

  std::vector<double> elevated(ud1);
  std::vector<double> bary(ud1 + 1);
  std::vector<std::int64_t> rem0(ud1);
  std::vector<int> rank(ud1);
  std::vector<std::int32_t> key(ud);

  for (std::size_t p = 0; p < n; ++p) {
    const double* f = features.data() + p * ud;
    // Embed into the hyperplane sum(x) = 0 of R^{d+1}.
    double sm = 0.0;
    for (int j = d; j > 0; --j) {
      const double cf = f[j - 1] * scale[static_cast<std::size_t>(j - 1)];
      elevated[static_cast<std::size_t>(j)] = sm - j * cf;
      sm += cf;
    }
    elevated[0] = sm;

    // Nearest remainder-0 lattice point.
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < ud1; ++i) {
      const double e = elevated[i];
      const double up = std::ceil(e / d1) * d1;
      const double down = std::floor(e / d1) * d1;
      const auto r0 = static_cast<std::int64_t>(up - e < e - down ? up : down);
      rem0[i] = r0;
      sum += r0 / d1;
    }

    // Rank of each coordinate's residual; ties resolved by index.
    std::fill(rank.begin(), rank.end(), 0);
    for (std::size_t i = 0; i < ud; ++i) {
      const double di = elevated[i] - static_cast<double>(rem0[i]);
      for (std::size_t j = i + 1; j < ud1; ++j) {
        if (di < elevated[j] - static_cast<double>(rem0[j])) {
          ++rank[i];
        } else {
          ++rank[j];
        }
      }
    }

    // Bring the rounded point back onto the hyperplane.
    for (std::size_t i = 0; i < ud1; ++i) {
      rank[i] += static_cast<int>(sum);
      if (rank[i] < 0) {
        rank[i] += d1;
        rem0[i] += d1;
      } else if (rank[i] > d) {
        rank[i] -= d1;
        rem0[i] -= d1;
      }
    }

    std::fill(bary.begin(), bary.end(), 0.0);
    for (std::size_t i = 0; i < ud1; ++i) {
      const double v = (elevated[i] - static_cast<double>(rem0[i])) / d1;
      bary[static_cast<std::size_t>(d - rank[i])] += v;
      bary[static_cast<std::size_t>(d - rank[i] + 1)] -= v;
    }
    bary[0] += 1.0 + bary[ud1];

    for (int r = 0; r <= d; ++r) {
      for (std::size_t i = 0; i < ud; ++i) {
        const std::int64_t k = rem0[i] + canonical[static_cast<std::size_t>(r * d1 + rank[i])];
        if (k > INT32_MAX - 4 * d1 * passes || k < INT32_MIN + 4 * d1 * passes) {
          throw InvalidArgument("lattice coordinate overflow");
        }
        key[i] = static_cast<std::int32_t>(k);
      }
      const std::size_t slot = p * ud1 + static_cast<std::size_t>(r);
      std::copy(key.begin(), key.end(), slot_keys.begin() + static_cast<std::ptrdiff_t>(slot * ud));
      weights_[slot] = bary[static_cast<std::size_t>(r)];
    }
  }
  const int half = passes / 2 * d1;
  std::vector<std::int32_t> delta(ud1 * ud, -1);
  for (int j = 0; j < d; ++j) delta[static_cast<std::size_t>(j * d + j)] = d;

  // Key bounds cover every vertex the blur steps can reach.
  std::vector<std::int32_t> lo(ud, INT32_MAX);
  std::vector<std::int32_t> hi(ud, INT32_MIN);
  for (std::size_t slot = 0; slot < n * ud1; ++slot) {
    for (std::size_t i = 0; i < ud; ++i) {
      lo[i] = std::min(lo[i], slot_keys[slot * ud + i]);
      hi[i] = std::max(hi[i], slot_keys[slot * ud + i]);
    }
  }
  for (std::size_t i = 0; i < ud && n > 0; ++i) {
    lo[i] -= half * d;
    hi[i] += half * d;
  }
  if (n == 0) {
    std::fill(lo.begin(), lo.end(), 0);
    std::fill(hi.begin(), hi.end(), 0);
  }
  const KeyPacking packing(d, lo, hi);
  const int words = packing.words();
  const auto uw = static_cast<std::size_t>(words);

  // Occupied vertices: the distinct simplex corners, in key order.
  std::vector<std::uint64_t> keys;
  {
    std::vector<std::uint64_t> packed(n * ud1 * uw);
    for (std::size_t slot = 0; slot < n * ud1; ++slot) {
      packing.pack(slot_keys.data() + slot * ud, packed.data() + slot * uw);
    }
    slot_keys = {};
    std::vector<std::uint32_t> order(n * ud1);
    std::iota(order.begin(), order.end(), 0U);
    auto key_of = [&](std::uint32_t slot) { return packed.data() + slot * uw; };
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      const int c = compare_words(key_of(a), key_of(b), words);
      return c != 0 ? c < 0 : a < b;
    });
    std::int32_t index = -1;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const std::uint64_t* k = key_of(order[i]);
      if (i == 0 || compare_words(k, key_of(order[i - 1]), words) != 0) {
        keys.insert(keys.end(), k, k + words);
        ++index;
      }
      offsets_[order[i]] = index;
    }
  }
  occupied_ = keys.size() / uw;

  // Gather lists for the splat, in point order for a fixed summation order.
  splat_start_.assign(occupied_ + 1, 0);
  for (auto v : offsets_) ++splat_start_[static_cast<std::size_t>(v) + 1];
  for (std::size_t v = 0; v < occupied_; ++v) splat_start_[v + 1] += splat_start_[v];
  splat_entry_.resize(offsets_.size());
  {
    std::vector<std::size_t> fill(splat_start_.begin(), splat_start_.end() - 1);
    for (std::size_t slot = 0; slot < offsets_.size(); ++slot) {
      splat_entry_[fill[static_cast<std::size_t>(offsets_[slot])]++] = static_cast<std::uint32_t>(slot);
    }
  }

  // The blur is m passes of [1/2 1 1/2] along each direction u_j = (d+1) e_j - 1.
  // The steps commute and are symmetric, so B = C^T C with C the first m/2
  // passes. C runs on the closure of the occupied set under its steps and C^T
  // by the transposed steps restricted to the same closure, which is exact.
  std::vector<std::vector<std::uint64_t>> inc(ud1);  // packed u_j
  for (std::size_t j = 0; j < ud1; ++j) inc[j] = packing.increment(delta.data() + j * ud);

  std::vector<std::uint16_t> stage(occupied_, 0);
  if (words == 1) {
    close_keys<1>(keys, stage, words, inc, half);
  } else {
    close_keys<0>(keys, stage, words, inc, half);
  }
  vertices_ = keys.size() / uw;

  // Number vertices by stage so every step touches a prefix.
  prefix_.assign(static_cast<std::size_t>(half) + 2, 0);
  for (auto s : stage) ++prefix_[static_cast<std::size_t>(s) + 1];
  for (std::size_t s = 1; s < prefix_.size(); ++s) prefix_[s] += prefix_[s - 1];
  std::vector<std::int32_t> number(vertices_);
  {
    std::vector<std::size_t> fill(prefix_.begin(), prefix_.end() - 1);
    for (std::size_t v = 0; v < vertices_; ++v) {
      number[v] = static_cast<std::int32_t>(fill[stage[v]]++);
    }
  }
  prefix_.erase(prefix_.begin());  // prefix_[s]: vertices present after step s

  link_start_.assign(ud1 + 1, 0);
  std::vector<std::size_t> rows(ud1, 0);
  for (int step = 0; step < half; ++step) {
    rows[static_cast<std::size_t>(step % d1)] = prefix_[static_cast<std::size_t>(step) + 1];
  }
  for (std::size_t j = 0; j < ud1; ++j) link_start_[j + 1] = link_start_[j] + rows[j];
  plus_.assign(link_start_[ud1], -1);
  minus_.assign(link_start_[ud1], -1);
  for (std::size_t j = 0; j < ud1; ++j) {
    const auto up = words == 1 ? successor_positions<1>(keys, words, inc[j].data())
                               : successor_positions<0>(keys, words, inc[j].data());
    std::int32_t* pj = plus_.data() + link_start_[j];
    std::int32_t* mj = minus_.data() + link_start_[j];
    for (std::size_t v = 0; v < vertices_; ++v) {
      if (up[v] < 0) continue;
      const auto row = static_cast<std::size_t>(number[v]);
      const auto row_up = static_cast<std::size_t>(number[static_cast<std::size_t>(up[v])]);
      if (row < rows[j]) pj[row] = static_cast<std::int32_t>(row_up);
      if (row_up < rows[j]) mj[row_up] = static_cast<std::int32_t>(row);
    }
  }

  // Vertices r and s of one simplex differ in |r - s| lattice directions.
  std::vector<double> kernel(ud1);
  for (int j = 0; j <= d; ++j) kernel[static_cast<std::size_t>(j)] = simplex_kernel(d, passes, j);
  self_.assign(n, 0.0);
  const auto np_points = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (exec_ == Execution::Parallel)
  for (std::ptrdiff_t p = 0; p < np_points; ++p) {
    const double* w = weights_.data() + static_cast<std::size_t>(p) * ud1;
    double acc = 0.0;
    for (int r = 0; r <= d; ++r) {
      for (int s = 0; s <= d; ++s) {
        acc += w[r] * w[s] * kernel[static_cast<std::size_t>(std::abs(r - s))];
      }
    }
    self_[static_cast<std::size_t>(p)] = acc;
  }
}

void PermutohedralLattice::blur(std::vector<double>& values) const {
  const std::size_t d1 = static_cast<std::size_t>(dim_) + 1;
  std::vector<double> next(values.size(), 0.0);
  auto step = [&](std::size_t j, std::size_t rows) {
    const std::int32_t* plus = plus_.data() + link_start_[j];
    const std::int32_t* minus = minus_.data() + link_start_[j];
    const double* in = values.data();
    double* out = next.data();
    const auto count = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (exec_ == Execution::Parallel)
    for (std::ptrdiff_t v = 0; v < count; ++v) {
      const double a = plus[v] >= 0 ? in[plus[v]] : 0.0;
      const double b = minus[v] >= 0 ? in[minus[v]] : 0.0;
      out[v] = in[v] + 0.5 * (a + b);
    }
    values.swap(next);
  };
  const std::size_t half = prefix_.size() - 1;
  for (std::size_t k = 0; k < half; ++k) step(k % d1, prefix_[k + 1]);
  for (std::size_t k = half; k-- > 0;) step(k % d1, prefix_[k]);
}

std::vector<double> PermutohedralLattice::filter(std::span<const double> values) const {
  if (values.size() != points_) {
    throw ShapeError("lattice filter: expected " + std::to_string(points_) + " values, got " +
                     std::to_string(values.size()));
  }
  const std::size_t d1 = static_cast<std::size_t>(dim_) + 1;
  const auto occ = static_cast<std::ptrdiff_t>(occupied_);
  std::vector<double> lattice(vertices_, 0.0);
#pragma omp parallel for schedule(static) if (exec_ == Execution::Parallel)
  for (std::ptrdiff_t v = 0; v < occ; ++v) {
    double acc = 0.0;
    for (std::size_t e = splat_start_[static_cast<std::size_t>(v)];
         e < splat_start_[static_cast<std::size_t>(v) + 1]; ++e) {
      const std::size_t slot = splat_entry_[e];
      acc += weights_[slot] * values[slot / d1];
    }
    lattice[static_cast<std::size_t>(v)] = acc;
  }

  blur(lattice);

  std::vector<double> out(points_, 0.0);
  const auto n = static_cast<std::ptrdiff_t>(points_);
#pragma omp parallel for schedule(static) if (exec_ == Execution::Parallel)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    double acc = 0.0;
    for (std::size_t r = 0; r < d1; ++r) {
      const std::size_t slot = static_cast<std::size_t>(p) * d1 + r;
      acc += weights_[slot] * lattice[static_cast<std::size_t>(offsets_[slot])];
    }
    out[static_cast<std::size_t>(p)] = acc;
  }
  return out;
}

}  // namespace wsmots
