#include <doctest.h>

#include <cmath>
#include <random>

#include "wsmots/crf_loss.hpp"
#include "wsmots/error.hpp"
#include "wsmots/gradcheck.hpp"
#include "wsmots/permutohedral.hpp"

using namespace wsmots;

namespace {

RgbImage random_image(std::mt19937_64& rng, int h, int w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> rgb(static_cast<std::size_t>(h * w * 3));
  for (auto& v : rgb) v = u(rng);
  return RgbImage(h, w, std::move(rgb));
}

// Explicit kernel matrix, row-major.
std::vector<double> kernel_matrix(const RgbImage& img, const AffinityParams& p) {
  const int n = static_cast<int>(img.pixels());
  std::vector<double> k(static_cast<std::size_t>(n * n));
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a == b && p.zero_diagonal) continue;
      const int ra = a / img.width(), ca = a % img.width();
      const int rb = b / img.width(), cb = b % img.width();
      double rgb2 = 0;
      for (int ch = 0; ch < 3; ++ch) rgb2 += std::pow(img.at(ra, ca, ch) - img.at(rb, cb, ch), 2);
      const double xy2 = std::pow(ra - rb, 2) + std::pow(ca - cb, 2);
      k[static_cast<std::size_t>(a * n + b)] =
          std::exp(-xy2 / (2 * p.sigma_xy * p.sigma_xy) - rgb2 / (2 * p.sigma_rgb * p.sigma_rgb));
    }
  }
  return k;
}

std::vector<double> matvec(const std::vector<double>& k, const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) out[a] += k[a * n + b] * v[b];
  }
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("single pair kernel") {
  const double d = 3.0;
  RgbImage img(1, 4, 0.25);
  AffinityParams p;
  p.sigma_xy = 2.0;
  // Pixels 0 and 3 are d apart; probe only them.
  const auto w = DenseAffinity(img, p).apply(std::vector<double>{1, 0, 0, 0});
  CHECK(w[0] == 0.0);
  CHECK(w[3] == doctest::Approx(std::exp(-d * d / (2 * p.sigma_xy * p.sigma_xy))));
}

TEST_CASE("two-pixel toy loss") {
  RgbImage img(1, 2, 0.5);
  AffinityParams p;
  p.sigma_xy = 1e6;
  const DenseAffinity w(img, p);
  const std::vector<ProbMask> masks{ProbMask(1, 2, std::vector<double>{1, 0}),
                                    ProbMask(1, 2, std::vector<double>{0, 1})};
  const auto r = crf_loss(masks, w);
  CHECK(r.loss == doctest::Approx(2.0));
  // Any fully confident, perfectly uniform labelling costs nothing.
  const std::vector<ProbMask> same{ProbMask(1, 2, 1.0), ProbMask(1, 2, 0.0)};
  CHECK(crf_loss(same, w).loss == doctest::Approx(0.0));
}

TEST_CASE("dense operator matches the explicit matrix") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto img = random_image(rng, 6, 7);
  for (bool zero_diag : {true, false}) {
    AffinityParams p;
    p.sigma_xy = 3.0;
    p.sigma_rgb = 0.3;
    p.zero_diagonal = zero_diag;
    std::vector<double> v(img.pixels());
    for (auto& x : v) x = u(rng);
    const auto want = matvec(kernel_matrix(img, p), v);
    const auto got = DenseAffinity(img, p, Execution::Serial).apply(v);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    CHECK(DenseAffinity(img, p, Execution::Parallel).apply(v) == got);
  }
}

TEST_CASE("crf loss equals the quadratic form") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto img = random_image(rng, 5, 6);
  AffinityParams p;
  p.sigma_xy = 4.0;
  p.sigma_rgb = 0.4;
  const auto k = kernel_matrix(img, p);
  std::vector<ProbMask> masks;
  double want = 0.0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> s(img.pixels()), comp(img.pixels());
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = u(rng);
      comp[i] = 1.0 - s[i];
    }
    want += dot(s, matvec(k, comp));
    masks.emplace_back(5, 6, s);
  }
  const auto r = crf_loss(masks, DenseAffinity(img, p));
  CHECK(r.loss == doctest::Approx(want).epsilon(1e-12));
  REQUIRE(r.grads.size() == 3);
}

TEST_CASE("lattice filter is symmetric and reports its diagonal") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  const int n = 200, d = 3;
  std::vector<double> f(static_cast<std::size_t>(n * d));
  for (auto& x : f) x = u(rng);
  const PermutohedralLattice lat(f, d);
  CHECK(lat.occupied_vertices() <= lat.vertices());
  std::vector<double> a(n), b(n);
  for (auto& x : a) x = u(rng);
  for (auto& x : b) x = u(rng);
  CHECK(dot(lat.filter(a), b) == doctest::Approx(dot(a, lat.filter(b))).epsilon(1e-12));
  for (int p : {0, 17, 199}) {
    std::vector<double> e(n, 0.0);
    e[static_cast<std::size_t>(p)] = 1.0;
    CHECK(lat.filter(e)[static_cast<std::size_t>(p)] ==
          doctest::Approx(lat.self_response()[static_cast<std::size_t>(p)]).epsilon(1e-12));
  }
  const PermutohedralLattice serial(f, d, PermutohedralLattice::kDefaultPasses, Execution::Serial);
  CHECK(serial.filter(a) == lat.filter(a));
  CHECK_THROWS_AS(PermutohedralLattice(f, d, 3), InvalidArgument);
}

TEST_CASE("lattice approximates a dense Gaussian sum") {
  // Uniform 2-D grid, unit-variance kernel in feature units of 1/sigma.
  const int side = 40;
  const double sigma = 3.0;
  std::vector<double> f;
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      f.push_back(c / sigma);
      f.push_back(r / sigma);
    }
  }
  const PermutohedralLattice lat(f, 2);
  const std::vector<double> ones(side * side, 1.0);
  const auto out = lat.filter(ones);
  // Centre pixel, far from the border.
  const std::size_t p = (side / 2) * side + side / 2;
  double exact = 0;
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      exact += std::exp(-(std::pow(r - side / 2, 2) + std::pow(c - side / 2, 2)) / (2 * sigma * sigma));
    }
  }
  CHECK(out[p] / lat.gain() == doctest::Approx(exact).epsilon(0.05));
}

TEST_CASE("fast path tracks the dense path") {
  std::mt19937_64 rng(30);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 4; ++t) {
    const auto img = random_image(rng, 32, 32);
    const AffinityParams p;
    std::vector<double> v(img.pixels());
    for (auto& x : v) x = u(rng);
    const auto dense = DenseAffinity(img, p).apply(v);
    const auto fast = LatticeAffinity(img, p).apply(v);
    CHECK(relative_error(fast, dense) < 0.05);
  }
}

TEST_CASE("ROI crf loss gradient matches finite differences") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  const auto patch = random_image(rng, 12, 12);
  AffinityParams p;
  p.sigma_xy = 4.0;
  p.sigma_rgb = 0.3;
  ProbMask fg(5, 5);
  for (auto& v : fg.values()) v = u(rng);
  const auto r = crf_loss_roi(fg, patch, p, AffinityPath::Dense);
  std::vector<double> num(fg.size());
  const double h = 1e-5;
  for (std::size_t i = 0; i < fg.size(); ++i) {
    ProbMask up = fg, down = fg;
    up[i] += h;
    down[i] -= h;
    num[i] = (crf_loss_roi(up, patch, p, AffinityPath::Dense).loss -
              crf_loss_roi(down, patch, p, AffinityPath::Dense).loss) / (2 * h);
  }
  CHECK(relative_error(r.grad.vector(), num) < 1e-6);
}

TEST_CASE("batch crf loss and validation") {
  std::mt19937_64 rng(3);
  const auto img = random_image(rng, 4, 4);
  CrfInput a{img, {ProbMask(4, 4, 0.3), ProbMask(4, 4, 0.7)}};
  CrfInput b{img, {ProbMask(4, 4, 0.9), ProbMask(4, 4, 0.1)}};
  const AffinityParams p;
  const double la = crf_loss(a, p, AffinityPath::Dense).loss;
  const double lb = crf_loss(b, p, AffinityPath::Dense).loss;
  CHECK(batch_crf_loss(std::vector<CrfInput>{a, b}, p, AffinityPath::Dense) == doctest::Approx((la + lb) / 2));
  CHECK(batch_crf_loss(std::vector<CrfInput>{}, p) == 0.0);
  CrfInput bad{img, {ProbMask(3, 4, 0.5)}};
  CHECK_THROWS_AS(crf_loss(bad, p), ShapeError);
  CHECK_THROWS_AS(RgbImage(1, 1, 1.5), InvalidArgument);
  AffinityParams neg;
  neg.sigma_xy = 0;
  CHECK_THROWS_AS(DenseAffinity(img, neg), InvalidArgument);
}

TEST_CASE("both paths are linear and symmetric") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto img = random_image(rng, 16, 16);
  const AffinityParams p;
  const DenseAffinity dense(img, p);
  const LatticeAffinity fast(img, p);
  std::vector<double> a(img.pixels()), b(img.pixels());
  for (auto& x : a) x = u(rng);
  for (auto& x : b) x = u(rng);
  for (const AffinityOperator* op : {static_cast<const AffinityOperator*>(&dense),
                                     static_cast<const AffinityOperator*>(&fast)}) {
    for (double v : op->apply(std::vector<double>(img.pixels(), 0.0))) CHECK(v == 0.0);
    CHECK(dot(op->apply(a), b) == doctest::Approx(dot(a, op->apply(b))).epsilon(1e-10));
    CHECK_THROWS_AS(op->apply(std::vector<double>(3, 1.0)), ShapeError);
  }
}

namespace {

std::vector<ProbMask> two_class(const ProbMask& fg) {
  std::vector<double> bg(fg.size());
  for (std::size_t i = 0; i < bg.size(); ++i) bg[i] = 1.0 - fg[i];
  return {fg, ProbMask(fg.height(), fg.width(), std::move(bg))};
}

// Soft disc around a random centre.
ProbMask soft_blob(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double cy = n * (0.25 + 0.5 * u(rng));
  const double cx = n * (0.25 + 0.5 * u(rng));
  const double radius = n * (0.15 + 0.2 * u(rng));
  ProbMask m(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      m(r, c) = 1.0 / (1.0 + std::exp((std::hypot(r - cy, c - cx) - radius) / 1.5));
    }
  }
  return m;
}

}  // namespace

TEST_CASE("fast loss tracks the dense one") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const AffinityParams p;
  for (int t = 0; t < 5; ++t) {
    const auto img = random_image(rng, 32, 32);
    ProbMask noise(32, 32);
    for (auto& v : noise.values()) v = u(rng);
    for (const auto& fg : {soft_blob(rng, 32), noise}) {
      const CrfInput in{img, two_class(fg)};
      const double dense = crf_loss(in, p, AffinityPath::Dense).loss;
      const double fast = crf_loss(in, p, AffinityPath::Fast).loss;
      CHECK(std::abs(fast - dense) / dense < 0.05);
    }
  }
}

TEST_CASE("fast gradient tracks the dense one with six passes") {
  std::mt19937_64 rng(32);
  AffinityParams p;
  p.lattice_passes = 6;
  for (int t = 0; t < 2; ++t) {
    const CrfInput in{random_image(rng, 32, 32), two_class(soft_blob(rng, 32))};
    const auto dense = crf_loss(in, p, AffinityPath::Dense);
    const auto fast = crf_loss(in, p, AffinityPath::Fast);
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(relative_error(fast.grads[k].vector(), dense.grads[k].vector()) < 0.05);
    }
  }
}

TEST_CASE("lattice passes must be even and at least two") {
  for (int passes : {0, 1, 3}) {
    AffinityParams p;
    p.lattice_passes = passes;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
  }
}

TEST_CASE("loss is invariant under distance-preserving pixel permutations") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 9;
  const auto img = random_image(rng, n, n);
  ProbMask fg(n, n);
  for (auto& v : fg.values()) v = u(rng);
  const AffinityParams p;
  auto loss = [&](const RgbImage& im, const ProbMask& m) {
    std::vector<double> bg(m.size());
    for (std::size_t i = 0; i < bg.size(); ++i) bg[i] = 1.0 - m[i];
    return crf_loss(CrfInput{im, {m, ProbMask(n, n, bg)}}, p, AffinityPath::Dense).loss;
  };
  // Transpose followed by a horizontal flip.
  RgbImage img2(n, n);
  ProbMask fg2(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      for (int ch = 0; ch < 3; ++ch) img2.at(r, n - 1 - c, ch) = img.at(c, r, ch);
      fg2(r, n - 1 - c) = fg(c, r);
    }
  }
  CHECK(loss(img2, fg2) == doctest::Approx(loss(img, fg)).epsilon(1e-12));
}

TEST_CASE("hard uniform labellings minimise the two-class loss") {
  std::mt19937_64 rng(16);
  const auto img = random_image(rng, 6, 6);
  const AffinityParams p;
  const DenseAffinity w(img, p);
  for (double v : {0.0, 1.0}) {
    const std::vector<ProbMask> m{ProbMask(6, 6, v), ProbMask(6, 6, 1.0 - v)};
    CHECK(crf_loss(m, w).loss == 0.0);
  }
  const std::vector<ProbMask> soft{ProbMask(6, 6, 0.3), ProbMask(6, 6, 0.7)};
  CHECK(crf_loss(soft, w).loss > 0.0);
}
