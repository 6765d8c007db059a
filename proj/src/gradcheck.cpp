#include "wsmots/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "wsmots/crf_loss.hpp"
#include "wsmots/tracking.hpp"
#include "wsmots/weak_labels.hpp"

namespace wsmots {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// Central differences of f around x.
std::vector<double> numeric_gradient(std::vector<double> x, double step,
                                     const std::function<double(const std::vector<double>&)>& f) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f(x);
    x[i] = saved - step;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

void corrupt_gradient(std::vector<double>& g) {
  double peak = 0.0;
  for (double v : g) peak = std::max(peak, std::abs(v));
  if (!g.empty()) g[0] += 0.1 * peak + 1e-3;
}

double check_loc(Rng& rng, bool corrupt) {
  const int h = uniform_int(rng, 2, 16);
  const int w = uniform_int(rng, 2, 16);
  PseudoLabel label(h, w, LabelCell::Void);
  for (auto& c : label.values()) c = static_cast<LabelCell>(uniform_int(rng, 0, 2));
  label(0, 0) = LabelCell::Foreground;
  std::vector<double> pred(label.size());
  for (auto& p : pred) p = uniform(rng, 0.05, 0.95);

  auto loss = [&](const std::vector<double>& s) { return loc_loss(label, Grid<double>(h, w, s)).loss; };
  auto analytic = loc_loss(label, Grid<double>(h, w, pred)).grad.vector();
  if (corrupt) corrupt_gradient(analytic);
  return relative_error(analytic, numeric_gradient(pred, 1e-5, loss));
}

double check_crf(Rng& rng, AffinityPath path, bool corrupt) {
  const int h = uniform_int(rng, 4, 16);
  const int w = uniform_int(rng, 4, 16);
  std::vector<double> rgb(static_cast<std::size_t>(h * w * 3));
  for (auto& v : rgb) v = uniform(rng, 0.0, 1.0);
  const RgbImage image(h, w, std::move(rgb));
  AffinityParams params;
  params.sigma_xy = uniform(rng, 2.0, 10.0);
  params.sigma_rgb = uniform(rng, 0.1, 0.5);
  const auto op = make_affinity(image, params, path, Execution::Serial);

  const std::size_t n = image.pixels();
  std::vector<double> x(2 * n);
  for (auto& v : x) v = uniform(rng, 0.05, 0.95);
  auto split = [&](const std::vector<double>& s) {
    return std::vector<ProbMask>{ProbMask(h, w, std::vector<double>(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n))),
                                 ProbMask(h, w, std::vector<double>(s.begin() + static_cast<std::ptrdiff_t>(n), s.end()))};
  };
  auto loss = [&](const std::vector<double>& s) { return crf_loss(split(s), *op).loss; };
  const CrfResult r = crf_loss(split(x), *op);
  std::vector<double> analytic = r.grads[0].vector();
  analytic.insert(analytic.end(), r.grads[1].values().begin(), r.grads[1].values().end());
  if (corrupt) corrupt_gradient(analytic);
  return relative_error(analytic, numeric_gradient(x, 1e-4, loss));
}

double check_triplet(Rng& rng, bool corrupt) {
  const int b = uniform_int(rng, 4, 12);
  const std::size_t dim = kEmbeddingDim;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<TrackObservation> batch(static_cast<std::size_t>(b));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch[i].identity = i < 2 ? 0 : (i < 4 ? 1 : uniform_int(rng, 0, 2));
    batch[i].embedding.resize(dim);
    for (auto& v : batch[i].embedding) v = normal(rng);
  }
  std::vector<double> x;
  for (const auto& o : batch) x.insert(x.end(), o.embedding.begin(), o.embedding.end());
  auto loss = [&](const std::vector<double>& s) {
    auto copy = batch;
    for (std::size_t i = 0; i < copy.size(); ++i) {
      std::copy_n(s.begin() + static_cast<std::ptrdiff_t>(i * dim), dim, copy[i].embedding.begin());
    }
    return triplet_loss(copy).loss;
  };
  const TripletResult r = triplet_loss(batch);
  std::vector<double> analytic;
  for (const auto& g : r.grads) analytic.insert(analytic.end(), g.begin(), g.end());
  if (corrupt) corrupt_gradient(analytic);
  return relative_error(analytic, numeric_gradient(x, 1e-6, loss));
}

}  // namespace

double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

bool GradcheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const GradcheckEntry& e) { return e.passed; });
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  GradcheckReport report;
  auto run = [&](const char* name, double tolerance, std::uint64_t stream,
                 const std::function<double(Rng&)>& check) {
    Rng rng(options.seed * 0x9E3779B97F4A7C15ULL + stream);
    GradcheckEntry e{name, 0.0, tolerance, options.instances, false};
    for (int i = 0; i < options.instances; ++i) e.max_rel_error = std::max(e.max_rel_error, check(rng));
    e.passed = e.max_rel_error <= tolerance;
    report.entries.push_back(e);
  };
  run("loc_loss", kLocTolerance, 1, [&](Rng& r) { return check_loc(r, options.corrupt); });
  run("crf_loss_dense", kCrfTolerance, 2,
      [&](Rng& r) { return check_crf(r, AffinityPath::Dense, options.corrupt); });
  run("crf_loss_fast", kCrfTolerance, 3,
      [&](Rng& r) { return check_crf(r, AffinityPath::Fast, options.corrupt); });
  run("triplet_loss", kTripletTolerance, 4, [&](Rng& r) { return check_triplet(r, options.corrupt); });
  return report;
}

}  // namespace wsmots
