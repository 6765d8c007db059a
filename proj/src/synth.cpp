#include "wsmots/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "wsmots/error.hpp"
#include "wsmots/rle.hpp"

namespace wsmots {

namespace {

struct Object {
  int w = 0;
  int h = 0;
  bool ellipse = false;
  double x = 0, y = 0;
  double vx = 0, vy = 0;
  int class_id = kClassCar;
};

void bounce(double& pos, double& vel, double limit) {
  pos += vel;
  if (pos < 0.0) {
    pos = -pos;
    vel = -vel;
  }
  if (pos > limit) {
    pos = 2.0 * limit - pos;
    vel = -vel;
  }
  pos = std::clamp(pos, 0.0, limit);
}

bool covers(const Object& o, int x0, int y0, int r, int c) {
  if (c < x0 || c >= x0 + o.w || r < y0 || r >= y0 + o.h) return false;
  if (!o.ellipse) return true;
  const double dx = (c + 0.5 - x0 - o.w / 2.0) / (o.w / 2.0);
  const double dy = (r + 0.5 - y0 - o.h / 2.0) / (o.h / 2.0);
  return dx * dx + dy * dy <= 1.0;
}

BinaryMask erode(const BinaryMask& m, int times) {
  BinaryMask cur = m;
  for (int t = 0; t < times; ++t) {
    BinaryMask next(m.height(), m.width());
    for (int r = 0; r < m.height(); ++r) {
      for (int c = 0; c < m.width(); ++c) {
        next(r, c) = cur(r, c) && r > 0 && c > 0 && r + 1 < m.height() && c + 1 < m.width() &&
                     cur(r - 1, c) && cur(r + 1, c) && cur(r, c - 1) && cur(r, c + 1);
      }
    }
    cur = std::move(next);
  }
  return cur;
}

std::vector<std::vector<double>> cluster_centres(int count, std::mt19937_64& rng) {
  std::vector<std::vector<double>> centres(static_cast<std::size_t>(count),
                                           std::vector<double>(kEmbeddingDim, 0.0));
  if (count <= kEmbeddingDim) {
    for (int i = 0; i < count; ++i) centres[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
    return centres;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& c : centres) {
    double norm = 0.0;
    while (norm < 1e-6) {
      norm = 0.0;
      for (auto& v : c) {
        v = normal(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
    }
    for (auto& v : c) v /= norm;
  }
  return centres;
}

}  // namespace

void SynthConfig::validate() const {
  if (frames < 1) throw InvalidArgument("synth needs at least one frame");
  if (objects < 1 || objects > 999) throw InvalidArgument("synth object count must be in [1,999]");
  if (width < 16 || height < 16) throw InvalidArgument("synth frame must be at least 16x16");
  if (!(motion >= 0.0)) throw InvalidArgument("motion must be non-negative");
  if (!(occlusion >= 0.0 && occlusion <= 1.0)) throw InvalidArgument("occlusion must be in [0,1]");
  if (!(box_noise >= 0.0) || !(emb_noise >= 0.0)) throw InvalidArgument("noise levels must be non-negative");
  if (erode < 0) throw InvalidArgument("erode must be non-negative");
  for (const auto& g : gaps) {
    if (g.object < 0 || g.object >= objects || g.start < 0 || g.length < 0) {
      throw InvalidArgument("gap " + std::to_string(g.object) + ":" + std::to_string(g.start) + ":" +
                            std::to_string(g.length) + " out of range");
    }
  }
  for (const auto& s : id_switches) {
    if (s.object < 0 || s.object >= objects || s.frame < 0) {
      throw InvalidArgument("id switch " + std::to_string(s.object) + ":" + std::to_string(s.frame) +
                            " out of range");
    }
  }
}

SynthSequence synthesize(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 geometry(cfg.seed);
  std::mt19937_64 visibility(cfg.seed ^ 0x5851F42D4C957F2DULL);
  std::mt19937_64 noise(cfg.seed ^ 0x14057B7EF767814FULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const auto n = static_cast<std::size_t>(cfg.objects);
  auto draw_sizes = [&](int lo, int hi) {
    std::vector<int> s(n);
    for (auto& v : s) v = std::uniform_int_distribution<int>(lo, hi)(geometry);
    std::sort(s.begin(), s.end(), std::greater<>());
    return s;
  };
  const std::vector<int> widths = draw_sizes(std::max(4, cfg.width / 10), std::max(4, cfg.width / 5));
  const std::vector<int> heights = draw_sizes(std::max(4, cfg.height / 6), std::max(4, cfg.height / 3));
  std::vector<Object> objs(n);
  for (std::size_t i = 0; i < n; ++i) {
    Object& o = objs[i];
    o.w = widths[i];
    o.h = heights[i];
    o.ellipse = unit(geometry) < 0.5;
    o.x = unit(geometry) * (cfg.width - o.w);
    o.y = unit(geometry) * (cfg.height - o.h);
    const double angle = unit(geometry) * 2.0 * std::acos(-1.0);
    o.vx = cfg.motion * std::cos(angle);
    o.vy = cfg.motion * std::sin(angle);
    o.class_id = i % 2 == 0 ? kClassCar : kClassPedestrian;
  }

  const auto centres = cluster_centres(cfg.objects + static_cast<int>(cfg.id_switches.size()), geometry);
  SynthSequence out;
  for (int f = 0; f < cfg.frames; ++f) {
    if (f > 0) {
      for (auto& o : objs) {
        bounce(o.x, o.vx, cfg.width - o.w);
        bounce(o.y, o.vy, cfg.height - o.h);
      }
    }
    std::vector<bool> present(n, true);
    for (std::size_t i = 0; i < n; ++i) {
      if (unit(visibility) < cfg.occlusion) present[i] = false;
    }
    for (const auto& g : cfg.gaps) {
      if (f >= g.start && f < g.start + g.length) present[static_cast<std::size_t>(g.object)] = false;
    }

    // Back to front: later (smaller) objects overwrite earlier ones.
    Grid<int> owner(cfg.height, cfg.width, -1);
    std::vector<std::pair<int, int>> origin(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int x0 = static_cast<int>(std::lround(objs[i].x));
      const int y0 = static_cast<int>(std::lround(objs[i].y));
      origin[i] = {x0, y0};
      if (!present[i]) continue;
      for (int r = y0; r < std::min(cfg.height, y0 + objs[i].h); ++r) {
        for (int c = x0; c < std::min(cfg.width, x0 + objs[i].w); ++c) {
          if (covers(objs[i], x0, y0, r, c)) owner(r, c) = static_cast<int>(i);
        }
      }
    }

    FrameAnnotations frame;
    frame.frame = f;
    for (std::size_t i = 0; i < n; ++i) {
      // Drawn unconditionally so absent objects do not shift the noise stream.
      std::vector<double> jitter(4);
      for (auto& j : jitter) j = cfg.box_noise * normal(noise);
      std::vector<double> emb_jitter(kEmbeddingDim);
      for (auto& j : emb_jitter) j = cfg.emb_noise * normal(noise);
      if (!present[i]) continue;

      BinaryMask visible(cfg.height, cfg.width);
      for (std::size_t p = 0; p < visible.size(); ++p) visible[p] = owner[p] == static_cast<int>(i);
      if (visible.area() == 0) continue;
      const int id = objs[i].class_id * 1000 + static_cast<int>(i) + 1;
      frame.instances.push_back({id, objs[i].class_id, rle_encode(visible)});

      const auto [x0, y0] = origin[i];
      double bx0 = std::clamp(x0 + jitter[0], 0.0, cfg.width - 1.0);
      double by0 = std::clamp(y0 + jitter[1], 0.0, cfg.height - 1.0);
      double bx1 = std::clamp(x0 + objs[i].w + jitter[2], bx0 + 1.0, static_cast<double>(cfg.width));
      double by1 = std::clamp(y0 + objs[i].h + jitter[3], by0 + 1.0, static_cast<double>(cfg.height));

      std::size_t cluster = i;
      int latest = -1;
      for (std::size_t s = 0; s < cfg.id_switches.size(); ++s) {
        const auto& sw = cfg.id_switches[s];
        if (sw.object == static_cast<int>(i) && f >= sw.frame && sw.frame > latest) {
          latest = sw.frame;
          cluster = n + s;
        }
      }
      TrackObservation det;
      det.frame = f;
      det.bbox = BBox(bx0, by0, bx1, by1);
      det.class_id = objs[i].class_id;
      det.score = 1.0;
      det.embedding = centres[cluster];
      for (std::size_t k = 0; k < det.embedding.size(); ++k) det.embedding[k] += emb_jitter[k];
      det.mask = rle_encode(cfg.erode > 0 ? erode(visible, cfg.erode) : visible);
      out.detections.push_back(std::move(det));
    }
    std::sort(frame.instances.begin(), frame.instances.end(),
              [](const Instance& a, const Instance& b) { return a.track_id < b.track_id; });
    out.gt.push_back(std::move(frame));
  }
  return out;
}

}  // namespace wsmots
