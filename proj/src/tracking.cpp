#include "wsmots/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "wsmots/error.hpp"
#include "wsmots/hungarian.hpp"

namespace wsmots {

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void check_pair(std::span<const double> v, std::span<const double> w) {
  if (v.size() != w.size()) {
    throw ShapeError("embedding lengths differ: " + std::to_string(v.size()) + " vs " +
                     std::to_string(w.size()));
  }
}

// d metric(v, w) / d v, accumulated into out with factor `scale`.
void add_metric_grad(EmbeddingMetric metric, std::span<const double> v, std::span<const double> w,
                     double scale, std::vector<double>& out) {
  const double nv = norm(v);
  const double nw = norm(w);
  double dot = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * w[i];
  const double cos = dot / (nv * nw);
  const double sign = metric == EmbeddingMetric::CosineDistance ? -1.0 : 1.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] += scale * sign * (w[i] / (nv * nw) - cos * v[i] / (nv * nv));
  }
}

}  // namespace

void TrackerConfig::validate() const {
  if (window < 1) throw InvalidArgument("tracker window must be >= 1, got " + std::to_string(window));
  if (!(det_threshold >= 0.0 && det_threshold <= 1.0)) {
    throw InvalidArgument("detection threshold must lie in [0,1]");
  }
  if (!std::isfinite(margin) || margin < 0.0) throw InvalidArgument("triplet margin must be >= 0");
}

double cosine_similarity(std::span<const double> v, std::span<const double> w) {
  check_pair(v, w);
  const double nv = norm(v);
  const double nw = norm(w);
  if (nv == 0.0 || nw == 0.0) throw InvalidArgument("cosine similarity of a zero vector");
  double dot = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * w[i];
  return std::clamp(dot / (nv * nw), -1.0, 1.0);
}

double cosine_distance(std::span<const double> v, std::span<const double> w) {
  return 1.0 - cosine_similarity(v, w);
}

double embedding_metric(EmbeddingMetric metric, std::span<const double> v, std::span<const double> w) {
  return metric == EmbeddingMetric::CosineDistance ? cosine_distance(v, w) : cosine_similarity(v, w);
}

std::vector<double> mask_pool(std::span<const double> features, int channels, const ProbMask& mask) {
  if (channels < 1) throw InvalidArgument("mask_pool needs at least one channel");
  const std::size_t plane = mask.size();
  if (features.size() != plane * static_cast<std::size_t>(channels)) {
    throw ShapeError("mask_pool: " + std::to_string(features.size()) + " feature values for " +
                     std::to_string(channels) + " channels of " + std::to_string(mask.height()) + "x" +
                     std::to_string(mask.width()));
  }
  if (plane == 0) throw ShapeError("mask_pool on an empty mask");
  double total = 0.0;
  for (double s : mask.values()) total += s;
  const bool uniform = total < 1e-6;
  std::vector<double> out(static_cast<std::size_t>(channels), 0.0);
  for (std::size_t c = 0; c < out.size(); ++c) {
    const double* f = features.data() + c * plane;
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += (uniform ? 1.0 : mask[i]) * f[i];
    out[c] = acc / (uniform ? static_cast<double>(plane) : total);
  }
  return out;
}

TripletResult triplet_loss(std::span<const TrackObservation> batch, double margin,
                           EmbeddingMetric metric) {
  TripletResult result;
  result.grads.resize(batch.size());
  if (batch.empty()) return result;
  const std::size_t dim = batch[0].embedding.size();
  for (const auto& o : batch) {
    if (!o.identity) throw InvalidArgument("triplet loss needs an identity on every observation");
    if (o.embedding.size() != dim) throw ShapeError("embedding lengths differ within the batch");
  }
  for (auto& g : result.grads) g.assign(dim, 0.0);

  const std::size_t n = batch.size();
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b) dist[a * n + b] = embedding_metric(metric, batch[a].embedding, batch[b].embedding);
    }
  }

  struct Active {
    std::size_t anchor, pos, neg;
  };
  std::vector<Active> active;
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    std::optional<std::size_t> pos, neg;
    for (std::size_t b = 0; b < n; ++b) {
      if (b == a) continue;
      const double d = dist[a * n + b];
      if (*batch[b].identity == *batch[a].identity) {
        if (!pos || d > dist[a * n + *pos]) pos = b;
      } else if (!neg || d < dist[a * n + *neg]) {
        neg = b;
      }
    }
    if (!pos || !neg) continue;
    ++result.valid_anchors;
    const double hinge = dist[a * n + *pos] - dist[a * n + *neg] + margin;
    if (hinge > 0.0) {
      total += hinge;
      active.push_back({a, *pos, *neg});
    }
  }
  if (result.valid_anchors == 0) return result;
  const double scale = 1.0 / static_cast<double>(result.valid_anchors);
  result.loss = total * scale;
  for (const auto& t : active) {
    const auto& ea = batch[t.anchor].embedding;
    const auto& ep = batch[t.pos].embedding;
    const auto& en = batch[t.neg].embedding;
    add_metric_grad(metric, ea, ep, scale, result.grads[t.anchor]);
    add_metric_grad(metric, ep, ea, scale, result.grads[t.pos]);
    add_metric_grad(metric, ea, en, -scale, result.grads[t.anchor]);
    add_metric_grad(metric, en, ea, -scale, result.grads[t.neg]);
  }
  return result;
}

double association_similarity(const TrackObservation& track, const TrackObservation& detection,
                              EmbeddingMetric metric) {
  return bbox_iou(track.bbox, detection.bbox) *
         embedding_metric(metric, track.embedding, detection.embedding);
}

Association associate(std::span<const TrackObservation> history,
                      std::span<const TrackObservation> current, const TrackerConfig& cfg,
                      int& next_id) {
  cfg.validate();
  Association out;
  if (current.empty()) return out;
  const int frame = current[0].frame;
  for (const auto& d : current) {
    if (d.frame != frame) throw InvalidArgument("associate expects detections of a single frame");
  }

  // Latest in-window observation per identity, ordered by id.
  std::map<int, std::size_t> latest;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& h = history[i];
    if (!h.identity) throw InvalidArgument("history observation without identity");
    if (h.frame >= frame || frame - h.frame > cfg.window) continue;
    auto [it, inserted] = latest.try_emplace(*h.identity, i);
    if (!inserted && history[it->second].frame <= h.frame) it->second = i;
  }
  std::vector<std::size_t> tracks;
  std::vector<int> ids;
  for (const auto& [id, index] : latest) {
    ids.push_back(id);
    tracks.push_back(index);
  }

  const std::size_t n = current.size();
  const std::size_t t = tracks.size();
  std::vector<double> sim(n * t, 0.0);
  std::vector<char> eligible(n * t, 0);
  double max_sim = 0.0;
  for (std::size_t d = 0; d < n; ++d) {
    for (std::size_t k = 0; k < t; ++k) {
      const auto& track = history[tracks[k]];
      if (track.class_id != current[d].class_id) continue;
      const double s = association_similarity(track, current[d], cfg.association_metric);
      if (s > 0.0) {
        sim[d * t + k] = s;
        eligible[d * t + k] = 1;
        max_sim = std::max(max_sim, s);
      }
    }
  }

  out.track_ids.assign(n, 0);
  out.is_new.assign(n, true);
  if (max_sim > 0.0) {
    // One dummy column per detection stands for "start a new track" (Sim 0).
    // Ineligible pairs cost more than any dummy, so they are never chosen.
    const std::size_t cols = t + n;
    std::vector<double> cost(n * cols, max_sim);
    for (std::size_t d = 0; d < n; ++d) {
      for (std::size_t k = 0; k < t; ++k) {
        cost[d * cols + k] = eligible[d * t + k] ? max_sim - sim[d * t + k] : max_sim + 1.0;
      }
    }
    const auto assignment = solve_assignment(cost, static_cast<int>(n), static_cast<int>(cols));
    for (std::size_t d = 0; d < n; ++d) {
      const auto k = static_cast<std::size_t>(assignment[d]);
      if (k < t && eligible[d * t + k]) {
        out.track_ids[d] = ids[k];
        out.is_new[d] = false;
        out.total_similarity += sim[d * t + k];
      }
    }
  }
  for (std::size_t d = 0; d < n; ++d) {
    if (out.is_new[d]) out.track_ids[d] = next_id++;
  }
  return out;
}

std::vector<TrackObservation> run_tracker(std::span<const TrackObservation> detections,
                                          const TrackerConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (detections[i].score >= cfg.det_threshold) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].frame < detections[b].frame;
  });

  std::vector<TrackObservation> out;
  out.reserve(order.size());
  std::map<int, TrackObservation> live;
  int next_id = 1;
  std::size_t begin = 0;
  while (begin < order.size()) {
    const int frame = detections[order[begin]].frame;
    std::size_t end = begin;
    std::vector<TrackObservation> current;
    while (end < order.size() && detections[order[end]].frame == frame) {
      current.push_back(detections[order[end]]);
      ++end;
    }
    for (auto it = live.begin(); it != live.end();) {
      it = frame - it->second.frame > cfg.window ? live.erase(it) : std::next(it);
    }
    std::vector<TrackObservation> history;
    history.reserve(live.size());
    for (const auto& [id, obs] : live) history.push_back(obs);

    const Association a = associate(history, current, cfg, next_id);
    for (std::size_t d = 0; d < current.size(); ++d) {
      current[d].identity = a.track_ids[d];
      live[a.track_ids[d]] = current[d];
      out.push_back(std::move(current[d]));
    }
    begin = end;
  }
  return out;
}

}  // namespace wsmots
