#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "oracles.hpp"
#include "wsmots/error.hpp"
#include "wsmots/tracking.hpp"

using namespace wsmots;

namespace {

TrackObservation obs(int frame, BBox box, std::vector<double> emb, std::optional<int> id = {}, int cls = 1,
                     double score = 1.0) {
  TrackObservation o;
  o.frame = frame;
  o.bbox = box;
  o.class_id = cls;
  o.score = score;
  o.embedding = std::move(emb);
  o.identity = id;
  return o;
}

double cos_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return 1.0 - ab / std::sqrt(aa * bb);
}

// Batch-hard loss straight from the definition.
double triplet_oracle(const std::vector<TrackObservation>& batch, double margin) {
  double sum = 0;
  int valid = 0;
  for (std::size_t a = 0; a < batch.size(); ++a) {
    double pos = -1, neg = 1e300;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (b == a) continue;
      const double d = cos_dist(batch[a].embedding, batch[b].embedding);
      if (*batch[b].identity == *batch[a].identity) {
        pos = std::max(pos, d);
      } else {
        neg = std::min(neg, d);
      }
    }
    if (pos < 0 || neg > 1e299) continue;
    sum += std::max(pos - neg + margin, 0.0);
    ++valid;
  }
  return valid ? sum / valid : 0.0;
}

}  // namespace

TEST_CASE("cosine helpers") {
  const std::vector<double> v{1, 0}, w{1, 1}, o{0, 1};
  CHECK(cosine_similarity(v, v) == doctest::Approx(1.0));
  CHECK(cosine_distance(v, v) == doctest::Approx(0.0));
  CHECK(cosine_similarity(v, o) == doctest::Approx(0.0));
  CHECK(cosine_distance(v, o) == doctest::Approx(1.0));
  CHECK(cosine_similarity(v, w) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK_THROWS_AS(cosine_similarity(v, std::vector<double>{0, 0}), InvalidArgument);
  CHECK_THROWS_AS(cosine_similarity(v, std::vector<double>{1, 0, 0}), ShapeError);
}

TEST_CASE("mask pooling") {
  // 2 channels over a 2x2 map.
  const std::vector<double> feat{1, 2, 3, 4, 10, 20, 30, 40};
  const auto uniform = mask_pool(feat, 2, ProbMask(2, 2, 0.5));
  CHECK(uniform[0] == doctest::Approx(2.5));
  CHECK(uniform[1] == doctest::Approx(25.0));
  ProbMask one_hot(2, 2, 0.0);
  one_hot(1, 0) = 1.0;
  const auto picked = mask_pool(feat, 2, one_hot);
  CHECK(picked[0] == doctest::Approx(3.0));
  CHECK(picked[1] == doctest::Approx(30.0));
  const auto fallback = mask_pool(feat, 2, ProbMask(2, 2, 0.0));
  CHECK(fallback[0] == doctest::Approx(2.5));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> f(3 * 12);
  for (auto& x : f) x = u(rng);
  ProbMask m(3, 4);
  for (auto& x : m.values()) x = u(rng);
  const auto got = mask_pool(f, 3, m);
  for (int c = 0; c < 3; ++c) {
    double num = 0, den = 0;
    for (int p = 0; p < 12; ++p) {
      num += m[static_cast<std::size_t>(p)] * f[static_cast<std::size_t>(c * 12 + p)];
      den += m[static_cast<std::size_t>(p)];
    }
    CHECK(got[static_cast<std::size_t>(c)] == doctest::Approx(num / den));
  }
}

TEST_CASE("triplet loss hand examples") {
  std::vector<TrackObservation> b{obs(0, {0, 0, 1, 1}, {1, 0}, 0), obs(0, {0, 0, 1, 1}, {1, 0}, 0),
                                  obs(0, {0, 0, 1, 1}, {0, 1}, 1)};
  const auto r = triplet_loss(b, 0.2);
  CHECK(r.loss == doctest::Approx(0.0));
  CHECK(r.valid_anchors == 2);

  std::vector<TrackObservation> same{obs(0, {0, 0, 1, 1}, {1, 1}, 0), obs(0, {0, 0, 1, 1}, {1, 1}, 0),
                                     obs(0, {0, 0, 1, 1}, {1, 1}, 1), obs(0, {0, 0, 1, 1}, {1, 1}, 1)};
  CHECK(triplet_loss(same, 0.2).loss == doctest::Approx(0.2));

  std::vector<TrackObservation> lonely{obs(0, {0, 0, 1, 1}, {1, 0}, 0), obs(0, {0, 0, 1, 1}, {0, 1}, 1)};
  const auto none = triplet_loss(lonely);
  CHECK(none.loss == 0.0);
  CHECK(none.valid_anchors == 0);
  lonely[0].identity.reset();
  CHECK_THROWS_AS(triplet_loss(lonely), InvalidArgument);
}

TEST_CASE("triplet loss agrees with the definition") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<TrackObservation> b;
    const int size = 2 + static_cast<int>(rng() % 11);
    for (int i = 0; i < size; ++i) {
      std::vector<double> e(kEmbeddingDim);
      for (auto& x : e) x = n(rng);
      b.push_back(obs(0, {0, 0, 1, 1}, e, static_cast<int>(rng() % 3)));
    }
    CHECK(triplet_loss(b, 0.2).loss == doctest::Approx(triplet_oracle(b, 0.2)).epsilon(1e-12));
  }
}

TEST_CASE("association maximises the similarity sum") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const TrackerConfig cfg;
  for (int t = 0; t < 150; ++t) {
    const int nt = static_cast<int>(rng() % 6), nd = static_cast<int>(rng() % 6);
    std::vector<TrackObservation> hist, cur;
    auto random_obs = [&](int frame, std::optional<int> id) {
      const double x = u(rng) * 10, y = u(rng) * 10;
      std::vector<double> e(4);
      for (auto& v : e) v = u(rng) - 0.3;
      if (std::all_of(e.begin(), e.end(), [](double v) { return v == 0.0; })) e[0] = 1;
      return obs(frame, {x, y, x + 3 + u(rng) * 5, y + 3 + u(rng) * 5}, e, id, 1 + static_cast<int>(rng() % 2));
    };
    for (int i = 0; i < nt; ++i) hist.push_back(random_obs(4, i + 1));
    for (int i = 0; i < nd; ++i) cur.push_back(random_obs(5, {}));
    std::vector<double> sim(static_cast<std::size_t>(nd * nt), 0.0);
    for (int d = 0; d < nd; ++d) {
      for (int k = 0; k < nt; ++k) {
        if (cur[static_cast<std::size_t>(d)].class_id != hist[static_cast<std::size_t>(k)].class_id) continue;
        sim[static_cast<std::size_t>(d * nt + k)] =
            association_similarity(hist[static_cast<std::size_t>(k)], cur[static_cast<std::size_t>(d)]);
      }
    }
    int next_id = 100;
    const auto a = associate(hist, cur, cfg, next_id);
    CHECK(a.total_similarity == doctest::Approx(oracle::best_matching(sim, nd, nt)).epsilon(1e-12));
    // Ids are distinct and fresh ones are issued in detection order.
    std::vector<int> ids = a.track_ids;
    std::sort(ids.begin(), ids.end());
    CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
    int expect_new = 100;
    for (int d = 0; d < nd; ++d) {
      if (a.is_new[static_cast<std::size_t>(d)]) CHECK(a.track_ids[static_cast<std::size_t>(d)] == expect_new++);
    }
  }
}

TEST_CASE("association is invariant to track order") {
  std::vector<TrackObservation> hist{obs(0, {0, 0, 10, 10}, {1, 0, 0}, 1), obs(0, {20, 0, 30, 10}, {0, 1, 0}, 2),
                                     obs(0, {40, 0, 50, 10}, {0, 0, 1}, 3)};
  std::vector<TrackObservation> cur{obs(1, {41, 0, 51, 10}, {0, 0.1, 1}), obs(1, {1, 0, 11, 10}, {1, 0.2, 0}),
                                    obs(1, {21, 0, 31, 10}, {0.1, 1, 0})};
  TrackerConfig cfg;
  int n1 = 10, n2 = 10;
  const auto a = associate(hist, cur, cfg, n1);
  std::reverse(hist.begin(), hist.end());
  const auto b = associate(hist, cur, cfg, n2);
  CHECK(a.track_ids == std::vector<int>{3, 1, 2});
  CHECK(b.track_ids == a.track_ids);
  CHECK(a.total_similarity == b.total_similarity);
}

TEST_CASE("class mismatch and zero similarity prevent a match") {
  std::vector<TrackObservation> hist{obs(0, {0, 0, 10, 10}, {1, 0}, 1, 1)};
  int next = 5;
  const TrackerConfig cfg;
  CHECK(associate(hist, std::vector{obs(1, {0, 0, 10, 10}, {1, 0}, {}, 2)}, cfg, next).is_new[0]);
  CHECK(associate(hist, std::vector{obs(1, {0, 0, 10, 10}, {0, 1}, {}, 1)}, cfg, next).is_new[0]);
  CHECK(associate(hist, std::vector{obs(1, {50, 0, 60, 10}, {1, 0}, {}, 1)}, cfg, next).is_new[0]);
  CHECK_FALSE(associate(hist, std::vector{obs(1, {1, 0, 11, 10}, {1, 0}, {}, 1)}, cfg, next).is_new[0]);
}

TEST_CASE("temporal window") {
  auto sequence = [](int gap) {
    std::vector<TrackObservation> dets;
    dets.push_back(obs(0, {0, 0, 10, 10}, {1, 0}));
    dets.push_back(obs(1, {0, 0, 10, 10}, {1, 0}));
    dets.push_back(obs(1 + gap, {0, 0, 10, 10}, {1, 0}));
    return run_tracker(dets, TrackerConfig{});
  };
  // gap = frame difference since the last sighting.
  CHECK(sequence(9)[2].identity == 1);
  CHECK(sequence(10)[2].identity == 1);
  CHECK(sequence(11)[2].identity == 2);
}

TEST_CASE("run_tracker drops low scores and keeps one id per smooth object") {
  std::vector<TrackObservation> dets;
  for (int f = 0; f < 15; ++f) {
    dets.push_back(obs(f, {f * 1.0, 0, f + 10.0, 10}, {1, 0, 0}));
    dets.push_back(obs(f, {60.0 - f, 0, 70.0 - f, 10}, {0, 1, 0}));
    dets.push_back(obs(f, {0, 40, 10, 50}, {0, 0, 1}, {}, 1, 0.5));
  }
  std::mt19937_64 rng(2);
  std::shuffle(dets.begin(), dets.end(), rng);
  const auto out = run_tracker(dets, TrackerConfig{});
  CHECK(out.size() == 30);
  std::map<int, std::set<int>> ids_by_object;
  for (const auto& o : out) ids_by_object[o.embedding[0] > 0.5 ? 0 : 1].insert(*o.identity);
  CHECK(ids_by_object[0].size() == 1);
  CHECK(ids_by_object[1].size() == 1);
  CHECK(*ids_by_object[0].begin() != *ids_by_object[1].begin());
  for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i - 1].frame <= out[i].frame);
  TrackerConfig bad;
  bad.window = 0;
  CHECK_THROWS_AS(run_tracker(dets, bad), InvalidArgument);
}

TEST_CASE("crossing objects keep their ids") {
  // Two same-class objects swap positions through an overlap; appearance decides.
  std::vector<TrackObservation> dets;
  for (int f = 0; f < 12; ++f) {
    dets.push_back(obs(f, {4.0 * f, 0, 4.0 * f + 12, 12}, {1, 0.1}));
    dets.push_back(obs(f, {44.0 - 4.0 * f, 0, 56.0 - 4.0 * f, 12}, {0.1, 1}));
  }
  const auto out = run_tracker(dets, TrackerConfig{});
  for (const auto& o : out) CHECK(*o.identity == (o.embedding[0] > 0.5 ? 1 : 2));
}
