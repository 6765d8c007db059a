#pragma once

#include <optional>
#include <span>
#include <vector>

#include "wsmots/mask.hpp"
#include "wsmots/rle.hpp"

namespace wsmots {

/// Default embedding length.
inline constexpr int kEmbeddingDim = 8;

struct TrackObservation {
  int frame = 0;
  BBox bbox;
  int class_id = 0;
  double score = 1.0;
  std::vector<double> embedding;
  std::optional<int> identity;
  std::optional<RleMask> mask;
};

/// How two embeddings are compared.
enum class EmbeddingMetric {
  CosineSimilarity,  ///< v.w / (|v||w|)
  CosineDistance,    ///< 1 - cosine similarity
};

struct TrackerConfig {
  int window = 10;
  double det_threshold = 0.9;
  double margin = 0.2;
  /// Used as the distance in the triplet loss.
  EmbeddingMetric triplet_metric = EmbeddingMetric::CosineDistance;
  /// Multiplies the box IoU in the association score.
  EmbeddingMetric association_metric = EmbeddingMetric::CosineSimilarity;

  void validate() const;
};

/// Throws InvalidArgument for zero vectors and ShapeError for length mismatch.
double cosine_similarity(std::span<const double> v, std::span<const double> w);
double cosine_distance(std::span<const double> v, std::span<const double> w);
double embedding_metric(EmbeddingMetric metric, std::span<const double> v, std::span<const double> w);

/// Mask-weighted mean of a channels x H x W feature map, one value per
/// channel. Falls back to the plain mean when the mask sums below 1e-6.
std::vector<double> mask_pool(std::span<const double> features, int channels, const ProbMask& mask);

struct TripletResult {
  double loss = 0.0;
  /// d loss / d embedding, one vector per observation.
  std::vector<std::vector<double>> grads;
  /// Anchors with at least one positive and one negative.
  std::size_t valid_anchors = 0;
};

/// Batch-hard triplet loss over observations that all carry an identity.
/// For each anchor: max(hardest positive distance - hardest negative
/// distance + margin, 0), averaged over valid anchors. The anchor is not its
/// own positive. Zero subgradient at the hinge kink; ties pick the lowest index.
TripletResult triplet_loss(std::span<const TrackObservation> batch, double margin = 0.2,
                           EmbeddingMetric metric = EmbeddingMetric::CosineDistance);

/// Box IoU times the embedding metric.
double association_similarity(const TrackObservation& track, const TrackObservation& detection,
                              EmbeddingMetric metric = EmbeddingMetric::CosineSimilarity);

struct Association {
  /// Track id per current observation.
  std::vector<int> track_ids;
  std::vector<bool> is_new;
  /// Sum of the similarity of matched pairs, in detection order.
  double total_similarity = 0.0;
};

/// Matches one frame of detections against the live tracks in `history`
/// (observations with identity set). For each identity only its most recent
/// observation within `cfg.window` frames before the current frame is a
/// candidate. Pairs must agree on class and have positive similarity; the
/// total similarity is maximised with the Hungarian method. Unmatched
/// detections receive fresh ids from `next_id`, in detection order.
Association associate(std::span<const TrackObservation> history,
                      std::span<const TrackObservation> current, const TrackerConfig& cfg,
                      int& next_id);

/// Runs association frame by frame over a detection list (any order; frames
/// are processed ascending, detections within a frame in input order).
/// Detections scoring below cfg.det_threshold are dropped. Returns the kept
/// detections with identity assigned, ids starting at 1.
std::vector<TrackObservation> run_tracker(std::span<const TrackObservation> detections,
                                          const TrackerConfig& cfg);

}  // namespace wsmots
