#include <algorithm>
#include <string>

#include "wsmots/blob.hpp"
#include "wsmots/cli.hpp"
#include "wsmots/error.hpp"
#include "wsmots/reduce.hpp"

namespace wsmots::cli {

namespace {

namespace fs = std::filesystem;

std::string shape_string(const std::vector<std::uint32_t>& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "," : "") + std::to_string(dims[i]);
  return s + "]";
}

void expect_rank(const TensorBlob& b, const char* name, std::size_t rank) {
  if (b.dims.size() != rank) {
    throw ShapeError(std::string(name) + " must have rank " + std::to_string(rank) + ", got " +
                     shape_string(b.dims));
  }
}

void expect_dim(const TensorBlob& b, const char* name, std::size_t axis, std::size_t want) {
  if (b.dims[axis] != want) {
    throw ShapeError(std::string(name) + " has shape " + shape_string(b.dims) + ", axis " +
                     std::to_string(axis) + " should be " + std::to_string(want));
  }
}

std::vector<BBox> read_boxes(const TensorBlob& b, const char* name) {
  expect_rank(b, name, 2);
  expect_dim(b, name, 1, 4);
  std::vector<BBox> boxes;
  for (std::size_t i = 0; i < b.dims[0]; ++i) {
    const float* v = b.data.data() + i * 4;
    boxes.emplace_back(v[0], v[1], v[2], v[3]);
  }
  return boxes;
}

int as_index(float v, const char* name) {
  if (!(v >= 0.0f) || v != static_cast<float>(static_cast<long>(v)) || v > 1e9f) {
    throw InvalidArgument(std::string(name) + " entry " + std::to_string(v) +
                          " is not a non-negative integer");
  }
  return static_cast<int>(v);
}

// Slice i of the leading axis as doubles.
std::vector<double> slice(const TensorBlob& b, std::size_t i) {
  const std::size_t stride = b.dims[0] == 0 ? 0 : b.elements() / b.dims[0];
  return {b.data.begin() + static_cast<std::ptrdiff_t>(i * stride),
          b.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * stride)};
}

}  // namespace

LossBatch load_loss_batch(const fs::path& dir, GradCamVariant variant) {
  auto path = [&](const char* name) { return dir / (std::string(name) + ".blob"); };
  auto has = [&](const char* name) { return fs::exists(path(name)); };
  auto load = [&](const char* name) {
    if (!has(name)) throw FormatError("missing tensor " + path(name).string());
    return read_blob(path(name));
  };

  LossBatch batch;
  const TensorBlob masks = load("pred_masks");
  expect_rank(masks, "pred_masks", 3);
  const std::size_t r = masks.dims[0];
  const int mh = static_cast<int>(masks.dims[1]);
  const int mw = static_cast<int>(masks.dims[2]);
  for (std::size_t i = 0; i < r; ++i) batch.pred_masks.emplace_back(mh, mw, slice(masks, i));

  batch.rois = read_boxes(load("rois"), "rois");
  if (batch.rois.size() != r) throw ShapeError("rois and pred_masks disagree on the ROI count");
  batch.gt_boxes = read_boxes(load("gt_boxes"), "gt_boxes");
  const TensorBlob matches = load("matches");
  expect_rank(matches, "matches", 1);
  expect_dim(matches, "matches", 0, r);
  for (float v : matches.data) {
    const auto m = static_cast<std::size_t>(as_index(v, "matches"));
    if (m >= batch.gt_boxes.size()) {
      throw InvalidArgument("match " + std::to_string(m) + " refers past the " +
                            std::to_string(batch.gt_boxes.size()) + " ground-truth boxes");
    }
    batch.matches.push_back(m);
  }
  const TensorBlob size = load("frame_size");
  expect_rank(size, "frame_size", 1);
  expect_dim(size, "frame_size", 0, 2);
  batch.frame = {as_index(size.data[0], "frame_size"), as_index(size.data[1], "frame_size")};

  if (has("heatmaps")) {
    const TensorBlob h = load("heatmaps");
    expect_rank(h, "heatmaps", 3);
    expect_dim(h, "heatmaps", 0, r);
    for (std::size_t i = 0; i < r; ++i) {
      Grid<double> g(static_cast<int>(h.dims[1]), static_cast<int>(h.dims[2]), slice(h, i));
      for (double v : g.values()) {
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("heatmap value outside [0,1]");
      }
      batch.heatmaps.emplace_back(std::move(g));
    }
  } else if (has("activations") && has("gradients")) {
    const TensorBlob a = load("activations");
    const TensorBlob g = load("gradients");
    expect_rank(a, "activations", 4);
    expect_dim(a, "activations", 0, r);
    if (g.dims != a.dims) throw ShapeError("gradients and activations differ in shape");
    for (std::size_t i = 0; i < r; ++i) {
      GradCamInput in;
      in.channels = static_cast<int>(a.dims[1]);
      in.height = static_cast<int>(a.dims[2]);
      in.width = static_cast<int>(a.dims[3]);
      in.activations = slice(a, i);
      in.gradients = slice(g, i);
      batch.heatmaps.push_back(gradcam(in, variant));
    }
  } else {
    throw FormatError("batch needs heatmaps.blob or activations.blob and gradients.blob");
  }

  if (has("patches")) {
    const TensorBlob p = load("patches");
    expect_rank(p, "patches", 4);
    expect_dim(p, "patches", 0, r);
    expect_dim(p, "patches", 3, 3);
    for (std::size_t i = 0; i < r; ++i) {
      batch.patches.emplace_back(static_cast<int>(p.dims[1]), static_cast<int>(p.dims[2]), slice(p, i));
    }
  }

  if (has("embeddings") || has("ids")) {
    const TensorBlob e = load("embeddings");
    const TensorBlob ids = load("ids");
    expect_rank(e, "embeddings", 2);
    expect_rank(ids, "ids", 1);
    expect_dim(ids, "ids", 0, e.dims[0]);
    for (std::size_t i = 0; i < e.dims[0]; ++i) {
      TrackObservation o;
      o.embedding = slice(e, i);
      o.identity = as_index(ids.data[i], "ids");
      batch.embeddings.push_back(std::move(o));
    }
  }
  return batch;
}

LossBundle compute_losses(const LossBatch& batch, const LossOptions& options) {
  options.labels.validate();
  options.affinity.validate();
  if (!(options.lambda_crf >= 0.0)) throw InvalidArgument("lambda_crf must be non-negative");
  const std::size_t r = batch.pred_masks.size();
  if (batch.rois.size() != r || batch.matches.size() != r || batch.heatmaps.size() != r ||
      (!batch.patches.empty() && batch.patches.size() != r)) {
    throw ShapeError("loss batch tensors disagree on the ROI count");
  }

  LossBundle out;
  out.lambda_crf = options.lambda_crf;
  std::vector<LocItem> items;
  for (std::size_t i = 0; i < r; ++i) {
    const ProbMask& pred = batch.pred_masks[i];
    Heatmap h = batch.heatmaps[i];
    if (!h.same_shape(pred)) {
      Grid<double> g = resize_bilinear(h, pred.height(), pred.width());
      for (auto& v : g.values()) v = std::clamp(v, 0.0, 1.0);
      h = Heatmap(std::move(g));
    }
    items.push_back({make_pseudo_label(h, batch.rois[i], batch.gt_boxes, batch.matches[i], batch.frame,
                                       options.labels),
                     pred});
  }
  out.l_loc = batch_loc_loss(items, options.exec);

  const double inv_r = r == 0 ? 0.0 : 1.0 / static_cast<double>(r);
  std::vector<double> crf_terms;
  for (std::size_t i = 0; i < r; ++i) {
    Grid<double> g = loc_loss(items[i].label, items[i].pred).grad;
    for (auto& v : g.values()) v *= inv_r;
    if (!batch.patches.empty()) {
      const RoiCrfResult c =
          crf_loss_roi(batch.pred_masks[i], batch.patches[i], options.affinity, options.path, options.exec);
      crf_terms.push_back(c.loss);
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += options.lambda_crf * inv_r * c.grad[k];
    }
    out.grad_masks.push_back(std::move(g));
  }
  out.l_crf = crf_terms.empty() ? 0.0 : pairwise_mean(crf_terms);

  if (!batch.embeddings.empty()) {
    const TripletResult t = triplet_loss(batch.embeddings, options.margin, EmbeddingMetric::CosineDistance);
    out.l_t = t.loss;
    out.grad_embeddings = t.grads;
  }
  return out;
}

}  // namespace wsmots::cli
