#include "wsmots/metrics.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>

#include "wsmots/error.hpp"
#include "wsmots/kitti.hpp"

namespace wsmots {

namespace {

struct FrameSize2 {
  int height = 0;
  int width = 0;
};

// Image size shared by every mask of the frame, or nothing for a frame without masks.
std::optional<FrameSize2> frame_size(const FrameAnnotations& gt, const FrameAnnotations& pred) {
  std::optional<FrameSize2> size;
  auto visit = [&](const RleMask& m) {
    if (!size) {
      size = FrameSize2{m.height, m.width};
    } else if (size->height != m.height || size->width != m.width) {
      throw AnnotationError("frame " + std::to_string(gt.frame) + ": masks of size " +
                            std::to_string(m.height) + "x" + std::to_string(m.width) + " and " +
                            std::to_string(size->height) + "x" + std::to_string(size->width));
    }
  };
  for (const auto& i : gt.instances) visit(i.mask);
  for (const auto& m : gt.ignore_regions) visit(m);
  for (const auto& i : pred.instances) visit(i.mask);
  return size;
}

// Calls f(pos) for every foreground pixel (column-major position).
template <typename F>
void for_each_pixel(const RleMask& m, F&& f) {
  const auto runs = decompress_counts(m.counts);
  const std::uint64_t total = static_cast<std::uint64_t>(m.height) * static_cast<std::uint64_t>(m.width);
  std::uint64_t pos = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (pos + runs[r] > total) throw FormatError("RLE mask exceeds its declared size");
    if (r % 2 == 1) {
      for (std::uint64_t k = 0; k < runs[r]; ++k) f(pos + k);
    }
    pos += runs[r];
  }
  if (pos != total) throw FormatError("RLE mask does not cover its declared size");
}

std::vector<std::int32_t> paint(std::span<const Instance> instances, std::size_t pixels, int frame,
                                const char* side) {
  std::vector<std::int32_t> label(pixels, 0);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto id = static_cast<std::int32_t>(i + 1);
    for_each_pixel(instances[i].mask, [&](std::uint64_t p) {
      if (label[p] != 0) {
        throw AnnotationError(std::string(side) + " masks overlap in frame " + std::to_string(frame));
      }
      label[p] = id;
    });
  }
  return label;
}

struct FrameOverlap {
  std::vector<FrameMatch> matches;
  std::vector<std::uint64_t> pred_area;
  std::vector<std::uint64_t> pred_ignored;  // pixels inside ignore regions
};

FrameOverlap analyse(const FrameAnnotations& gt, const FrameAnnotations& pred) {
  FrameOverlap out;
  const std::size_t ng = gt.instances.size();
  const std::size_t np = pred.instances.size();
  out.pred_area.assign(np, 0);
  out.pred_ignored.assign(np, 0);
  const auto size = frame_size(gt, pred);
  if (!size) return out;
  const std::size_t pixels = static_cast<std::size_t>(size->height) * static_cast<std::size_t>(size->width);

  const auto gl = paint(gt.instances, pixels, gt.frame, "ground-truth");
  const auto pl = paint(pred.instances, pixels, gt.frame, "predicted");
  std::vector<char> ignore;
  if (!gt.ignore_regions.empty() && np > 0) {
    ignore.assign(pixels, 0);
    for (const auto& m : gt.ignore_regions) for_each_pixel(m, [&](std::uint64_t p) { ignore[p] = 1; });
  }

  std::vector<std::uint64_t> gt_area(ng, 0);
  std::vector<std::uint64_t> inter(ng * np, 0);
  for (std::size_t i = 0; i < pixels; ++i) {
    const std::int32_t g = gl[i];
    const std::int32_t p = pl[i];
    if (g) ++gt_area[static_cast<std::size_t>(g - 1)];
    if (p) {
      ++out.pred_area[static_cast<std::size_t>(p - 1)];
      if (!ignore.empty() && ignore[i]) ++out.pred_ignored[static_cast<std::size_t>(p - 1)];
      if (g) ++inter[static_cast<std::size_t>(g - 1) * np + static_cast<std::size_t>(p - 1)];
    }
  }
  for (std::size_t g = 0; g < ng; ++g) {
    for (std::size_t p = 0; p < np; ++p) {
      const std::uint64_t in = inter[g * np + p];
      if (in == 0 || gt.instances[g].class_id != pred.instances[p].class_id) continue;
      const double iou = static_cast<double>(in) /
                         static_cast<double>(gt_area[g] + out.pred_area[p] - in);
      if (iou > 0.5) out.matches.push_back({g, p, iou});
    }
  }
  return out;
}

struct FrameCounts {
  MetricsAccumulator acc;
  std::vector<std::pair<int, int>> ids;  // (gt track, pred track) per match
};

FrameCounts count_frame(const FrameAnnotations& gt, const FrameAnnotations& pred, int class_id) {
  FrameCounts out;
  const FrameOverlap ov = analyse(gt, pred);
  for (const auto& i : gt.instances) out.acc.gt_count += i.class_id == class_id ? 1 : 0;
  std::vector<char> matched(pred.instances.size(), 0);
  for (const auto& m : ov.matches) {
    if (gt.instances[m.gt].class_id != class_id) continue;
    ++out.acc.tp;
    out.acc.soft_tp += m.iou;
    matched[m.pred] = 1;
    out.ids.emplace_back(gt.instances[m.gt].track_id, pred.instances[m.pred].track_id);
  }
  for (std::size_t p = 0; p < pred.instances.size(); ++p) {
    if (matched[p] || pred.instances[p].class_id != class_id) continue;
    const bool ignored = ov.pred_area[p] > 0 && 2 * ov.pred_ignored[p] >= ov.pred_area[p];
    if (!ignored) ++out.acc.fp;
  }
  return out;
}

}  // namespace

std::vector<FrameMatch> match_frame(const FrameAnnotations& gt, const FrameAnnotations& pred) {
  return analyse(gt, pred).matches;
}

MetricsAccumulator& MetricsAccumulator::operator+=(const MetricsAccumulator& o) {
  gt_count += o.gt_count;
  tp += o.tp;
  soft_tp += o.soft_tp;
  fp += o.fp;
  ids += o.ids;
  return *this;
}

MetricsAccumulator accumulate_sequence(std::span<const FrameAnnotations> gt,
                                       std::span<const FrameAnnotations> pred, int class_id,
                                       Execution exec) {
  std::set<int> frame_set;
  std::unordered_map<int, const FrameAnnotations*> gt_at, pred_at;
  for (const auto& f : gt) {
    if (!gt_at.emplace(f.frame, &f).second) {
      throw AnnotationError("ground truth lists frame " + std::to_string(f.frame) + " twice");
    }
    frame_set.insert(f.frame);
  }
  for (const auto& f : pred) {
    if (!pred_at.emplace(f.frame, &f).second) {
      throw AnnotationError("prediction lists frame " + std::to_string(f.frame) + " twice");
    }
    frame_set.insert(f.frame);
  }
  const std::vector<int> frames(frame_set.begin(), frame_set.end());

  std::vector<FrameCounts> counts(frames.size());
  std::vector<std::string> errors(frames.size());
  const auto nf = static_cast<std::ptrdiff_t>(frames.size());
#pragma omp parallel for schedule(dynamic) if (exec == Execution::Parallel)
  for (std::ptrdiff_t i = 0; i < nf; ++i) {
    const auto k = static_cast<std::size_t>(i);
    FrameAnnotations empty;
    empty.frame = frames[k];
    const auto g = gt_at.find(frames[k]);
    const auto p = pred_at.find(frames[k]);
    try {
      counts[k] = count_frame(g != gt_at.end() ? *g->second : empty,
                              p != pred_at.end() ? *p->second : empty, class_id);
    } catch (const Error& e) {
      errors[k] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw AnnotationError(e);
  }

  MetricsAccumulator acc;
  std::unordered_map<int, int> last_pred;
  for (const auto& c : counts) {
    acc += c.acc;
    for (const auto& [g, p] : c.ids) {
      auto [it, inserted] = last_pred.try_emplace(g, p);
      if (!inserted) {
        if (it->second != p) ++acc.ids;
        it->second = p;
      }
    }
  }
  return acc;
}

MotsScores scores(const MetricsAccumulator& acc) {
  if (acc.gt_count == 0) throw InvalidArgument("scores need at least one ground-truth mask");
  const double m = static_cast<double>(acc.gt_count);
  const double penalty = static_cast<double>(acc.fp) + static_cast<double>(acc.ids);
  MotsScores s;
  s.smotsa = (acc.soft_tp - penalty) / m;
  s.motsa = (static_cast<double>(acc.tp) - penalty) / m;
  s.motsp = acc.tp > 0 ? acc.soft_tp / static_cast<double>(acc.tp) : 0.0;
  return s;
}

std::map<int, ClassResult> evaluate(const std::filesystem::path& gt_dir,
                                    const std::filesystem::path& pred_dir, Execution exec) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(gt_dir)) throw FormatError("ground-truth directory not found: " + gt_dir.string());
  if (!fs::is_directory(pred_dir)) throw FormatError("prediction directory not found: " + pred_dir.string());
  auto sequences = [](const fs::path& dir) {
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".txt") names.insert(e.path().filename().string());
    }
    return names;
  };
  const auto gt_names = sequences(gt_dir);
  for (const auto& name : sequences(pred_dir)) {
    if (!gt_names.count(name)) throw FormatError("prediction " + name + " has no ground truth");
  }

  std::map<int, MetricsAccumulator> per_class;
  for (const auto& name : gt_names) {
    const auto gt = parse_kitti(gt_dir / name, KittiIds::Strict);
    const fs::path pred_path = pred_dir / name;
    const auto pred = fs::exists(pred_path) ? parse_kitti(pred_path, KittiIds::Free)
                                            : std::vector<FrameAnnotations>{};
    std::set<int> classes;
    for (const auto& f : gt) {
      for (const auto& i : f.instances) classes.insert(i.class_id);
    }
    for (int c : classes) per_class[c] += accumulate_sequence(gt, pred, c, exec);
  }

  std::map<int, ClassResult> out;
  for (const auto& [c, acc] : per_class) out[c] = ClassResult{acc, scores(acc)};
  return out;
}

}  // namespace wsmots
