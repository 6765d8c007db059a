#include "wsmots/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "wsmots/blob.hpp"
#include "wsmots/detections.hpp"
#include "wsmots/error.hpp"
#include "wsmots/fsutil.hpp"
#include "wsmots/gradcheck.hpp"
#include "wsmots/kitti.hpp"
#include "wsmots/metrics.hpp"
#include "wsmots/synth.hpp"

namespace wsmots::cli {

namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kConfigKeys = {"embedding_dim", "triplet_margin", "lambda_crf", "mu_a",
                                              "window",        "det_thresh",     "sigma_xy",   "sigma_rgb"};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string class_name(int id) {
  if (id == kClassCar) return "car";
  if (id == kClassPedestrian) return "pedestrian";
  return "class" + std::to_string(id);
}

// Options that may also come from the config file.
struct ConfigBinding {
  std::string key;
  CLI::Option* option;
  std::function<void(const std::string&)> assign;
};

template <typename T>
ConfigBinding bind(const std::string& key, CLI::Option* option, T& target) {
  return {key, option, [&target, key](const std::string& text) {
            if (!CLI::detail::lexical_cast(text, target)) {
              throw FormatError("config value for " + key + " is not valid: " + text);
            }
          }};
}

void apply_config(const std::map<std::string, std::string>& config, const std::vector<ConfigBinding>& bindings) {
  for (const auto& b : bindings) {
    auto it = config.find(b.key);
    if (it != config.end() && b.option->count() == 0) b.assign(it->second);
  }
}

void check_embedding_dim(std::size_t got, int want, const std::string& what) {
  if (want > 0 && got != static_cast<std::size_t>(want)) {
    throw ShapeError(what + " have length " + std::to_string(got) + ", embedding_dim is " +
                     std::to_string(want));
  }
}

// eval

struct EvalArgs {
  std::string gt, pred, json, kv;
};

int cmd_eval(const EvalArgs& a, Execution exec, std::ostream& out) {
  const auto results = evaluate(a.gt, a.pred, exec);
  out << std::left << std::setw(12) << "class" << std::right;
  for (const char* h : {"sMOTSA", "MOTSA", "MOTSP"}) out << std::setw(9) << h;
  for (const char* h : {"TP", "FP", "IDS", "|M|"}) out << std::setw(8) << h;
  out << '\n';
  nlohmann::ordered_json json = nlohmann::ordered_json::object();
  std::string kv;
  for (const auto& [cls, r] : results) {
    const std::string name = class_name(cls);
    out << std::left << std::setw(12) << name << std::right << std::fixed << std::setprecision(4)
        << std::setw(9) << r.scores.smotsa << std::setw(9) << r.scores.motsa << std::setw(9) << r.scores.motsp
        << std::defaultfloat << std::setw(8) << r.acc.tp << std::setw(8) << r.acc.fp << std::setw(8)
        << r.acc.ids << std::setw(8) << r.acc.gt_count << '\n';
    json[name] = {{"class_id", cls},         {"smotsa", r.scores.smotsa}, {"motsa", r.scores.motsa},
                  {"motsp", r.scores.motsp}, {"tp", r.acc.tp},            {"soft_tp", r.acc.soft_tp},
                  {"fp", r.acc.fp},          {"ids", r.acc.ids},          {"gt", r.acc.gt_count}};
    for (const auto& [k, v] : json[name].items()) kv += name + "." + k + "=" + v.dump() + "\n";
  }
  if (!a.json.empty()) write_file_atomic(a.json, json.dump(2) + "\n");
  if (!a.kv.empty()) write_file_atomic(a.kv, kv);
  return kExitOk;
}

// track

struct TrackArgs {
  std::string detections, out, kitti, overlay;
  TrackerConfig cfg;
  int embedding_dim = kEmbeddingDim;
};

int cmd_track(const TrackArgs& a, std::ostream& out) {
  a.cfg.validate();
  const auto dets = read_detections(a.detections);
  for (const auto& d : dets) check_embedding_dim(d.embedding.size(), a.embedding_dim, "detection embeddings");
  const auto tracked = run_tracker(dets, a.cfg);
  // Validate every output before writing any of them.
  std::vector<FrameAnnotations> frames;
  if (!a.kitti.empty() || !a.overlay.empty()) frames = tracks_to_kitti(tracked);
  std::vector<std::pair<fs::path, std::string>> pngs;
  if (!a.overlay.empty()) {
    for (const auto& f : frames) {
      char name[32];
      std::snprintf(name, sizeof name, "%06d.png", f.frame);
      pngs.emplace_back(fs::path(a.overlay) / name, encode_png(render_overlay(f)));
    }
  }
  std::ostringstream jsonl;
  write_detections(tracked, jsonl);
  write_file_atomic(a.out, jsonl.str());
  if (!a.kitti.empty()) write_kitti(frames, a.kitti);
  for (const auto& [path, bytes] : pngs) write_file_atomic(path, bytes);

  std::set<int> ids;
  for (const auto& t : tracked) ids.insert(*t.identity);
  out << "kept " << tracked.size() << " of " << dets.size() << " detections, " << ids.size() << " tracks\n";
  return kExitOk;
}

// losses

struct LossArgs {
  std::string batch, grads;
  std::string variant = "absolute";
  std::string path = "fast";
  LossOptions options;
  int embedding_dim = kEmbeddingDim;
  double lambda = 1.0;
};

int cmd_losses(const LossArgs& a, std::ostream& out) {
  const LossBatch batch =
      load_loss_batch(a.batch, a.variant == "original" ? GradCamVariant::Original : GradCamVariant::Absolute);
  for (const auto& e : batch.embeddings) check_embedding_dim(e.embedding.size(), a.embedding_dim, "embeddings");
  LossOptions options = a.options;
  options.path = a.path == "dense" ? AffinityPath::Dense : AffinityPath::Fast;
  const LossBundle b = compute_losses(batch, options);

  if (!a.grads.empty()) {
    std::vector<double> masks;
    for (const auto& g : b.grad_masks) masks.insert(masks.end(), g.values().begin(), g.values().end());
    const auto h = static_cast<std::uint32_t>(batch.pred_masks.empty() ? 0 : batch.pred_masks[0].height());
    const auto w = static_cast<std::uint32_t>(batch.pred_masks.empty() ? 0 : batch.pred_masks[0].width());
    std::vector<double> emb;
    for (const auto& g : b.grad_embeddings) emb.insert(emb.end(), g.begin(), g.end());
    const auto dim = static_cast<std::uint32_t>(b.grad_embeddings.empty() ? 0 : b.grad_embeddings[0].size());
    const TensorBlob gm = TensorBlob::from_doubles(
        {static_cast<std::uint32_t>(b.grad_masks.size()), h, w}, masks);
    const TensorBlob ge = TensorBlob::from_doubles(
        {static_cast<std::uint32_t>(b.grad_embeddings.size()), dim}, emb);
    write_blob(gm, fs::path(a.grads) / "grad_pred_masks.blob");
    write_blob(ge, fs::path(a.grads) / "grad_embeddings.blob");
  }
  out << "l_loc      " << format_number(b.l_loc) << '\n'
      << "l_crf      " << format_number(b.l_crf) << '\n'
      << "l_t        " << format_number(b.l_t) << '\n'
      << "lambda_crf " << format_number(b.lambda_crf) << '\n'
      << "l_msk      " << format_number(b.l_msk()) << '\n'
      << "lambda     " << format_number(a.lambda) << '\n'
      << "l_total    " << format_number(b.l_t + a.lambda * b.l_msk()) << '\n';
  return kExitOk;
}

// gradcheck

int cmd_gradcheck(const GradcheckOptions& options, std::ostream& out) {
  const GradcheckReport report = run_gradcheck(options);
  out << std::left << std::setw(16) << "loss" << std::right << std::setw(14) << "max_rel_err" << std::setw(10)
      << "tol" << "  status\n";
  for (const auto& e : report.entries) {
    char err[32], tol[32];
    std::snprintf(err, sizeof err, "%.3e", e.max_rel_error);
    std::snprintf(tol, sizeof tol, "%.0e", e.tolerance);
    out << std::left << std::setw(16) << e.name << std::right << std::setw(14) << err << std::setw(10) << tol
        << "  " << (e.passed ? "PASS" : "FAIL") << '\n';
  }
  return report.passed() ? kExitOk : kExitCheckFailed;
}

// synth

struct SynthArgs {
  SynthConfig cfg;
  std::string out;
  std::vector<std::string> gaps, switches;
};

std::vector<int> split_ints(const std::string& s, std::size_t count, const char* what) {
  std::vector<int> v;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ':')) {
    int x = 0;
    if (!CLI::detail::lexical_cast(part, x)) throw InvalidArgument(std::string("bad ") + what + ": " + s);
    v.push_back(x);
  }
  if (v.size() != count) throw InvalidArgument(std::string("bad ") + what + ": " + s);
  return v;
}

int cmd_synth(SynthArgs a, std::ostream& out) {
  for (const auto& g : a.gaps) {
    const auto v = split_ints(g, 3, "gap (expected OBJ:START:LEN)");
    a.cfg.gaps.push_back({v[0], v[1], v[2]});
  }
  for (const auto& s : a.switches) {
    const auto v = split_ints(s, 2, "id switch (expected OBJ:FRAME)");
    a.cfg.id_switches.push_back({v[0], v[1]});
  }
  const SynthSequence seq = synthesize(a.cfg);
  write_kitti(seq.gt, fs::path(a.out) / "gt" / "0000.txt");
  write_detections(seq.detections, fs::path(a.out) / "detections.jsonl");
  out << "wrote " << seq.gt.size() << " frames, " << seq.detections.size() << " detections to " << a.out << '\n';
  return kExitOk;
}

}  // namespace

std::map<std::string, std::string> parse_config(std::string_view text) {
  std::map<std::string, std::string> config;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw FormatError("expected key = value", line_no);
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (std::find(kConfigKeys.begin(), kConfigKeys.end(), key) == kConfigKeys.end()) {
      throw FormatError("unknown config key '" + key + "'", line_no);
    }
    if (value.empty()) throw FormatError("empty value for '" + key + "'", line_no);
    config[key] = value;
  }
  return config;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weakly supervised MOTS core: evaluation, tracking, losses, gradient checks, synthetic data",
               "wsmots"};
  app.require_subcommand(1);
  std::string config_path;
  bool serial = false;
  app.add_option("--config", config_path, "Flat key = value file with defaults")->check(CLI::ExistingFile);
  app.add_flag("--serial", serial, "Use the serial reference kernels");
  std::vector<ConfigBinding> bindings;

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth (KITTI MOTS files)");
  eval_cmd->add_option("--gt", eval.gt, "Ground-truth directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--pred", eval.pred, "Prediction directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--json", eval.json, "Write the scores as JSON");
  eval_cmd->add_option("--kv", eval.kv, "Write the scores as key=value lines");

  TrackArgs track;
  auto* track_cmd = app.add_subcommand("track", "Assign track ids to a detections file");
  track_cmd->add_option("--detections", track.detections, "Detections (JSON Lines)")
      ->required()
      ->check(CLI::ExistingFile);
  track_cmd->add_option("--out", track.out, "Tracked detections (JSON Lines)")->required();
  bindings.push_back(bind("window", track_cmd->add_option("--window", track.cfg.window, "Temporal window")
                                        ->capture_default_str(),
                          track.cfg.window));
  bindings.push_back(bind("det_thresh",
                          track_cmd->add_option("--det-thresh", track.cfg.det_threshold, "Detection threshold")
                              ->capture_default_str(),
                          track.cfg.det_threshold));
  bindings.push_back(bind("embedding_dim",
                          track_cmd->add_option("--embedding-dim", track.embedding_dim, "Expected embedding length")
                              ->capture_default_str(),
                          track.embedding_dim));
  track_cmd->add_option("--kitti", track.kitti, "Also write a KITTI MOTS prediction file");
  track_cmd->add_option("--overlay", track.overlay, "Write one PNG per frame, masks coloured by id");

  LossArgs losses;
  auto* loss_cmd = app.add_subcommand("losses", "Evaluate the weak-supervision losses on a tensor batch");
  loss_cmd->add_option("--batch", losses.batch, "Batch directory of .blob tensors")
      ->required()
      ->check(CLI::ExistingDirectory);
  bindings.push_back(bind("mu_a",
                          loss_cmd->add_option("--mu-a", losses.options.labels.mu_a, "Grad-CAM threshold")
                              ->capture_default_str(),
                          losses.options.labels.mu_a));
  bindings.push_back(bind("lambda_crf",
                          loss_cmd->add_option("--lambda-crf", losses.options.lambda_crf, "CRF loss weight")
                              ->capture_default_str(),
                          losses.options.lambda_crf));
  bindings.push_back(bind("triplet_margin",
                          loss_cmd->add_option("--margin", losses.options.margin, "Triplet margin")
                              ->capture_default_str(),
                          losses.options.margin));
  bindings.push_back(bind("sigma_xy",
                          loss_cmd->add_option("--sigma-xy", losses.options.affinity.sigma_xy, "Spatial bandwidth")
                              ->capture_default_str(),
                          losses.options.affinity.sigma_xy));
  bindings.push_back(bind("sigma_rgb",
                          loss_cmd->add_option("--sigma-rgb", losses.options.affinity.sigma_rgb, "Colour bandwidth")
                              ->capture_default_str(),
                          losses.options.affinity.sigma_rgb));
  bindings.push_back(bind("embedding_dim",
                          loss_cmd->add_option("--embedding-dim", losses.embedding_dim, "Expected embedding length")
                              ->capture_default_str(),
                          losses.embedding_dim));
  loss_cmd->add_option("--gradcam", losses.variant, "Grad-CAM variant for activation inputs")
      ->check(CLI::IsMember({"absolute", "original"}))
      ->capture_default_str();
  loss_cmd->add_option("--crf-path", losses.path, "Affinity evaluation")
      ->check(CLI::IsMember({"fast", "dense"}))
      ->capture_default_str();
  loss_cmd->add_option("--lattice-passes", losses.options.affinity.lattice_passes,
                       "Blur passes of the fast path (even)")
      ->capture_default_str();
  loss_cmd->add_option("--lambda", losses.lambda, "Weight of the mask losses against l_t")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  loss_cmd->add_option("--grads", losses.grads, "Write gradient blobs to this directory");

  GradcheckOptions gradcheck;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the analytic gradients");
  gc_cmd->add_option("--seed", gradcheck.seed, "Random seed")->capture_default_str();
  gc_cmd->add_option("--instances", gradcheck.instances, "Random instances per loss")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gc_cmd->add_flag("--corrupt", gradcheck.corrupt, "Perturb the analytic gradients (checker self-test)");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic sequence: KITTI ground truth + detections");
  synth_cmd->add_option("--frames", synth.cfg.frames)->capture_default_str();
  synth_cmd->add_option("--objects", synth.cfg.objects)->capture_default_str();
  synth_cmd->add_option("--seed", synth.cfg.seed)->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--width", synth.cfg.width)->capture_default_str();
  synth_cmd->add_option("--height", synth.cfg.height)->capture_default_str();
  synth_cmd->add_option("--motion", synth.cfg.motion, "px per frame")->capture_default_str();
  synth_cmd->add_option("--occlusion", synth.cfg.occlusion, "Chance an object is absent in a frame")
      ->capture_default_str();
  synth_cmd->add_option("--box-noise", synth.cfg.box_noise, "Box jitter std, px")->capture_default_str();
  synth_cmd->add_option("--emb-noise", synth.cfg.emb_noise, "Embedding noise std")->capture_default_str();
  synth_cmd->add_option("--erode", synth.cfg.erode, "Detection mask erosions")->capture_default_str();
  synth_cmd->add_option("--gap", synth.gaps, "OBJ:START:LEN, object absent for LEN frames");
  synth_cmd->add_option("--id-switch", synth.switches, "OBJ:FRAME, new appearance cluster from FRAME on");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  const Execution exec = serial ? Execution::Serial : Execution::Parallel;
  losses.options.exec = exec;
  try {
    if (!config_path.empty()) apply_config(parse_config(read_file(config_path)), bindings);
    if (eval_cmd->parsed()) return cmd_eval(eval, exec, out);
    if (track_cmd->parsed()) return cmd_track(track, out);
    if (loss_cmd->parsed()) return cmd_losses(losses, out);
    if (gc_cmd->parsed()) return cmd_gradcheck(gradcheck, out);
    return cmd_synth(synth, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace wsmots::cli
