// SPDX-License-Identifier: Apache-2.0
#pragma once

// Implementations of the command-line subcommands.  Each returns a process
// exit code: 0 ok, 2 input error, 3 detector error, 4 geometry error.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mvpatch/bridge.hpp"
#include "mvpatch/config.hpp"
#include "mvpatch/dataset_io.hpp"
#include "mvpatch/detector.hpp"
#include "mvpatch/error.hpp"
#include "mvpatch/evaluation.hpp"
#include "mvpatch/geometry.hpp"
#include "mvpatch/imaging.hpp"
#include "mvpatch/loss.hpp"
#include "mvpatch/optimizer.hpp"
#include "mvpatch/png_io.hpp"

namespace mvpatch::cli {

namespace fs = std::filesystem;

/// An error with an explicit exit code, used where the stage that failed
/// decides the code rather than the error kind.
class StageError : public Error {
 public:
  StageError(int code, ErrorKind kind, const std::string& msg) : Error(kind, msg), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

template <typename Fn>
auto in_stage(int code, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(code, e.kind(), e.what());
  }
}

template <typename Fn>
int run_guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError& e) {
    err << "error: " << e.what() << '\n';
    return e.code();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

// ---------------------------------------------------------------------------
// Shared option handling
// ---------------------------------------------------------------------------

/// Values from an optional config file; command-line flags override them.
struct ToyOverrides {
  std::optional<std::uint64_t> template_seed;
  std::optional<double> k;
  std::optional<double> b;
  std::optional<int> stride;
};

inline ToyDetectorSpec resolve_toy_spec(const std::optional<ToyDetectorHints>& hints, const ToyOverrides& o) {
  const ToyDetectorHints h = hints.value_or(ToyDetectorHints{});
  return ToyDetectorSpec::make(o.template_seed.value_or(h.template_seed), o.k.value_or(h.k), o.b.value_or(h.b),
                               o.stride.value_or(h.stride));
}

inline void read_toy_overrides(const KeyValueConfig& kv, ToyOverrides& o) {
  if (!o.template_seed) o.template_seed = kv.get<std::uint64_t>("toy.template_seed");
  if (!o.k) o.k = kv.get<double>("toy.k");
  if (!o.b) o.b = kv.get<double>("toy.b");
  if (!o.stride) o.stride = kv.get<int>("toy.stride");
}

inline std::unique_ptr<Detector> make_detector(const std::string& selector, const ToyDetectorSpec& toy, int jobs,
                                               const fs::path& scratch) {
  if (selector == "toy") return std::make_unique<ToyDetector>(toy, jobs);
  if (auto bc = BridgeConfig::from_selector(selector)) {
    bc->scratch_dir = scratch;
    return std::make_unique<BridgeDetector>(*bc);
  }
  fail(ErrorKind::InvalidArgument, "unknown detector '" + selector + "' (expected toy, bridge:<command> or bridge-unix:<path>)");
}

inline std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::string t = text;
  for (char& c : t) {
    if (c == ',' || c == '{' || c == '}') c = ' ';
  }
  std::istringstream ss(t);
  std::string tok;
  while (ss >> tok) {
    const auto v = parse_number<int>(tok);
    if (!v) fail(ErrorKind::InvalidArgument, "invalid view id '" + tok + "'");
    out.push_back(*v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// estimate-h
// ---------------------------------------------------------------------------

struct EstimateOptions {
  fs::path points;
  fs::path out;
};

inline int cmd_estimate_h(const EstimateOptions& o, std::ostream& err = std::cerr) {
  return run_guarded(err, [&] {
    const auto cs = load_correspondences(o.points);
    const Homography h = estimate_homography(cs);
    save_homography(o.out, h);
    const auto errs = reprojection_errors(h, cs);
    double sq = 0.0, mx = 0.0;
    for (double e : errs) {
      sq += e * e;
      mx = std::max(mx, e);
    }
    err << "reprojection error over " << errs.size() << " points: rms " << std::sqrt(sq / errs.size()) << " px, max "
        << mx << " px\n";
    return static_cast<int>(kExitOk);
  });
}

// ---------------------------------------------------------------------------
// warp
// ---------------------------------------------------------------------------

struct WarpOptions {
  fs::path in;
  fs::path homography;
  fs::path out;
  std::optional<fs::path> mask_out;
  int width = 0;  // 0: same as input
  int height = 0;
  int jobs = 1;
};

inline int cmd_warp(const WarpOptions& o, std::ostream& err = std::cerr) {
  return run_guarded(err, [&] {
    const ImageBuffer src = read_png(o.in);
    const Homography h = load_homography(o.homography);
    const auto res = in_stage(kExitGeometry, [&] {
      return warp_image(src, h, o.width > 0 ? o.width : src.width(), o.height > 0 ? o.height : src.height(), o.jobs);
    });
    write_png(o.out, res.image);
    if (o.mask_out) write_mask_png(*o.mask_out, res.mask);
    return static_cast<int>(kExitOk);
  });
}

// ---------------------------------------------------------------------------
// apply-patch / project
// ---------------------------------------------------------------------------

inline BBox parse_bbox(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 4) fail(ErrorKind::InvalidArgument, "box must be xmin,ymin,xmax,ymax: '" + text + "'");
  double v[4];
  for (std::size_t i = 0; i < 4; ++i) {
    const auto d = parse_number<double>(parts[i]);
    if (!d) fail(ErrorKind::InvalidArgument, "box must be xmin,ymin,xmax,ymax: '" + text + "'");
    v[i] = *d;
  }
  BBox b{v[0], v[1], v[2], v[3]};
  if (!b.valid()) fail(ErrorKind::InvalidBox, "box needs xmin < xmax and ymin < ymax: '" + text + "'");
  return b;
}

/// Quad file: one quad per line, eight numbers x0 y0 x1 y1 x2 y2 x3 y3.
inline void save_quads(const fs::path& path, const std::vector<Quad>& quads) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) fail(ErrorKind::IoError, "cannot write " + path.string());
  os << "# x_tl y_tl x_tr y_tr x_br y_br x_bl y_bl\n";
  for (const auto& q : quads) {
    for (std::size_t i = 0; i < 4; ++i) os << (i ? " " : "") << format_double(q[i].x) << ' ' << format_double(q[i].y);
    os << '\n';
  }
}

inline std::vector<Quad> load_quads(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, path.string());
  std::vector<Quad> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ss(t);
    std::vector<double> v;
    std::string tok;
    while (ss >> tok) {
      const auto d = parse_number<double>(tok);
      if (!d) fail(ErrorKind::ParseError, path.string() + ":" + std::to_string(lineno) + ": not a number");
      v.push_back(*d);
    }
    if (v.size() != 8) fail(ErrorKind::ParseError, path.string() + ":" + std::to_string(lineno) + ": expected 8 numbers");
    out.push_back({Point2{v[0], v[1]}, Point2{v[2], v[3]}, Point2{v[4], v[5]}, Point2{v[6], v[7]}});
  }
  return out;
}

struct ApplyPatchOptions {
  fs::path frame;
  fs::path patch;
  std::vector<std::string> bboxes;
  double scale = 0.5;
  double anchor_x = 0.5;
  double anchor_y = 0.5;
  fs::path out;
  std::optional<fs::path> quads_out;
};

inline int cmd_apply_patch(const ApplyPatchOptions& o, std::ostream& err = std::cerr) {
  return run_guarded(err, [&] {
    if (o.bboxes.empty()) fail(ErrorKind::InvalidArgument, "at least one --bbox is required");
    ImageBuffer frame = read_png(o.frame);
    const ImageBuffer patch = read_png(o.patch);
    std::vector<Quad> quads;
    for (const auto& text : o.bboxes) {
      quads.push_back(place_patch_into(frame, patch, {parse_bbox(text), o.scale, o.anchor_x, o.anchor_y}));
    }
    write_png(o.out, frame);
    if (o.quads_out) save_quads(*o.quads_out, quads);
    return static_cast<int>(kExitOk);
  });
}

struct ProjectOptions {
  fs::path dst;
  fs::path ref;
  fs::path quads;
  fs::path homography;
  fs::path out;
};

inline int cmd_project(const ProjectOptions& o, std::ostream& err = std::cerr) {
  return run_guarded(err, [&] {
    ImageBuffer dst = read_png(o.dst);
    const ImageBuffer ref = read_png(o.ref);
    const auto quads = load_quads(o.quads);
    const Homography h = in_stage(kExitGeometry, [&] { return load_homography(o.homography); });
    in_stage(kExitGeometry, [&] {
      for (const auto& q : quads) dst = project_patch(dst, ref, q, h);
      return 0;
    });
    write_png(o.out, dst);
    return static_cast<int>(kExitOk);
  });
}

// ---------------------------------------------------------------------------
// train-patch
// ---------------------------------------------------------------------------

struct TrainOptions {
  fs::path dataset;
  std::optional<fs::path> config;
  fs::path out;
  // Flag overrides; unset values fall back to the config file, then defaults.
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::optional<int> minibatch;
  std::optional<double> lr;
  std::optional<int> patch_w;
  std::optional<int> patch_h;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<double> gamma;
  std::optional<double> scale;
  std::optional<double> anchor_x;
  std::optional<double> anchor_y;
  std::optional<std::string> train_views;
  std::optional<std::string> detector;
  std::optional<fs::path> palette;
  std::optional<int> jobs;
  ToyOverrides toy;
};

inline const std::set<std::string>& train_config_keys() {
  static const std::set<std::string> keys{
      "seed",     "iterations", "minibatch",   "lr",       "patch_w",  "patch_h",  "alpha",
      "beta",     "gamma",      "patch_scale", "anchor_x", "anchor_y", "train_views", "detector",
      "palette",  "jobs",       "toy.template_seed", "toy.k", "toy.b", "toy.stride"};
  return keys;
}

inline const std::set<std::string>& eval_config_keys() {
  static const std::set<std::string> keys{"ref_view", "views",    "detector", "iou",      "conf",
                                          "patch_scale", "anchor_x", "anchor_y", "jobs",
                                          "toy.template_seed", "toy.k", "toy.b", "toy.stride"};
  return keys;
}

inline KeyValueConfig load_config_checked(const fs::path& path, const std::set<std::string>& allowed) {
  KeyValueConfig kv = KeyValueConfig::load(path);
  for (const auto& key : kv.keys()) {
    if (!allowed.contains(key)) {
      fail(ErrorKind::ParseError, path.string() + ":" + std::to_string(kv.line_of(key)) + ": unknown key '" + key + "'");
    }
  }
  return kv;
}

inline std::string train_meta(const TrainConfig& cfg, const std::string& detector, const std::vector<int>& views,
                              const LossBreakdown& last) {
  std::ostringstream os;
  os << "# patch training metadata\n";
  os << "seed = " << cfg.seed << '\n';
  os << "iterations = " << cfg.iterations << '\n';
  os << "patch_w = " << cfg.patch_w << '\n';
  os << "patch_h = " << cfg.patch_h << '\n';
  os << "minibatch = " << cfg.minibatch << '\n';
  os << "lr = " << format_double(cfg.lr) << '\n';
  os << "alpha = " << format_double(cfg.weights.alpha) << '\n';
  os << "beta = " << format_double(cfg.weights.beta) << '\n';
  os << "gamma = " << format_double(cfg.weights.gamma) << '\n';
  os << "patch_scale = " << format_double(cfg.patch_scale) << '\n';
  os << "anchor_x = " << format_double(cfg.anchor_x) << '\n';
  os << "anchor_y = " << format_double(cfg.anchor_y) << '\n';
  os << "detector = " << detector << '\n';
  os << "train_views =";
  for (int v : views) os << ' ' << v;
  os << '\n';
  os << "final_iteration = " << cfg.iterations << '\n';
  os << "final_total = " << format_double(last.total) << '\n';
  os << "final_l_obj = " << format_double(last.l_obj) << '\n';
  return os.str();
}

inline void write_loss_history(const fs::path& path, const std::vector<LossBreakdown>& history) {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::IoError, "cannot write " + path.string());
  os << "iteration,l_nps,l_tv,l_tv_effective,l_obj,total\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& h = history[i];
    os << i << ',' << format_double(h.l_nps) << ',' << format_double(h.l_tv) << ',' << format_double(h.l_tv_effective)
       << ',' << format_double(h.l_obj) << ',' << format_double(h.total) << '\n';
  }
}

/// Loads (view, frame) training samples with their person boxes.  Frames
/// without persons are skipped.
inline std::vector<TrainSample> load_train_samples(const DatasetManifest& m, const std::vector<GroundTruthBox>& gts,
                                                   const std::vector<int>& views) {
  std::vector<TrainSample> samples;
  for (int v : views) {
    for (int f : m.frames) {
      TrainSample s;
      for (const auto& g : gts) {
        if (g.view_id == v && g.frame_id == f) s.person_bboxes.push_back(g.bbox);
      }
      if (s.person_bboxes.empty()) continue;
      s.frame = read_png(m.image_path(v, f));
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

inline int cmd_train_patch(const TrainOptions& o, std::ostream& err = std::cerr) {
  return run_guarded(err, [&] {
    KeyValueConfig kv;
    if (o.config) kv = load_config_checked(*o.config, train_config_keys());

    TrainConfig cfg;
    cfg.seed = o.seed ? *o.seed : kv.get<std::uint64_t>("seed").value_or(cfg.seed);
    cfg.iterations = o.iterations ? *o.iterations : kv.get<int>("iterations").value_or(cfg.iterations);
    cfg.minibatch = o.minibatch ? *o.minibatch : kv.get<int>("minibatch").value_or(cfg.minibatch);
    cfg.lr = o.lr ? *o.lr : kv.get<double>("lr").value_or(cfg.lr);
    cfg.patch_w = o.patch_w ? *o.patch_w : kv.get<int>("patch_w").value_or(cfg.patch_w);
    cfg.patch_h = o.patch_h ? *o.patch_h : kv.get<int>("patch_h").value_or(cfg.patch_h);
    cfg.weights.alpha = o.alpha ? *o.alpha : kv.get<double>("alpha").value_or(cfg.weights.alpha);
    cfg.weights.beta = o.beta ? *o.beta : kv.get<double>("beta").value_or(cfg.weights.beta);
    cfg.weights.gamma = o.gamma ? *o.gamma : kv.get<double>("gamma").value_or(cfg.weights.gamma);
    cfg.patch_scale = o.scale ? *o.scale : kv.get<double>("patch_scale").value_or(cfg.patch_scale);
    cfg.anchor_x = o.anchor_x ? *o.anchor_x : kv.get<double>("anchor_x").value_or(cfg.anchor_x);
    cfg.anchor_y = o.anchor_y ? *o.anchor_y : kv.get<double>("anchor_y").value_or(cfg.anchor_y);
    cfg.jobs = o.jobs ? *o.jobs : kv.get<int>("jobs").value_or(default_jobs());
    cfg.validate();
    const std::string detector = o.detector ? *o.detector : kv.get_string("detector").value_or("toy");
    const std::optional<std::string> palette_path =
        o.palette ? std::optional<std::string>(o.palette->string()) : kv.get_string("palette");
    ToyOverrides toy = o.toy;
    read_toy_overrides(kv, toy);

    // Training needs gradients; the bridge only evaluates.
    if (detector != "toy") {
      if (BridgeConfig::from_selector(detector)) {
        throw StageError(kExitDetector, ErrorKind::CapabilityMismatch,
                         "detector '" + detector + "' is eval-only and cannot be used for training");
      }
      fail(ErrorKind::InvalidArgument, "unknown detector '" + detector + "'");
    }

    const DatasetManifest m = load_manifest(o.dataset);
    const auto gts = load_annotations(m.annotations_path());
    std::vector<int> views = o.train_views ? parse_int_list(*o.train_views)
                                           : kv.get_string("train_views") ? parse_int_list(*kv.get_string("train_views"))
                                                                          : std::vector<int>{m.views.front()};
    for (int v : views) {
      if (std::find(m.views.begin(), m.views.end(), v) == m.views.end()) {
        fail(ErrorKind::InvalidArgument, "training view " + std::to_string(v) + " is not in the dataset");
      }
    }
    const PrintableColorSet palette = palette_path ? load_palette(*palette_path) : PrintableColorSet::default_palette();
    const auto samples = load_train_samples(m, gts, views);
    if (samples.empty()) fail(ErrorKind::InvalidArgument, "no annotated persons in the training views");

    ToyDetector det(resolve_toy_spec(m.toy_detector, toy), 1);
    const TrainResult res = train_patch(samples, det, cfg, palette);

    fs::create_directories(o.out);
    write_png(o.out / "patch.png", res.patch);
    {
      std::ofstream meta(o.out / "patch.meta");
      if (!meta) fail(ErrorKind::IoError, "cannot write " + (o.out / "patch.meta").string());
      meta << train_meta(cfg, detector, views, res.history.back());
    }
    write_loss_history(o.out / "loss_history.csv", res.history);
    err << "trained " << cfg.iterations << " iterations; final total loss " << res.history.back().total
        << ", objectness " << res.history.back().l_obj << '\n';
    return static_cast<int>(kExitOk);
  });
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateOptions {
  fs::path dataset;
  fs::path patch;
  fs::path out;
  std::optional<fs::path> config;
  std::optional<int> ref_view;
  std::optional<std::string> views;
  std::optional<std::string> detector;
  std::optional<double> iou;
  std::optional<double> conf;
  std::optional<double> scale;
  std::optional<double> anchor_x;
  std::optional<double> anchor_y;
  std::optional<int> jobs;
  ToyOverrides toy;
  bool write_frames = true;
};

/// Loads the manifest; a listed correspondence file that does not exist is
/// reported as a missing homography for its view pair.
inline DatasetManifest load_manifest_for_eval(const fs::path& dataset) {
  try {
    return load_manifest(dataset);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::MissingFile) throw;
    fs::path file = fs::is_directory(dataset) ? dataset / "manifest.json" : dataset;
    std::ifstream in(file);
    std::stringstream ss;
    ss << in.rdbuf();
    const DatasetManifest loose = parse_manifest(ss.str(), file.parent_path(), file.string(), false);
    for (const auto& c : loose.correspondences) {
      if (!fs::exists(loose.root / c.path)) {
        throw StageError(kExitGeometry, ErrorKind::MissingHomography,
                         "correspondence file for view pair " + std::to_string(c.ref_view) + " -> " +
                             std::to_string(c.dst_view) + " not found: " + (loose.root / c.path).string());
      }
    }
    throw;
  }
}

inline int cmd_evaluate(const EvaluateOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run_guarded(err, [&] {
    KeyValueConfig kv;
    if (o.config) kv = load_config_checked(*o.config, eval_config_keys());
    EvalConfig ec;
    ec.iou_thresh = o.iou ? *o.iou : kv.get<double>("iou").value_or(ec.iou_thresh);
    ec.conf_thresh = o.conf ? *o.conf : kv.get<double>("conf").value_or(ec.conf_thresh);
    ec.patch_scale = o.scale ? *o.scale : kv.get<double>("patch_scale").value_or(ec.patch_scale);
    ec.anchor_x = o.anchor_x ? *o.anchor_x : kv.get<double>("anchor_x").value_or(ec.anchor_x);
    ec.anchor_y = o.anchor_y ? *o.anchor_y : kv.get<double>("anchor_y").value_or(ec.anchor_y);
    ec.jobs = o.jobs ? *o.jobs : kv.get<int>("jobs").value_or(default_jobs());
    ec.validate();
    const std::string detector_sel = o.detector ? *o.detector : kv.get_string("detector").value_or("toy");
    ToyOverrides toy = o.toy;
    read_toy_overrides(kv, toy);

    const DatasetManifest m = load_manifest_for_eval(o.dataset);
    ViewSetConfig vs;
    vs.reference_view = o.ref_view ? *o.ref_view : kv.get<int>("ref_view").value_or(m.views.front());
    if (o.views || kv.has("views")) {
      for (int v : parse_int_list(o.views ? *o.views : *kv.get_string("views"))) {
        if (v != vs.reference_view) vs.destination_views.push_back(v);
      }
    } else {
      for (int v : m.views) {
        if (v != vs.reference_view) vs.destination_views.push_back(v);
      }
    }
    vs.validate(m.views);
    const auto gts = load_annotations(m.annotations_path());
    const ImageBuffer patch = read_png(o.patch);

    ExperimentInputs in;
    in.frames = m.frames;
    in.gts = gts;
    in.ref_view = vs.reference_view;
    in.dst_views = vs.destination_views;
    in.load_frame = [&m](int v, int f) { return read_png(m.image_path(v, f)); };
    in.homographies = in_stage(kExitGeometry, [&] { return homographies_from_manifest(m, vs); });

    auto detector = in_stage(kExitDetector, [&] {
      return make_detector(detector_sel, resolve_toy_spec(m.toy_detector, toy), ec.jobs, o.out / "bridge_scratch");
    });

    const fs::path frames_dir = o.out / "frames";
    PatchedFrameSink sink;
    if (o.write_frames) {
      sink = [&](int v, int f, const ImageBuffer& img) {
        write_png(frames_dir / ("view" + std::to_string(v)) / ("frame" + std::to_string(f) + ".png"), img);
      };
    }
    const ExperimentResult res = run_experiment(in, patch, *detector, ec, sink);

    fs::create_directories(o.out);
    {
      std::ofstream csv(o.out / "report.csv");
      if (!csv) fail(ErrorKind::IoError, "cannot write " + (o.out / "report.csv").string());
      write_report_csv(csv, res.reports);
    }
    std::ostringstream table;
    write_report_table(table, report_rows(res.reports));
    {
      std::ofstream txt(o.out / "report.txt");
      if (!txt) fail(ErrorKind::IoError, "cannot write " + (o.out / "report.txt").string());
      txt << table.str();
    }
    out << table.str();
    return static_cast<int>(kExitOk);
  });
}

// ---------------------------------------------------------------------------
// synth / report
// ---------------------------------------------------------------------------

struct SynthOptions {
  fs::path spec;
  fs::path out;
};

inline int cmd_synth(const SynthOptions& o, std::ostream& err = std::cerr) {
  return run_guarded(err, [&] {
    const SyntheticRigSpec spec = parse_rig_spec(KeyValueConfig::load(o.spec));
    const SyntheticRig rig = generate_synthetic_rig(spec, o.out);
    (void)load_manifest(o.out);  // the written tree must validate
    err << "wrote " << rig.manifest.views.size() << " views x " << rig.manifest.frames.size() << " frames to "
        << o.out.string() << '\n';
    return static_cast<int>(kExitOk);
  });
}

struct ReportOptions {
  fs::path in;
  std::string format = "table";
};

inline int cmd_report(const ReportOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run_guarded(err, [&] {
    std::ifstream in(o.in);
    if (!in) fail(ErrorKind::MissingFile, o.in.string());
    if (o.format == "csv") {
      out << in.rdbuf();
      return static_cast<int>(kExitOk);
    }
    if (o.format != "table") fail(ErrorKind::InvalidArgument, "format must be table or csv");
    write_report_table(out, read_report_csv(in, o.in.string()));
    return static_cast<int>(kExitOk);
  });
}

}  // namespace mvpatch::cli
