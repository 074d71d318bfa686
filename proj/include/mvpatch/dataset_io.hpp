// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mvpatch/config.hpp"
#include "mvpatch/detector.hpp"
#include "mvpatch/error.hpp"
#include "mvpatch/evaluation.hpp"
#include "mvpatch/geometry.hpp"
#include "mvpatch/imaging.hpp"
#include "mvpatch/png_io.hpp"
#include "mvpatch/random.hpp"

namespace mvpatch {

namespace fs = std::filesystem;

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Annotations: view_id,frame_id,person_id,xmin,ymin,xmax,ymax
// ---------------------------------------------------------------------------

namespace detail {

/// Splits a comma-separated data line; returns nullopt for blank and '#' lines.
inline std::optional<std::vector<std::string>> csv_fields(const std::string& raw) {
  const std::string t = trim(raw);
  if (t.empty() || t[0] == '#') return std::nullopt;
  auto f = split(t, ',');
  for (auto& s : f) s = trim(s);
  return f;
}

inline std::string where(const std::string& name, int lineno) { return name + ":" + std::to_string(lineno); }

}  // namespace detail

inline std::vector<GroundTruthBox> parse_annotations(std::istream& in, const std::string& name) {
  std::vector<GroundTruthBox> out;
  std::set<std::tuple<int, int, int>> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto f = detail::csv_fields(line);
    if (!f) continue;
    if (f->size() != 7) {
      fail(ErrorKind::ParseError, detail::where(name, lineno) + ": expected 7 fields, got " + std::to_string(f->size()));
    }
    GroundTruthBox g;
    const auto vi = parse_number<int>((*f)[0]);
    const auto fi = parse_number<int>((*f)[1]);
    const auto pi = parse_number<int>((*f)[2]);
    if (!vi || !fi || !pi) fail(ErrorKind::ParseError, detail::where(name, lineno) + ": ids must be integers");
    double c[4];
    for (int k = 0; k < 4; ++k) {
      const auto v = parse_number<double>((*f)[static_cast<std::size_t>(3 + k)]);
      if (!v) fail(ErrorKind::ParseError, detail::where(name, lineno) + ": coordinate field " + std::to_string(4 + k) + " is not a number");
      c[k] = *v;
    }
    g.view_id = *vi;
    g.frame_id = *fi;
    g.person_id = *pi;
    g.bbox = {c[0], c[1], c[2], c[3]};
    if (!g.bbox.valid()) fail(ErrorKind::InvalidBox, detail::where(name, lineno) + ": box needs xmin < xmax and ymin < ymax");
    if (!seen.emplace(g.view_id, g.frame_id, g.person_id).second) {
      fail(ErrorKind::ParseError, detail::where(name, lineno) + ": duplicate (view, frame, person)");
    }
    out.push_back(g);
  }
  return out;
}

inline std::vector<GroundTruthBox> load_annotations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, path.string());
  return parse_annotations(in, path.string());
}

inline void write_annotations(std::ostream& os, const std::vector<GroundTruthBox>& gts) {
  os << "# view_id,frame_id,person_id,xmin,ymin,xmax,ymax\n";
  for (const auto& g : gts) {
    os << g.view_id << ',' << g.frame_id << ',' << g.person_id << ',' << format_double(g.bbox.xmin) << ','
       << format_double(g.bbox.ymin) << ',' << format_double(g.bbox.xmax) << ',' << format_double(g.bbox.ymax) << '\n';
  }
}

inline void save_annotations(const fs::path& path, const std::vector<GroundTruthBox>& gts) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) fail(ErrorKind::IoError, "cannot write " + path.string());
  write_annotations(os, gts);
}

// ---------------------------------------------------------------------------
// Correspondences: x_ref,y_ref,x_dst,y_dst
// ---------------------------------------------------------------------------

inline std::vector<Correspondence> parse_correspondences(std::istream& in, const std::string& name) {
  std::vector<Correspondence> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto f = detail::csv_fields(line);
    if (!f) continue;
    if (f->size() != 4) {
      fail(ErrorKind::ParseError, detail::where(name, lineno) + ": expected 4 fields, got " + std::to_string(f->size()));
    }
    double c[4];
    for (int k = 0; k < 4; ++k) {
      const auto v = parse_number<double>((*f)[static_cast<std::size_t>(k)]);
      if (!v || !std::isfinite(*v)) {
        fail(ErrorKind::ParseError, detail::where(name, lineno) + ": field " + std::to_string(k + 1) + " is not a finite number");
      }
      c[k] = *v;
    }
    out.push_back({{c[0], c[1]}, {c[2], c[3]}});
  }
  if (out.size() < 4) {
    fail(ErrorKind::TooFewPoints, name + ": need at least 4 correspondences, got " + std::to_string(out.size()));
  }
  return out;
}

inline std::vector<Correspondence> load_correspondences(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, path.string());
  return parse_correspondences(in, path.string());
}

inline void save_correspondences(const fs::path& path, const std::vector<Correspondence>& cs) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) fail(ErrorKind::IoError, "cannot write " + path.string());
  os << "# x_ref,y_ref,x_dst,y_dst\n";
  for (const auto& c : cs) {
    os << format_double(c.ref.x) << ',' << format_double(c.ref.y) << ',' << format_double(c.dst.x) << ','
       << format_double(c.dst.y) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Homography text: 9 floats, row-major, whitespace separated
// ---------------------------------------------------------------------------

inline void save_homography(const fs::path& path, const Homography& h) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) fail(ErrorKind::IoError, "cannot write " + path.string());
  for (int r = 0; r < 3; ++r) {
    os << format_double(h(r, 0)) << ' ' << format_double(h(r, 1)) << ' ' << format_double(h(r, 2)) << '\n';
  }
}

inline Homography load_homography(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, path.string());
  std::array<double, 9> m{};
  std::string tok;
  std::size_t n = 0;
  while (in >> tok) {
    if (tok[0] == '#') {
      std::getline(in, tok);
      continue;
    }
    const auto v = parse_number<double>(tok);
    if (!v || n >= 9) fail(ErrorKind::ParseError, path.string() + ": expected exactly 9 numbers");
    m[n++] = *v;
  }
  if (n != 9) fail(ErrorKind::ParseError, path.string() + ": expected exactly 9 numbers, got " + std::to_string(n));
  return Homography(m);
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct ViewSetConfig {
  int reference_view = 1;
  std::vector<int> destination_views;

  void validate(const std::vector<int>& dataset_views) const {
    const auto known = [&](int v) { return std::find(dataset_views.begin(), dataset_views.end(), v) != dataset_views.end(); };
    if (!known(reference_view)) fail(ErrorKind::InvalidArgument, "reference view " + std::to_string(reference_view) + " is not in the dataset");
    std::set<int> seen;
    for (int v : destination_views) {
      if (v == reference_view) fail(ErrorKind::InvalidArgument, "reference view is also listed as a destination");
      if (!known(v)) fail(ErrorKind::InvalidArgument, "view " + std::to_string(v) + " is not in the dataset");
      if (!seen.insert(v).second) fail(ErrorKind::InvalidArgument, "view " + std::to_string(v) + " listed twice");
    }
  }
};

struct CorrespondenceRef {
  int ref_view = 0;
  int dst_view = 0;
  std::optional<int> frame;  // per-frame correspondences when set
  fs::path path;             // relative to the manifest root
};

struct ToyDetectorHints {
  std::uint64_t template_seed = 7;
  double k = 10.0;
  double b = 0.6;
  int stride = 8;
};

struct DatasetManifest {
  fs::path root;
  std::vector<int> views;
  std::vector<int> frames;
  std::string frame_pattern = "view{V}/frame{F}.png";
  std::map<std::pair<int, int>, fs::path> explicit_images;  // overrides the pattern
  fs::path annotations = "annotations.csv";
  std::vector<CorrespondenceRef> correspondences;
  std::optional<ToyDetectorHints> toy_detector;

  /// Relative image path for (view, frame).
  fs::path image_relpath(int view, int frame) const {
    if (const auto it = explicit_images.find({view, frame}); it != explicit_images.end()) return it->second;
    std::string p = frame_pattern;
    const auto replace_all = [&p](const std::string& key, const std::string& val) {
      for (auto pos = p.find(key); pos != std::string::npos; pos = p.find(key, pos + val.size())) p.replace(pos, key.size(), val);
    };
    replace_all("{V}", std::to_string(view));
    replace_all("{F}", std::to_string(frame));
    return p;
  }
  fs::path image_path(int view, int frame) const { return root / image_relpath(view, frame); }
  fs::path annotations_path() const { return root / annotations; }
};

namespace detail {

template <typename T>
T json_get(const nlohmann::json& j, const char* field, const std::string& name) {
  if (!j.contains(field)) fail(ErrorKind::ParseError, name + ": missing field \"" + field + "\"");
  try {
    return j.at(field).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::ParseError, name + ": field \"" + field + "\" has the wrong type");
  }
}

}  // namespace detail

/// Parses and validates a manifest.  Relative paths resolve against `root`.
inline DatasetManifest parse_manifest(const std::string& text, const fs::path& root, const std::string& name,
                                      bool check_files = true) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::ParseError, name + ": " + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::ParseError, name + ": manifest must be a JSON object");
  DatasetManifest m;
  m.root = root;
  m.views = detail::json_get<std::vector<int>>(j, "views", name);
  m.frames = detail::json_get<std::vector<int>>(j, "frames", name);
  if (m.views.empty()) fail(ErrorKind::ParseError, name + ": \"views\" is empty");
  if (m.frames.empty()) fail(ErrorKind::ParseError, name + ": \"frames\" is empty");
  if (j.contains("frame_pattern")) m.frame_pattern = detail::json_get<std::string>(j, "frame_pattern", name);
  if (j.contains("annotations")) m.annotations = detail::json_get<std::string>(j, "annotations", name);

  const auto dup_check = [&](const std::vector<int>& ids, const char* what) {
    std::set<int> s;
    for (int v : ids) {
      if (!s.insert(v).second) fail(ErrorKind::DuplicateFrame, name + ": " + what + " " + std::to_string(v) + " listed twice");
    }
  };
  dup_check(m.views, "view");
  dup_check(m.frames, "frame");
  const std::set<int> view_set(m.views.begin(), m.views.end());
  const std::set<int> frame_set(m.frames.begin(), m.frames.end());

  if (j.contains("images")) {
    const auto& imgs = j.at("images");
    if (!imgs.is_array()) fail(ErrorKind::ParseError, name + ": \"images\" must be an array");
    for (std::size_t i = 0; i < imgs.size(); ++i) {
      const std::string where = name + ": images[" + std::to_string(i) + "]";
      const int v = detail::json_get<int>(imgs[i], "view", where);
      const int f = detail::json_get<int>(imgs[i], "frame", where);
      const auto p = detail::json_get<std::string>(imgs[i], "path", where);
      if (!m.explicit_images.emplace(std::make_pair(v, f), p).second) {
        fail(ErrorKind::DuplicateFrame, where + ": (view " + std::to_string(v) + ", frame " + std::to_string(f) +
                                            ") already has an image");
      }
    }
  }

  if (j.contains("correspondences")) {
    const auto& cs = j.at("correspondences");
    if (!cs.is_array()) fail(ErrorKind::ParseError, name + ": \"correspondences\" must be an array");
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const std::string where = name + ": correspondences[" + std::to_string(i) + "]";
      CorrespondenceRef c;
      c.ref_view = detail::json_get<int>(cs[i], "ref", where);
      c.dst_view = detail::json_get<int>(cs[i], "dst", where);
      if (cs[i].contains("frame")) c.frame = detail::json_get<int>(cs[i], "frame", where);
      c.path = detail::json_get<std::string>(cs[i], "path", where);
      if (!view_set.contains(c.ref_view) || !view_set.contains(c.dst_view)) {
        fail(ErrorKind::ParseError, where + ": unknown view id");
      }
      m.correspondences.push_back(std::move(c));
    }
  }

  if (j.contains("toy_detector")) {
    const auto& t = j.at("toy_detector");
    const std::string where = name + ": toy_detector";
    ToyDetectorHints h;
    if (t.contains("template_seed")) h.template_seed = detail::json_get<std::uint64_t>(t, "template_seed", where);
    if (t.contains("k")) h.k = detail::json_get<double>(t, "k", where);
    if (t.contains("b")) h.b = detail::json_get<double>(t, "b", where);
    if (t.contains("stride")) h.stride = detail::json_get<int>(t, "stride", where);
    m.toy_detector = h;
  }

  if (check_files) {
    for (const auto& [key, _] : m.explicit_images) {
      if (!view_set.contains(key.first) || !frame_set.contains(key.second)) {
        fail(ErrorKind::ParseError, name + ": image entry for unknown (view " + std::to_string(key.first) + ", frame " +
                                        std::to_string(key.second) + ")");
      }
    }
    for (int v : m.views) {
      for (int f : m.frames) {
        const fs::path p = m.image_path(v, f);
        if (!fs::exists(p)) fail(ErrorKind::MissingFile, p.string());
      }
    }
    if (!fs::exists(m.annotations_path())) fail(ErrorKind::MissingFile, m.annotations_path().string());
    for (const auto& c : m.correspondences) {
      if (!fs::exists(m.root / c.path)) fail(ErrorKind::MissingFile, (m.root / c.path).string());
    }
  }
  return m;
}

inline DatasetManifest load_manifest(const fs::path& path) {
  fs::path file = path;
  if (fs::is_directory(file)) file /= "manifest.json";
  std::ifstream in(file);
  if (!in) fail(ErrorKind::MissingFile, file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), file.parent_path(), file.string());
}

inline std::string manifest_to_json(const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["views"] = m.views;
  j["frames"] = m.frames;
  j["frame_pattern"] = m.frame_pattern;
  j["annotations"] = m.annotations.generic_string();
  if (!m.explicit_images.empty()) {
    auto& imgs = j["images"] = nlohmann::ordered_json::array();
    for (const auto& [key, p] : m.explicit_images) {
      imgs.push_back({{"view", key.first}, {"frame", key.second}, {"path", p.generic_string()}});
    }
  }
  auto& cs = j["correspondences"] = nlohmann::ordered_json::array();
  for (const auto& c : m.correspondences) {
    nlohmann::ordered_json e{{"ref", c.ref_view}, {"dst", c.dst_view}};
    if (c.frame) e["frame"] = *c.frame;
    e["path"] = c.path.generic_string();
    cs.push_back(std::move(e));
  }
  if (m.toy_detector) {
    j["toy_detector"] = {{"template_seed", m.toy_detector->template_seed},
                         {"k", m.toy_detector->k},
                         {"b", m.toy_detector->b},
                         {"stride", m.toy_detector->stride}};
  }
  return j.dump(2) + "\n";
}

inline void save_manifest(const fs::path& path, const DatasetManifest& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) fail(ErrorKind::IoError, "cannot write " + path.string());
  os << manifest_to_json(m);
}

/// Estimates reference-to-destination homographies for the given view set
/// from the manifest's correspondence files.  Throws MissingHomography
/// naming the view pair when a destination has no correspondences.
inline HomographyTable homographies_from_manifest(const DatasetManifest& m, const ViewSetConfig& vs) {
  HomographyTable table;
  for (int dst : vs.destination_views) {
    bool found = false;
    for (const auto& c : m.correspondences) {
      if (c.ref_view != vs.reference_view || c.dst_view != dst) continue;
      found = true;
      const auto pts = load_correspondences(m.root / c.path);
      Homography h;
      try {
        h = estimate_homography(pts);
      } catch (const Error& e) {
        fail(e.kind(), (m.root / c.path).string() + ": " + e.what());
      }
      if (c.frame) {
        table.set(*c.frame, vs.reference_view, dst, h);
      } else {
        table.set(vs.reference_view, dst, h);
      }
    }
    if (!found) {
      fail(ErrorKind::MissingHomography, "no correspondence file for view pair " + std::to_string(vs.reference_view) +
                                             " -> " + std::to_string(dst));
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Synthetic rig
// ---------------------------------------------------------------------------

/// Desk-scale multi-view dataset: view 1 is the reference; persons are exact
/// copies of the toy detector template on stride-aligned positions over a
/// noisy background; view v > 1 is the warp of view 1 by homographies[v].
struct SyntheticRigSpec {
  int n_views = 2;
  int n_frames = 20;
  int persons_per_frame = 2;
  int width = 128;
  int height = 96;
  double background = 0.1;  // background noise amplitude
  int n_correspondences = 18;
  std::uint64_t seed = 1;
  ToyDetectorHints detector{};
  std::map<int, Homography> homographies;  // keyed by destination view id

  void validate() const {
    if (n_views < 1) fail(ErrorKind::InvalidArgument, "views must be >= 1");
    if (n_frames < 1) fail(ErrorKind::InvalidArgument, "frames must be >= 1");
    if (persons_per_frame < 1) fail(ErrorKind::InvalidArgument, "persons_per_frame must be >= 1");
    if (width < 2 * kToyTemplateSize || height < 2 * kToyTemplateSize) {
      fail(ErrorKind::InvalidArgument, "frame must be at least 32x32");
    }
    if (!(background >= 0.0 && background <= 1.0)) fail(ErrorKind::InvalidArgument, "background must lie in [0, 1]");
    if (n_correspondences < 4) fail(ErrorKind::InvalidArgument, "correspondences must be >= 4");
    if (detector.stride < 1) fail(ErrorKind::InvalidArgument, "stride must be >= 1");
    for (const auto& [v, h] : homographies) {
      if (v < 2 || v > n_views) fail(ErrorKind::InvalidArgument, "homography given for unknown view " + std::to_string(v));
    }
  }

  /// Homography for view v: the configured one, or a mild seeded default
  /// (small rotation/shear and perspective, stride-multiple shift).
  Homography homography_for(int view) const {
    if (const auto it = homographies.find(view); it != homographies.end()) return it->second;
    Rng rng(derive_seed(seed, 100 + static_cast<std::uint64_t>(view)));
    const double a = uniform(rng, -0.02, 0.02), b = uniform(rng, -0.02, 0.02);
    const double c = uniform(rng, -0.02, 0.02), d = uniform(rng, -0.02, 0.02);
    const double e = uniform(rng, -1e-4, 1e-4), f = uniform(rng, -1e-4, 1e-4);
    const double tx = detector.stride * static_cast<double>(static_cast<int>(uniform_index(rng, 3)) - 1);
    return Homography({1 + a, b, tx, c, 1 + d, 0, e, f, 1});
  }
};

/// Spec file: flat key=value.  Keys: views, frames, persons_per_frame,
/// width, height, background, correspondences, seed, template_seed, k, b,
/// stride, and h.<view> = nine row-major numbers.
inline SyntheticRigSpec parse_rig_spec(const KeyValueConfig& kv) {
  static const std::set<std::string> known{"views",  "frames",      "persons_per_frame", "width",
                                           "height", "background",  "correspondences",   "seed",
                                           "template_seed", "k", "b", "stride"};
  SyntheticRigSpec s;
  for (const auto& key : kv.keys()) {
    if (!known.contains(key) && key.rfind("h.", 0) != 0) {
      fail(ErrorKind::ParseError, kv.name() + ":" + std::to_string(kv.line_of(key)) + ": unknown key '" + key + "'");
    }
  }
  if (auto v = kv.get<int>("views")) s.n_views = *v;
  if (auto v = kv.get<int>("frames")) s.n_frames = *v;
  if (auto v = kv.get<int>("persons_per_frame")) s.persons_per_frame = *v;
  if (auto v = kv.get<int>("width")) s.width = *v;
  if (auto v = kv.get<int>("height")) s.height = *v;
  if (auto v = kv.get<double>("background")) s.background = *v;
  if (auto v = kv.get<int>("correspondences")) s.n_correspondences = *v;
  if (auto v = kv.get<std::uint64_t>("seed")) s.seed = *v;
  if (auto v = kv.get<std::uint64_t>("template_seed")) s.detector.template_seed = *v;
  if (auto v = kv.get<double>("k")) s.detector.k = *v;
  if (auto v = kv.get<double>("b")) s.detector.b = *v;
  if (auto v = kv.get<int>("stride")) s.detector.stride = *v;
  for (const auto& key : kv.keys()) {
    if (key.rfind("h.", 0) != 0) continue;
    const auto view = parse_number<int>(key.substr(2));
    const std::string where = kv.name() + ":" + std::to_string(kv.line_of(key));
    if (!view) fail(ErrorKind::ParseError, where + ": bad view id in '" + key + "'");
    const auto m = *kv.get_list<double>(key);
    if (m.size() != 9) fail(ErrorKind::ParseError, where + ": '" + key + "' needs 9 numbers");
    std::array<double, 9> raw{};
    std::copy(m.begin(), m.end(), raw.begin());
    try {
      s.homographies.emplace(*view, Homography(raw));
    } catch (const Error& e) {
      fail(ErrorKind::InvalidArgument, where + ": homography for view " + std::to_string(*view) + " is not invertible");
    }
  }
  s.validate();
  return s;
}

struct SyntheticRig {
  DatasetManifest manifest;
  std::vector<GroundTruthBox> annotations;
  std::map<int, Homography> homographies;
};

/// Renders the rig to `out_dir`: manifest.json, annotations.csv,
/// view{V}/frame{F}.png, correspondences/ref1_view{V}.csv and
/// homographies/ref1_view{V}.txt (the generating transforms).
inline SyntheticRig generate_synthetic_rig(const SyntheticRigSpec& spec, const fs::path& out_dir) {
  spec.validate();
  try {
    fs::create_directories(out_dir);
  } catch (const fs::filesystem_error& e) {
    fail(ErrorKind::IoError, e.what());
  }
  const ToyDetectorSpec det = ToyDetectorSpec::make(spec.detector.template_seed, spec.detector.k, spec.detector.b,
                                                    spec.detector.stride);
  const int ts = kToyTemplateSize;
  const int stride = spec.detector.stride;
  const int nx = (spec.width - ts) / stride + 1;
  const int ny = (spec.height - ts) / stride + 1;

  SyntheticRig rig;
  rig.manifest.root = out_dir;
  for (int v = 1; v <= spec.n_views; ++v) rig.manifest.views.push_back(v);
  for (int f = 0; f < spec.n_frames; ++f) rig.manifest.frames.push_back(f);
  rig.manifest.toy_detector = spec.detector;
  for (int v = 2; v <= spec.n_views; ++v) rig.homographies.emplace(v, spec.homography_for(v));

  Rng rng(derive_seed(spec.seed, 3));
  for (int f = 0; f < spec.n_frames; ++f) {
    ImageBuffer ref(spec.width, spec.height);
    for (double& px : ref.values()) px = spec.background * uniform01(rng);

    // Stride-aligned, pairwise separated by at least one stride.
    std::vector<std::pair<int, int>> cells;
    for (int attempt = 0; attempt < 1000 && static_cast<int>(cells.size()) < spec.persons_per_frame; ++attempt) {
      const int ci = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(nx)));
      const int cj = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(ny)));
      const bool clear = std::all_of(cells.begin(), cells.end(), [&](const auto& o) {
        return std::abs(o.first - ci) * stride >= ts + stride || std::abs(o.second - cj) * stride >= ts + stride;
      });
      if (clear) cells.emplace_back(ci, cj);
    }
    if (static_cast<int>(cells.size()) < spec.persons_per_frame) {
      fail(ErrorKind::InvalidArgument, "frame is too small for " + std::to_string(spec.persons_per_frame) + " persons");
    }

    for (std::size_t p = 0; p < cells.size(); ++p) {
      const int x0 = cells[p].first * stride, y0 = cells[p].second * stride;
      for (int y = 0; y < ts; ++y) {
        for (int x = 0; x < ts; ++x) {
          const double t = det.templ[static_cast<std::size_t>(y * ts + x)];
          ref.set_pixel(x0 + x, y0 + y, {t, t, t});
        }
      }
      rig.annotations.push_back({1, f, static_cast<int>(p),
                                 BBox{static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x0 + ts),
                                      static_cast<double>(y0 + ts)}});
    }
    write_png(out_dir / rig.manifest.image_relpath(1, f), ref);

    for (const auto& [v, h] : rig.homographies) {
      write_png(out_dir / rig.manifest.image_relpath(v, f), warp_image(ref, h, spec.width, spec.height).image);
    }
  }

  // Destination ground truth: axis-aligned hull of the projected box,
  // kept when it lies inside the frame.
  std::vector<GroundTruthBox> dst_boxes;
  for (const auto& [v, h] : rig.homographies) {
    for (const auto& g : rig.annotations) {
      if (g.view_id != 1) continue;
      const Point2 corners[] = {{g.bbox.xmin, g.bbox.ymin}, {g.bbox.xmax, g.bbox.ymin}, {g.bbox.xmax, g.bbox.ymax},
                                {g.bbox.xmin, g.bbox.ymax}};
      BBox hull{1e300, 1e300, -1e300, -1e300};
      for (const auto& c : corners) {
        const Point2 q = apply_homography(h, c);
        hull = {std::min(hull.xmin, q.x), std::min(hull.ymin, q.y), std::max(hull.xmax, q.x), std::max(hull.ymax, q.y)};
      }
      if (hull.xmin >= 0.0 && hull.ymin >= 0.0 && hull.xmax <= spec.width && hull.ymax <= spec.height) {
        dst_boxes.push_back({v, g.frame_id, g.person_id, hull});
      }
    }
  }
  rig.annotations.insert(rig.annotations.end(), dst_boxes.begin(), dst_boxes.end());
  std::stable_sort(rig.annotations.begin(), rig.annotations.end(), [](const auto& a, const auto& b) {
    return std::tie(a.frame_id, a.view_id, a.person_id) < std::tie(b.frame_id, b.view_id, b.person_id);
  });
  save_annotations(out_dir / rig.manifest.annotations, rig.annotations);

  for (const auto& [v, h] : rig.homographies) {
    Rng crng(derive_seed(spec.seed, 200 + static_cast<std::uint64_t>(v)));
    std::vector<Correspondence> cs;
    for (int i = 0; i < spec.n_correspondences; ++i) {
      const Point2 p{uniform(crng, 0.0, spec.width - 1.0), uniform(crng, 0.0, spec.height - 1.0)};
      cs.push_back({p, apply_homography(h, p)});
    }
    const fs::path rel = "correspondences/ref1_view" + std::to_string(v) + ".csv";
    save_correspondences(out_dir / rel, cs);
    save_homography(out_dir / ("homographies/ref1_view" + std::to_string(v) + ".txt"), h);
    rig.manifest.correspondences.push_back({1, v, std::nullopt, rel});
  }
  save_manifest(out_dir / "manifest.json", rig.manifest);
  return rig;
}

}  // namespace mvpatch
