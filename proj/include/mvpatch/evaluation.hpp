// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "mvpatch/detector.hpp"
#include "mvpatch/error.hpp"
#include "mvpatch/geometry.hpp"
#include "mvpatch/imaging.hpp"
#include "mvpatch/parallel.hpp"

namespace mvpatch {

struct GroundTruthBox {
  int view_id = 0;
  int frame_id = 0;
  int person_id = 0;
  BBox bbox;

  friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

inline double iou(const BBox& a, const BBox& b) {
  const double ix = std::max(0.0, std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin));
  const double iy = std::max(0.0, std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Greedy one-to-one matching.  Detections with objectness >= conf_thresh
/// are visited by descending objectness (input order among equal scores);
/// each claims the unmatched ground truth with the highest IoU >= iou_thresh,
/// the lower person id winning IoU ties.  Returns the matched person ids.
inline std::set<int> match_detections(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                                      double iou_thresh, double conf_thresh) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].objectness >= conf_thresh) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].objectness > dets[b].objectness; });
  std::vector<bool> taken(gts.size(), false);
  std::set<int> matched;
  for (std::size_t di : order) {
    std::optional<std::size_t> best;
    double best_iou = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(dets[di].bbox, gts[g].bbox);
      if (v < iou_thresh) continue;
      if (!best || v > best_iou || (v == best_iou && gts[g].person_id < gts[*best].person_id)) {
        best = g;
        best_iou = v;
      }
    }
    if (best) {
      taken[*best] = true;
      matched.insert(gts[*best].person_id);
    }
  }
  return matched;
}

/// Matched person ids keyed by (view, frame).
using MatchTable = std::map<std::pair<int, int>, std::set<int>>;

struct RecallCount {
  int matched = 0;
  int total = 0;

  /// 100 * matched / total; throws EmptyDenominator when total == 0.
  double percent() const {
    if (total == 0) fail(ErrorKind::EmptyDenominator, "no person is visible in both views; recall is undefined");
    return 100.0 * matched / total;
  }
  std::optional<double> percent_or_none() const {
    if (total == 0) return std::nullopt;
    return 100.0 * matched / total;
  }
};

/// Counts persons with ground truth in both ref_view and dst_view of the
/// same frame, and how many of them are matched in dst_view.
inline RecallCount cross_view_counts(const MatchTable& matches, std::span<const GroundTruthBox> gts, int ref_view,
                                     int dst_view) {
  std::set<std::pair<int, int>> in_ref;  // (frame, person)
  for (const auto& g : gts) {
    if (g.view_id == ref_view) in_ref.emplace(g.frame_id, g.person_id);
  }
  std::set<std::pair<int, int>> counted;
  RecallCount rc;
  for (const auto& g : gts) {
    if (g.view_id != dst_view || !in_ref.contains({g.frame_id, g.person_id})) continue;
    if (!counted.emplace(g.frame_id, g.person_id).second) continue;
    ++rc.total;
    const auto it = matches.find({dst_view, g.frame_id});
    if (it != matches.end() && it->second.contains(g.person_id)) ++rc.matched;
  }
  return rc;
}

inline double cross_view_recall(const MatchTable& matches, std::span<const GroundTruthBox> gts, int ref_view,
                                int dst_view) {
  return cross_view_counts(matches, gts, ref_view, dst_view).percent();
}

/// Rounds half-up (toward +inf) to two decimals.
inline double round_half_up_2(double v) { return std::floor(v * 100.0 + 0.5 + 1e-9) / 100.0; }

/// Relative change in percent, (patched - clean) / clean * 100, without rounding.
inline double relative_change_pct(double clean, double patched) {
  if (!(clean > 0.0)) fail(ErrorKind::UndefinedForZeroClean, "difference is undefined when clean recall is 0");
  return (patched - clean) / clean * 100.0;
}

/// The reported "Difference (%)": relative change rounded half-up to 2 decimals.
inline double difference_pct(double clean, double patched) {
  return round_half_up_2(relative_change_pct(clean, patched));
}

struct RecallReport {
  int view_id = 0;
  bool is_reference = false;
  RecallCount clean_count;
  RecallCount patched_count;
  std::optional<double> clean_recall;    // percent
  std::optional<double> patched_recall;  // percent
  std::optional<double> difference;      // percent, unrounded
};

inline RecallReport make_report(int view_id, bool is_reference, RecallCount clean, RecallCount patched) {
  RecallReport r;
  r.view_id = view_id;
  r.is_reference = is_reference;
  r.clean_count = clean;
  r.patched_count = patched;
  r.clean_recall = clean.percent_or_none();
  r.patched_recall = patched.percent_or_none();
  if (r.clean_recall && r.patched_recall && *r.clean_recall > 0.0) {
    r.difference = relative_change_pct(*r.clean_recall, *r.patched_recall);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Experiment
// ---------------------------------------------------------------------------

/// Reference-to-destination homographies, either one per view pair (static
/// cameras) or per (frame, view pair).  Per-frame entries take precedence.
class HomographyTable {
 public:
  void set(int ref_view, int dst_view, const Homography& h) { static_[{ref_view, dst_view}] = h; }
  void set(int frame, int ref_view, int dst_view, const Homography& h) { per_frame_[{frame, ref_view, dst_view}] = h; }

  bool has_pair(int ref_view, int dst_view) const {
    if (static_.contains({ref_view, dst_view})) return true;
    return std::any_of(per_frame_.begin(), per_frame_.end(), [&](const auto& kv) {
      return std::get<1>(kv.first) == ref_view && std::get<2>(kv.first) == dst_view;
    });
  }

  const Homography& lookup(int frame, int ref_view, int dst_view) const {
    if (const auto it = per_frame_.find({frame, ref_view, dst_view}); it != per_frame_.end()) return it->second;
    if (const auto it = static_.find({ref_view, dst_view}); it != static_.end()) return it->second;
    fail(ErrorKind::MissingHomography, "no homography for frame " + std::to_string(frame) + ", view " +
                                           std::to_string(ref_view) + " -> view " + std::to_string(dst_view));
  }

 private:
  std::map<std::pair<int, int>, Homography> static_;
  std::map<std::tuple<int, int, int>, Homography> per_frame_;
};

struct EvalConfig {
  double iou_thresh = 0.5;
  double conf_thresh = 0.5;
  double patch_scale = 0.5;
  double anchor_x = 0.5;
  double anchor_y = 0.5;
  int jobs = 1;

  void validate() const {
    if (!(iou_thresh > 0.0 && iou_thresh < 1.0)) fail(ErrorKind::InvalidArgument, "IoU threshold must lie in (0, 1)");
    if (!(conf_thresh > 0.0 && conf_thresh < 1.0)) {
      fail(ErrorKind::InvalidArgument, "confidence threshold must lie in (0, 1)");
    }
  }
};

struct ExperimentInputs {
  std::vector<int> frames;
  std::function<ImageBuffer(int view, int frame)> load_frame;
  std::vector<GroundTruthBox> gts;
  int ref_view = 0;
  std::vector<int> dst_views;
  HomographyTable homographies;
};

/// Receives every patched frame (reference and destination views).
using PatchedFrameSink = std::function<void(int view, int frame, const ImageBuffer&)>;

struct ExperimentResult {
  std::vector<RecallReport> reports;  // reference view first
  MatchTable clean_matches;
  MatchTable patched_matches;
};

/// Builds the patched variant of one frame in every view: the patch is
/// composited on each reference-view person and projected into the
/// destination views.  Index 0 is the reference view.
inline std::vector<ImageBuffer> patch_frame_views(const ExperimentInputs& in, int frame, const ImageBuffer& patch,
                                                  const std::vector<ImageBuffer>& clean, const EvalConfig& cfg) {
  std::vector<ImageBuffer> patched;
  patched.reserve(clean.size());
  ImageBuffer ref = clean.front();
  std::vector<Quad> quads;
  for (const auto& g : in.gts) {
    if (g.view_id != in.ref_view || g.frame_id != frame) continue;
    try {
      quads.push_back(place_patch_into(ref, patch, {g.bbox, cfg.patch_scale, cfg.anchor_x, cfg.anchor_y}));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EmptyIntersection) throw;
    }
  }
  patched.push_back(ref);
  for (std::size_t v = 0; v < in.dst_views.size(); ++v) {
    const Homography& h = in.homographies.lookup(frame, in.ref_view, in.dst_views[v]);
    ImageBuffer dst = clean[v + 1];
    for (const auto& q : quads) dst = project_patch(dst, ref, q, h);
    patched.push_back(std::move(dst));
  }
  return patched;
}

/// For every frame: patch the reference view, project into each destination
/// view, detect on clean and patched images, and match against ground
/// truth.  Recall per view counts persons co-visible with the reference
/// view, summed over frames.
inline ExperimentResult run_experiment(const ExperimentInputs& in, const ImageBuffer& patch, Detector& detector,
                                       const EvalConfig& cfg, const PatchedFrameSink& sink = {}) {
  cfg.validate();
  if (!detector.capabilities().eval) fail(ErrorKind::CapabilityMismatch, detector.name() + " detector cannot evaluate");
  for (int v : in.dst_views) {
    if (v == in.ref_view) fail(ErrorKind::InvalidArgument, "reference view listed among destination views");
  }
  std::vector<int> views{in.ref_view};
  views.insert(views.end(), in.dst_views.begin(), in.dst_views.end());
  // Fail early, naming the frame, before any expensive work.
  for (int f : in.frames) {
    for (int v : in.dst_views) (void)in.homographies.lookup(f, in.ref_view, v);
  }

  ExperimentResult result;
  for (int f : in.frames) {
    std::vector<ImageBuffer> clean(views.size());
    parallel_for(views.size(), cfg.jobs, [&](std::size_t i) { clean[i] = in.load_frame(views[i], f); });
    const std::vector<ImageBuffer> patched = patch_frame_views(in, f, patch, clean, cfg);
    if (sink) {
      for (std::size_t i = 0; i < views.size(); ++i) sink(views[i], f, patched[i]);
    }

    std::vector<const ImageBuffer*> batch;
    for (const auto& img : clean) batch.push_back(&img);
    for (const auto& img : patched) batch.push_back(&img);
    const auto dets = detector.detect_batch(batch);

    for (std::size_t i = 0; i < views.size(); ++i) {
      std::vector<GroundTruthBox> frame_gts;
      for (const auto& g : in.gts) {
        if (g.view_id == views[i] && g.frame_id == f) frame_gts.push_back(g);
      }
      result.clean_matches[{views[i], f}] = match_detections(dets[i], frame_gts, cfg.iou_thresh, cfg.conf_thresh);
      result.patched_matches[{views[i], f}] =
          match_detections(dets[views.size() + i], frame_gts, cfg.iou_thresh, cfg.conf_thresh);
    }
  }

  // Only frames that were evaluated contribute to the denominators.
  std::vector<GroundTruthBox> gts;
  const std::set<int> frame_set(in.frames.begin(), in.frames.end());
  std::copy_if(in.gts.begin(), in.gts.end(), std::back_inserter(gts),
               [&](const GroundTruthBox& g) { return frame_set.contains(g.frame_id); });
  for (std::size_t i = 0; i < views.size(); ++i) {
    result.reports.push_back(make_report(views[i], i == 0,
                                         cross_view_counts(result.clean_matches, gts, in.ref_view, views[i]),
                                         cross_view_counts(result.patched_matches, gts, in.ref_view, views[i])));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Report output
// ---------------------------------------------------------------------------

inline std::string format_pct(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", round_half_up_2(*v) + 0.0);
  return buf;
}

inline void write_report_csv(std::ostream& os, const std::vector<RecallReport>& reports) {
  os << "view,clean_recall,patched_recall,difference_pct\n";
  for (const auto& r : reports) {
    os << r.view_id << ',' << format_pct(r.clean_recall) << ',' << format_pct(r.patched_recall) << ','
       << format_pct(r.difference) << '\n';
  }
}

struct ReportRow {
  std::string view;
  std::string clean;
  std::string patched;
  std::string difference;
};

inline std::vector<ReportRow> report_rows(const std::vector<RecallReport>& reports) {
  std::vector<ReportRow> rows;
  for (const auto& r : reports) {
    rows.push_back({std::to_string(r.view_id) + (r.is_reference ? " (ref)" : ""), format_pct(r.clean_recall),
                    format_pct(r.patched_recall), r.difference ? format_pct(r.difference) + "%" : "n/a"});
  }
  return rows;
}

/// Aligned plain-text table: View | Clean Recall | Patched Recall | Difference (%).
inline void write_report_table(std::ostream& os, const std::vector<ReportRow>& rows) {
  const ReportRow header{"View", "Clean Recall", "Patched Recall", "Difference (%)"};
  std::size_t w[4] = {header.view.size(), header.clean.size(), header.patched.size(), header.difference.size()};
  for (const auto& r : rows) {
    w[0] = std::max(w[0], r.view.size());
    w[1] = std::max(w[1], r.clean.size());
    w[2] = std::max(w[2], r.patched.size());
    w[3] = std::max(w[3], r.difference.size());
  }
  const auto line = [&](const ReportRow& r) {
    os << "| " << std::left << std::setw(static_cast<int>(w[0])) << r.view << " | " << std::right
       << std::setw(static_cast<int>(w[1])) << r.clean << " | " << std::setw(static_cast<int>(w[2])) << r.patched
       << " | " << std::setw(static_cast<int>(w[3])) << r.difference << " |\n";
  };
  const auto rule = [&] {
    os << '+';
    for (std::size_t k = 0; k < 4; ++k) os << std::string(w[k] + 2, '-') << '+';
    os << '\n';
  };
  rule();
  line(header);
  rule();
  for (const auto& r : rows) line(r);
  rule();
}

/// Reads a report CSV back into table rows.  The first data row is the
/// reference view.
inline std::vector<ReportRow> read_report_csv(std::istream& in, const std::string& name) {
  std::string line;
  int lineno = 0;
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.rfind("view,", 0) == 0) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 4) fail(ErrorKind::ParseError, name + ":" + std::to_string(lineno) + ": expected 4 fields");
    ReportRow r{f[0], f[1], f[2], f[3] == "n/a" ? f[3] : f[3] + "%"};
    if (rows.empty()) r.view += " (ref)";
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace mvpatch
