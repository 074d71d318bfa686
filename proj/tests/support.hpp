#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "mvpatch/detector.hpp"
#include "mvpatch/evaluation.hpp"
#include "mvpatch/geometry.hpp"
#include "mvpatch/imaging.hpp"
#include "mvpatch/random.hpp"

namespace testsupport {

namespace fs = std::filesystem;
using namespace mvpatch;

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("mvpatch-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline ImageBuffer random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  ImageBuffer img(w, h);
  Rng rng(seed);
  for (double& v : img.values()) v = uniform(rng, lo, hi);
  return img;
}

/// Low-frequency image, suitable for resampling round trips.
inline ImageBuffer smooth_image(int w, int h) {
  ImageBuffer img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.set_pixel(x, y, {0.5 + 0.4 * std::sin(x * 0.11) * std::cos(y * 0.07), 0.5 + 0.3 * std::cos(x * 0.05 + y * 0.04),
                           0.5 + 0.2 * std::sin((x + y) * 0.06)});
    }
  }
  return img;
}

/// Random homography with mild rotation/shear and perspective |p31|,|p32| <= pmax.
inline Homography random_homography(Rng& rng, double pmax = 1e-3) {
  for (;;) {
    const std::array<double, 9> m{1.0 + uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2), uniform(rng, -40, 40),
                                  uniform(rng, -0.2, 0.2), 1.0 + uniform(rng, -0.2, 0.2), uniform(rng, -40, 40),
                                  uniform(rng, -pmax, pmax), uniform(rng, -pmax, pmax), 1.0};
    Homography h(m);
    if (std::abs(h.det()) > 0.1) return h;
  }
}

/// Places a template copy (gray) with its top-left at (x0, y0).
inline void stamp_template(ImageBuffer& img, const ToyDetectorSpec& spec, int x0, int y0) {
  for (int y = 0; y < kToyTemplateSize; ++y) {
    for (int x = 0; x < kToyTemplateSize; ++x) {
      const double t = spec.templ[static_cast<std::size_t>(y * kToyTemplateSize + x)];
      img.set_pixel(x0 + x, y0 + y, {t, t, t});
    }
  }
}

struct FdResult {
  double worst_rel = 0.0;
  std::size_t failures = 0;
  std::size_t checked = 0;
};

/// Central finite differences of f over the coordinates of x, compared
/// with the analytic gradient.  A coordinate passes when the relative error
/// is below tol or the absolute error is below abs_floor.
inline FdResult finite_difference_check(std::vector<double> x, const std::vector<double>& analytic,
                                        const std::function<double(const std::vector<double>&)>& f, double tol,
                                        double abs_floor, double step = 1e-4) {
  FdResult r;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + step;
    const double fp = f(x);
    x[i] = x0 - step;
    const double fm = f(x);
    x[i] = x0;
    const double num = (fp - fm) / (2.0 * step);
    const double err = std::abs(num - analytic[i]);
    const double scale = std::max(std::abs(num), std::abs(analytic[i]));
    const double rel = scale > 0.0 ? err / scale : 0.0;
    ++r.checked;
    if (err > abs_floor) {
      r.worst_rel = std::max(r.worst_rel, rel);
      if (rel >= tol) ++r.failures;
    }
  }
  return r;
}

inline ImageBuffer image_from(const std::vector<double>& v, int w, int h) {
  ImageBuffer img(w, h);
  std::copy(v.begin(), v.end(), img.values().begin());
  return img;
}

inline std::vector<double> to_vec(const ImageBuffer& img) { return {img.values().begin(), img.values().end()}; }

// ---------------------------------------------------------------------------
// Brute-force matching oracle
// ---------------------------------------------------------------------------

/// Enumerates every injective partial assignment of eligible detections to
/// ground truths (IoU >= threshold) and returns the matched person ids of
/// the one that is lexicographically best when detections are read in
/// descending-score order (stable), each contributing (matched, IoU, -person
/// id).  This is the assignment greedy matching must produce.
inline std::set<int> brute_force_match(const std::vector<Detection>& dets, const std::vector<GroundTruthBox>& gts,
                                       double iou_t, double conf_t) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].objectness >= conf_t) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return dets[a].objectness > dets[b].objectness; });

  using Key = std::vector<std::tuple<int, double, int>>;
  Key best_key;
  std::set<int> best_set;
  bool have = false;
  std::vector<int> assign(order.size(), -1);
  std::vector<bool> used(gts.size(), false);

  std::function<void(std::size_t)> rec = [&](std::size_t k) {
    if (k == order.size()) {
      Key key;
      std::set<int> s;
      for (std::size_t i = 0; i < order.size(); ++i) {
        if (assign[i] < 0) {
          key.emplace_back(0, 0.0, 0);
        } else {
          const auto& g = gts[static_cast<std::size_t>(assign[i])];
          key.emplace_back(1, iou(dets[order[i]].bbox, g.bbox), -g.person_id);
          s.insert(g.person_id);
        }
      }
      if (!have || key > best_key) {
        best_key = key;
        best_set = s;
        have = true;
      }
      return;
    }
    assign[k] = -1;
    rec(k + 1);
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || iou(dets[order[k]].bbox, gts[g].bbox) < iou_t) continue;
      used[g] = true;
      assign[k] = static_cast<int>(g);
      rec(k + 1);
      used[g] = false;
      assign[k] = -1;
    }
  };
  rec(0);
  return best_set;
}

/// Largest number of ground truths any one-to-one assignment can match.
inline std::size_t max_cardinality_match(const std::vector<Detection>& dets, const std::vector<GroundTruthBox>& gts,
                                         double iou_t, double conf_t) {
  std::size_t best = 0;
  std::vector<bool> used(gts.size(), false);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t d, std::size_t count) {
    best = std::max(best, count);
    if (d == dets.size()) return;
    rec(d + 1, count);
    if (dets[d].objectness < conf_t) return;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || iou(dets[d].bbox, gts[g].bbox) < iou_t) continue;
      used[g] = true;
      rec(d + 1, count + 1);
      used[g] = false;
    }
  };
  rec(0, 0);
  return best;
}

/// Cross-view recall counted directly from per-(view, frame, person) facts.
inline std::pair<int, int> brute_force_cross_view(const MatchTable& matches, const std::vector<GroundTruthBox>& gts,
                                                  int ref_view, int dst_view) {
  std::set<int> frames, persons;
  for (const auto& g : gts) {
    frames.insert(g.frame_id);
    persons.insert(g.person_id);
  }
  const auto has = [&](int v, int f, int p) {
    return std::any_of(gts.begin(), gts.end(),
                       [&](const auto& g) { return g.view_id == v && g.frame_id == f && g.person_id == p; });
  };
  int num = 0, den = 0;
  for (int f : frames) {
    for (int p : persons) {
      if (!has(ref_view, f, p) || !has(dst_view, f, p)) continue;
      ++den;
      const auto it = matches.find({dst_view, f});
      if (it != matches.end() && it->second.count(p)) ++num;
    }
  }
  return {num, den};
}

/// Random matching fixture on a coarse grid so IoU and score ties occur.
struct MatchFixture {
  std::vector<Detection> dets;
  std::vector<GroundTruthBox> gts;
};

inline MatchFixture random_match_fixture(Rng& rng, int n_dets, int n_gts) {
  MatchFixture fx;
  const auto box = [&] {
    const double x = 2.0 * static_cast<double>(uniform_index(rng, 4));
    const double y = 2.0 * static_cast<double>(uniform_index(rng, 3));
    const double w = 4.0 + 2.0 * static_cast<double>(uniform_index(rng, 2));
    return BBox{x, y, x + w, y + 4.0};
  };
  std::vector<int> ids{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[uniform_index(rng, i)]);
  for (int g = 0; g < n_gts; ++g) fx.gts.push_back({1, 0, ids[static_cast<std::size_t>(g)], box()});
  static constexpr double scores[] = {0.3, 0.55, 0.7, 0.7, 0.9};
  for (int d = 0; d < n_dets; ++d) {
    fx.dets.push_back({box(), scores[uniform_index(rng, 5)], "person"});
  }
  return fx;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Every regular file under root, relative path -> bytes.
inline std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
  }
  return out;
}

}  // namespace testsupport
