#include <gtest/gtest.h>

#include <sys/wait.h>

#include "mvpatch/commands.hpp"
#include "support.hpp"

using namespace mvpatch;
using namespace mvpatch::cli;
using namespace testsupport;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

/// Runs the command-line binary with stdout and stderr captured together.
RunResult run_cli(const std::string& args) {
  TempDir tmp("cli");
  const fs::path log = tmp / "out.txt";
  const std::string cmd = std::string("'") + MVPATCH_CLI_PATH + "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(log)};
}

void write_text(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream(p) << s;
}

/// Small three-view rig shared by the train and evaluate tests.
const fs::path& rig_dir() {
  static TempDir dir("rig");
  static const bool made = [] {
    SyntheticRigSpec s;
    s.n_views = 3;
    s.n_frames = 4;
    s.seed = 5;
    generate_synthetic_rig(s, dir.path());
    return true;
  }();
  (void)made;
  return dir.path();
}

ImageBuffer crop(const ImageBuffer& img, const BBox& b) {
  const int x0 = static_cast<int>(b.xmin), y0 = static_cast<int>(b.ymin);
  ImageBuffer out(static_cast<int>(b.width()), static_cast<int>(b.height()));
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) out.set_pixel(x, y, img.pixel(x0 + x, y0 + y));
  }
  return out;
}

EvaluateOptions eval_opts(const fs::path& patch, const fs::path& out) {
  EvaluateOptions o;
  o.dataset = rig_dir();
  o.patch = patch;
  o.out = out;
  o.scale = 1.0;
  o.jobs = 1;
  o.write_frames = false;
  return o;
}

std::vector<std::string> csv_lines(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

}  // namespace

TEST(EstimateH, TranslationFixture) {
  TempDir dir;
  write_text(dir / "pts.csv", "0,0,5,-2\n10,0,15,-2\n10,10,15,8\n0,10,5,8\n");
  std::ostringstream err;
  ASSERT_EQ(cmd_estimate_h({dir / "pts.csv", dir / "h.txt"}, err), 0) << err.str();
  const Homography h = load_homography(dir / "h.txt");
  EXPECT_NEAR(h(0, 2), 5.0, 1e-9);
  EXPECT_NEAR(h(1, 2), -2.0, 1e-9);
  EXPECT_NEAR(h(0, 0), 1.0, 1e-9);
  EXPECT_NE(err.str().find("over 4 points"), std::string::npos);
}

TEST(EstimateH, ReportsResidualOverAllPoints) {
  TempDir dir;
  Rng rng(2);
  const Homography truth = random_homography(rng);
  std::string text;
  for (int i = 0; i < 18; ++i) {
    const Point2 p{uniform(rng, 0, 200), uniform(rng, 0, 200)};
    const Point2 q = apply_homography(truth, p);
    text += format_double(p.x) + "," + format_double(p.y) + "," + format_double(q.x + uniform(rng, -0.5, 0.5)) + "," +
            format_double(q.y) + "\n";
  }
  write_text(dir / "pts.csv", text);
  const auto r = run_cli("estimate-h --points '" + (dir / "pts.csv").string() + "' --out '" + (dir / "h.txt").string() + "'");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("reprojection error over 18 points: rms"), std::string::npos) << r.out;
}

TEST(EstimateH, ThreePointsIsInputError) {
  TempDir dir;
  write_text(dir / "pts.csv", "0,0,1,1\n1,0,2,1\n0,1,1,2\n");
  const auto r = run_cli("estimate-h --points '" + (dir / "pts.csv").string() + "' --out '" + (dir / "h.txt").string() + "'");
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_FALSE(fs::exists(dir / "h.txt"));
}

TEST(WarpApplyProject, ChainThroughFiles) {
  TempDir dir;
  write_png(dir / "ref.png", random_image(40, 30, 1));
  write_png(dir / "dst.png", random_image(40, 30, 2));
  write_png(dir / "patch.png", random_image(6, 6, 3));
  save_homography(dir / "h.txt", Homography::translation(4, 2));
  std::ostringstream err;
  ASSERT_EQ(cmd_warp({dir / "ref.png", dir / "h.txt", dir / "w.png", dir / "m.png", 0, 0, 1}, err), 0) << err.str();
  EXPECT_EQ(read_png(dir / "w.png").width(), 40);
  ApplyPatchOptions ap;
  ap.frame = dir / "ref.png";
  ap.patch = dir / "patch.png";
  ap.bboxes = {"5,5,25,25"};
  ap.out = dir / "patched.png";
  ap.quads_out = dir / "quads.txt";
  ASSERT_EQ(cmd_apply_patch(ap, err), 0) << err.str();
  ASSERT_EQ(load_quads(dir / "quads.txt").size(), 1u);
  ASSERT_EQ(cmd_project({dir / "dst.png", dir / "patched.png", dir / "quads.txt", dir / "h.txt", dir / "proj.png"}, err), 0)
      << err.str();
  const ImageBuffer patched = read_png(dir / "patched.png");
  const ImageBuffer proj = read_png(dir / "proj.png");
  // Quad covers [10,20)^2 in the reference; shifted by (4,2) in the destination.
  EXPECT_EQ(proj.pixel(14 + 3, 12 + 3), patched.pixel(10 + 3, 10 + 3));
  save_homography(dir / "bad.txt", Homography({1, 0, 0, 0, 1, 0, -0.07, 0, 1}));
  std::ostringstream err2;
  EXPECT_EQ(cmd_project({dir / "dst.png", dir / "patched.png", dir / "quads.txt", dir / "bad.txt", dir / "p2.png"}, err2), 4);
}

TEST(TrainPatch, WritesArtifacts) {
  TempDir out;
  TrainOptions o;
  o.dataset = rig_dir();
  o.config = fs::path(MVPATCH_DATA_DIR) / "train.cfg";
  o.out = out.path();
  o.iterations = 12;
  o.patch_w = o.patch_h = 16;
  std::ostringstream err;
  ASSERT_EQ(cmd_train_patch(o, err), 0) << err.str();
  const ImageBuffer patch = read_png(out / "patch.png");
  EXPECT_EQ(patch.width(), 16);
  const auto lines = csv_lines(out / "loss_history.csv");
  ASSERT_EQ(lines.size(), 13u);
  EXPECT_EQ(lines[0], "iteration,l_nps,l_tv,l_tv_effective,l_obj,total");
  EXPECT_EQ(lines[1].rfind("0,", 0), 0u);
  EXPECT_EQ(lines[12].rfind("11,", 0), 0u);
  const std::string meta = read_file(out / "patch.meta");
  EXPECT_NE(meta.find("seed = 0"), std::string::npos) << meta;
  EXPECT_NE(meta.find("iterations = 12"), std::string::npos) << meta;
}

TEST(TrainPatch, SameSeedSameFiles) {
  TempDir a, b;
  TrainOptions o;
  o.dataset = rig_dir();
  o.iterations = 8;
  o.patch_w = o.patch_h = 12;
  o.seed = 3;
  o.out = a.path();
  o.jobs = 1;
  std::ostringstream err;
  ASSERT_EQ(cmd_train_patch(o, err), 0) << err.str();
  o.out = b.path();
  o.jobs = 3;
  ASSERT_EQ(cmd_train_patch(o, err), 0) << err.str();
  EXPECT_EQ(snapshot_tree(a.path()), snapshot_tree(b.path()));
}

TEST(TrainPatch, BridgeDetectorIsRejected) {
  TempDir out;
  const auto r = run_cli("train-patch --dataset '" + rig_dir().string() + "' --out '" + out.path().string() +
                         "' --iterations 2 --detector 'bridge:" + STUB_BRIDGE_PATH + "'");
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_NE(r.out.find("eval-only"), std::string::npos) << r.out;
}

TEST(TrainPatch, BadConfigIsInputError) {
  TempDir dir;
  write_text(dir / "bad.cfg", "learning_rate = 0.1\n");
  TrainOptions o;
  o.dataset = rig_dir();
  o.config = dir / "bad.cfg";
  o.out = dir / "out";
  std::ostringstream err;
  EXPECT_EQ(cmd_train_patch(o, err), 2);
  EXPECT_NE(err.str().find("learning_rate"), std::string::npos) << err.str();
}

TEST(Evaluate, OccludingPatchGivesMinusHundred) {
  TempDir dir;
  write_png(dir / "gray.png", ImageBuffer(16, 16, {0.5, 0.5, 0.5}));
  std::ostringstream out, err;
  ASSERT_EQ(cmd_evaluate(eval_opts(dir / "gray.png", dir / "eval"), out, err), 0) << err.str();
  const auto lines = csv_lines(dir / "eval/report.csv");
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[1], "1,100.00,0.00,-100.00");
  EXPECT_EQ(lines[2], "2,100.00,0.00,-100.00");
  EXPECT_EQ(lines[3], "3,100.00,0.00,-100.00");
  EXPECT_NE(out.str().find("-100.00%"), std::string::npos);
  EXPECT_EQ(read_file(dir / "eval/report.txt"), out.str());
}

TEST(Evaluate, TemplatePatchChangesNothing) {
  TempDir dir;
  const auto m = load_manifest(rig_dir());
  const auto gts = load_annotations(m.annotations_path());
  const auto g = std::find_if(gts.begin(), gts.end(), [](const auto& x) { return x.view_id == 1; });
  write_png(dir / "same.png", crop(read_png(m.image_path(1, g->frame_id)), g->bbox));
  EvaluateOptions o = eval_opts(dir / "same.png", dir / "eval");
  o.write_frames = true;
  o.ref_view = 1;
  o.views = "1,2";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_evaluate(o, out, err), 0) << err.str();
  const auto lines = csv_lines(dir / "eval/report.csv");
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[1], "1,100.00,100.00,0.00");
  EXPECT_EQ(lines[2], "2,100.00,100.00,0.00");
  EXPECT_EQ(read_png(dir / "eval/frames/view1/frame0.png"), read_png(m.image_path(1, 0)));
}

TEST(Evaluate, MissingCorrespondenceFileIsGeometryError) {
  TempDir dir;
  fs::copy(rig_dir(), dir / "rig", fs::copy_options::recursive);
  fs::remove(dir / "rig/correspondences/ref1_view3.csv");
  write_png(dir / "p.png", ImageBuffer(8, 8));
  const auto r = run_cli("evaluate --dataset '" + (dir / "rig").string() + "' --patch '" + (dir / "p.png").string() +
                         "' --out '" + (dir / "eval").string() + "'");
  EXPECT_EQ(r.code, 4) << r.out;
  EXPECT_NE(r.out.find("1 -> 3"), std::string::npos) << r.out;
}

TEST(Evaluate, ThroughStubBridge) {
  TempDir dir;
  write_png(dir / "p.png", ImageBuffer(8, 8));
  EvaluateOptions o = eval_opts(dir / "p.png", dir / "eval");
  o.detector = std::string("bridge:'") + STUB_BRIDGE_PATH + "' --log '" + (dir / "log.txt").string() + "'";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_evaluate(o, out, err), 0) << err.str();
  // Nothing detected: clean recall 0 and no defined difference.
  const auto lines = csv_lines(dir / "eval/report.csv");
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[1], "1,0.00,0.00,n/a");
  const auto requests = csv_lines(dir / "log.txt");
  ASSERT_EQ(requests.size(), 4u);  // one batch per frame
  const auto req = nlohmann::json::parse(requests[0]);
  EXPECT_EQ(req["op"], "detect");
  EXPECT_EQ(req["images"].size(), 6u);
}

TEST(Evaluate, MalformedBridgeReplyIsDetectorError) {
  TempDir dir;
  write_png(dir / "p.png", ImageBuffer(8, 8));
  write_text(dir / "replies.txt", "this is not json\n");
  EvaluateOptions o = eval_opts(dir / "p.png", dir / "eval");
  o.detector = std::string("bridge:'") + STUB_BRIDGE_PATH + "' --raw --replies '" + (dir / "replies.txt").string() + "'";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_evaluate(o, out, err), 3) << err.str();
}

TEST(Synth, SampleSpecValidatesAndIsReproducible) {
  TempDir a, b;
  const fs::path spec = fs::path(MVPATCH_DATA_DIR) / "sample_rig.txt";
  std::ostringstream err;
  ASSERT_EQ(cmd_synth({spec, a.path()}, err), 0) << err.str();
  ASSERT_EQ(cmd_synth({spec, b.path()}, err), 0) << err.str();
  EXPECT_EQ(snapshot_tree(a.path()), snapshot_tree(b.path()));
  EXPECT_EQ(load_manifest(a.path()).frames.size(), 20u);
}

TEST(Synth, NonInvertibleHomographyIsInputError) {
  TempDir dir;
  write_text(dir / "spec.txt", "views = 2\nframes = 1\nh.2 = 1 2 3 2 4 6 0 0 0\n");
  const auto r = run_cli("synth --spec '" + (dir / "spec.txt").string() + "' --out '" + (dir / "rig").string() + "'");
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("not invertible"), std::string::npos) << r.out;
}

TEST(Report, TableAndCsv) {
  TempDir dir;
  write_text(dir / "r.csv", "view,clean_recall,patched_recall,difference_pct\n1,17.35,1.04,-94.01\n2,0.00,0.00,n/a\n");
  std::ostringstream table, csv, err;
  ASSERT_EQ(cmd_report({dir / "r.csv", "table"}, table, err), 0);
  EXPECT_NE(table.str().find("1 (ref)"), std::string::npos);
  EXPECT_NE(table.str().find("-94.01%"), std::string::npos);
  ASSERT_EQ(cmd_report({dir / "r.csv", "csv"}, csv, err), 0);
  EXPECT_EQ(csv.str(), read_file(dir / "r.csv"));
  EXPECT_EQ(cmd_report({dir / "missing.csv", "table"}, csv, err), 2);
}

TEST(Binary, HelpListsDefaults) {
  const auto top = run_cli("--help");
  EXPECT_EQ(top.code, 0);
  for (const char* sub : {"estimate-h", "warp", "train-patch", "apply-patch", "project", "evaluate", "synth", "report"}) {
    EXPECT_NE(top.out.find(sub), std::string::npos) << sub;
  }
  const auto train = run_cli("train-patch --help");
  EXPECT_EQ(train.code, 0);
  EXPECT_NE(train.out.find("0.03"), std::string::npos) << train.out;
  EXPECT_NE(train.out.find("2.5"), std::string::npos) << train.out;
  const auto eval = run_cli("evaluate --help");
  EXPECT_NE(eval.out.find("0.5"), std::string::npos) << eval.out;
}

TEST(Binary, UnknownFlagIsInputError) {
  EXPECT_EQ(run_cli("warp --frobnicate").code, 2);
  EXPECT_EQ(run_cli("no-such-command").code, 2);
}
