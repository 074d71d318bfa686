// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include "mvpatch/commands.hpp"

namespace {

using namespace mvpatch;
using namespace mvpatch::cli;

// Binds a flag to an optional so an unset flag falls back to the config file.
template <typename T>
CLI::Option* opt(CLI::App* app, const std::string& name, std::optional<T>& target, const std::string& help,
                 const std::string& def) {
  return app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help)->default_str(def);
}

void add_toy_flags(CLI::App* app, ToyOverrides& t) {
  opt(app, "--toy-template-seed", t.template_seed, "toy detector template seed", "7 or manifest");
  opt(app, "--toy-k", t.k, "toy detector logistic slope", "10 or manifest");
  opt(app, "--toy-b", t.b, "toy detector logistic offset", "0.6 or manifest");
  opt(app, "--toy-stride", t.stride, "toy detector window stride", "8 or manifest");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view adversarial patch toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mvpatch 1.0.0");
  int code = 0;

  EstimateOptions est;
  auto* c_est = app.add_subcommand("estimate-h", "Estimate a homography from point correspondences");
  c_est->add_option("--points", est.points, "correspondence CSV (x_ref,y_ref,x_dst,y_dst)")->required()->check(CLI::ExistingFile);
  c_est->add_option("--out", est.out, "output homography file")->required();
  c_est->callback([&] { code = cmd_estimate_h(est); });

  WarpOptions warp;
  auto* c_warp = app.add_subcommand("warp", "Warp an image through a homography");
  c_warp->add_option("--in", warp.in, "input PNG")->required();
  c_warp->add_option("--homography", warp.homography, "homography file")->required();
  c_warp->add_option("--out", warp.out, "output PNG")->required();
  c_warp->add_option_function<std::string>("--mask", [&](const std::string& p) { warp.mask_out = p; }, "output validity mask PNG");
  c_warp->add_option("--width", warp.width, "output width, 0 keeps the input width")->capture_default_str();
  c_warp->add_option("--height", warp.height, "output height, 0 keeps the input height")->capture_default_str();
  c_warp->add_option("--jobs", warp.jobs, "worker threads")->capture_default_str();
  c_warp->callback([&] { code = cmd_warp(warp); });

  TrainOptions train;
  auto* c_train = app.add_subcommand("train-patch", "Optimize an adversarial patch on a dataset");
  c_train->add_option("--dataset", train.dataset, "dataset directory or manifest.json")->required();
  c_train->add_option_function<std::string>("--config", [&](const std::string& p) { train.config = p; }, "key=value config file");
  c_train->add_option("--out", train.out, "output directory")->required();
  opt(c_train, "--seed", train.seed, "random seed", "0");
  opt(c_train, "--iterations", train.iterations, "optimizer iterations", "1000");
  opt(c_train, "--minibatch", train.minibatch, "frames per iteration", "4");
  opt(c_train, "--lr", train.lr, "Adam learning rate", "0.03");
  opt(c_train, "--patch-w", train.patch_w, "patch width in pixels", "300");
  opt(c_train, "--patch-h", train.patch_h, "patch height in pixels", "300");
  opt(c_train, "--alpha", train.alpha, "printability weight", "0.01");
  opt(c_train, "--beta", train.beta, "smoothness weight", "2.5");
  opt(c_train, "--gamma", train.gamma, "objectness weight", "1");
  opt(c_train, "--scale", train.scale, "patch width relative to the person box", "0.5");
  opt(c_train, "--anchor-x", train.anchor_x, "patch center, fraction of box width", "0.5");
  opt(c_train, "--anchor-y", train.anchor_y, "patch center, fraction of box height", "0.5");
  opt(c_train, "--train-views", train.train_views, "comma-separated training views", "first view");
  opt(c_train, "--detector", train.detector, "detector: toy (bridge detectors cannot train)", "toy");
  c_train->add_option_function<std::string>("--palette", [&](const std::string& p) { train.palette = p; },
                                            "printable color file")->default_str("built-in 30 colors");
  opt(c_train, "--jobs", train.jobs, "worker threads", "hardware threads");
  add_toy_flags(c_train, train.toy);
  c_train->callback([&] { code = cmd_train_patch(train); });

  ApplyPatchOptions apply;
  auto* c_apply = app.add_subcommand("apply-patch", "Paste a patch onto person boxes of a frame");
  c_apply->add_option("--frame", apply.frame, "input frame PNG")->required();
  c_apply->add_option("--patch", apply.patch, "patch PNG")->required();
  c_apply->add_option("--bbox", apply.bboxes, "person box xmin,ymin,xmax,ymax (repeatable)")->required();
  c_apply->add_option("--scale", apply.scale, "patch width relative to the box")->capture_default_str();
  c_apply->add_option("--anchor-x", apply.anchor_x, "patch center, fraction of box width")->capture_default_str();
  c_apply->add_option("--anchor-y", apply.anchor_y, "patch center, fraction of box height")->capture_default_str();
  c_apply->add_option("--out", apply.out, "output PNG")->required();
  c_apply->add_option_function<std::string>("--quads", [&](const std::string& p) { apply.quads_out = p; },
                                            "write the placed quads to this file");
  c_apply->callback([&] { code = cmd_apply_patch(apply); });

  ProjectOptions proj;
  auto* c_proj = app.add_subcommand("project", "Project patched regions from the reference view into another view");
  c_proj->add_option("--dst", proj.dst, "destination frame PNG")->required();
  c_proj->add_option("--ref", proj.ref, "patched reference frame PNG")->required();
  c_proj->add_option("--quads", proj.quads, "quad file written by apply-patch")->required();
  c_proj->add_option("--homography", proj.homography, "reference-to-destination homography file")->required();
  c_proj->add_option("--out", proj.out, "output PNG")->required();
  c_proj->callback([&] { code = cmd_project(proj); });

  EvaluateOptions ev;
  auto* c_ev = app.add_subcommand("evaluate", "Measure cross-view recall with and without the patch");
  c_ev->add_option("--dataset", ev.dataset, "dataset directory or manifest.json")->required();
  c_ev->add_option("--patch", ev.patch, "patch PNG")->required();
  c_ev->add_option("--out", ev.out, "output directory")->required();
  c_ev->add_option_function<std::string>("--config", [&](const std::string& p) { ev.config = p; }, "key=value config file");
  opt(c_ev, "--ref-view", ev.ref_view, "reference view id", "first view");
  opt(c_ev, "--views", ev.views, "comma-separated destination views", "all other views");
  opt(c_ev, "--detector", ev.detector, "toy, bridge:<command> or bridge-unix:<socket>", "toy");
  opt(c_ev, "--iou", ev.iou, "IoU match threshold", "0.5");
  opt(c_ev, "--conf", ev.conf, "confidence threshold", "0.5");
  opt(c_ev, "--scale", ev.scale, "patch width relative to the person box", "0.5");
  opt(c_ev, "--anchor-x", ev.anchor_x, "patch center, fraction of box width", "0.5");
  opt(c_ev, "--anchor-y", ev.anchor_y, "patch center, fraction of box height", "0.5");
  opt(c_ev, "--jobs", ev.jobs, "worker threads", "hardware threads");
  c_ev->add_flag("!--no-frames", ev.write_frames, "skip writing patched frames");
  add_toy_flags(c_ev, ev.toy);
  c_ev->callback([&] { code = cmd_evaluate(ev); });

  SynthOptions syn;
  auto* c_syn = app.add_subcommand("synth", "Generate a synthetic multi-view dataset");
  c_syn->add_option("--spec", syn.spec, "rig spec file (key=value)")->required();
  c_syn->add_option("--out", syn.out, "output directory")->required();
  c_syn->callback([&] { code = cmd_synth(syn); });

  ReportOptions rep;
  auto* c_rep = app.add_subcommand("report", "Print a recall report");
  c_rep->add_option("--in", rep.in, "report CSV written by evaluate")->required();
  c_rep->add_option("--format", rep.format, "table or csv")->capture_default_str()->check(CLI::IsMember({"table", "csv"}));
  c_rep->callback([&] { code = cmd_report(rep); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }
  return code;
}
