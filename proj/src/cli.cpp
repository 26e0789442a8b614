#include "pfsplat/cli.hpp"

#include "pfsplat/errors.hpp"
#include "pfsplat/image.hpp"
#include "pfsplat/metrics.hpp"
#include "pfsplat/ply.hpp"
#include "pfsplat/rasterizer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <map>

namespace pfsplat::cli {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string right(std::string s, size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

std::vector<PoseEntry> entries(std::span<const View> views) {
  std::vector<PoseEntry> out;
  for (const auto& v : views) out.push_back({v.id, v.pose});
  return out;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidArgument*>(&e)) return kConfigError;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return kIoError;
  if (dynamic_cast<const DivergenceError*>(&e)) return kDivergence;
  return kFailure;
}

void cmd_synth(const fs::path& spec_json, const fs::path& out_dir) {
  save_scene(generate_scene(load_scene_spec(spec_json)), out_dir);
}

TrainResult cmd_train(const TrainCommand& cmd) {
  const SyntheticScene scene = load_scene(cmd.scene_dir);
  TrainConfig cfg;
  cfg.schedule.mode = cmd.forcing;
  cfg.normalization = cmd.norm;
  cfg.steps = cmd.steps;
  cfg.seed = cmd.seed;
  cfg.schedule.rng_seed = cmd.seed;
  TrainResult result = [&] {
    try {
      return train(scene, cfg);
    } catch (const TrainingDiverged& e) {
      write_report(e.report(), cmd.out_dir / "steps.jsonl", cmd.out_dir / "summary.json");
      throw;
    }
  }();
  write_report(result.report, cmd.out_dir / "steps.jsonl", cmd.out_dir / "summary.json");

  const TrainingFrame frame = make_frame(scene, cfg.normalization);
  const GlobalScene framed = aggregate(result.state.local_scenes(), frame.context);
  export_ply(frame.to_raw(framed), cmd.out_dir / "gaussians.ply");

  SyntheticScene pred;
  pred.gt_intrinsics = scene.gt_intrinsics;
  pred.seed = scene.seed;
  const std::vector<CameraPose> predicted = result.state.predicted_poses();
  for (size_t v = 0; v < scene.context_views.size(); ++v) {
    const ImageBuffer img = render(framed, frame.context[v], scene.gt_intrinsics, cfg.render);
    pred.context_views.push_back({scene.context_views[v].id, frame.to_raw(predicted[v]), img});
  }
  for (size_t e = 0; e < scene.eval_views.size(); ++e) {
    const ImageBuffer img = render(framed, frame.eval[e], scene.gt_intrinsics, cfg.render);
    pred.eval_views.push_back({scene.eval_views[e].id, scene.eval_views[e].pose, img});
  }
  save_poses(entries(pred.context_views), cmd.out_dir / "poses.json");
  save_scene(pred, cmd.out_dir / "pred");
  return result;
}

void cmd_render(const fs::path& ply, const fs::path& camera_json, const fs::path& out_png) {
  const GlobalScene scene = import_ply(ply);
  const CameraFile cam = load_camera(camera_json);
  write_png(render(scene, cam.pose, cam.intrinsics, synthetic_render_config()), out_png);
}

std::string EvalTable::text() const {
  std::string t = "  view      PSNR    SSIM\n";
  for (const auto& r : rows) {
    t += right(std::to_string(r.id), 6) + right(fixed(r.psnr, 3), 10) + right(fixed(r.ssim, 4), 8) + "\n";
  }
  t += "  mean" + right(fixed(mean_psnr, 3), 10) + right(fixed(mean_ssim, 4), 8) + "\n";
  if (!pose_auc.empty()) {
    t += "\n  AUC@5   AUC@10  AUC@20\n ";
    for (double a : pose_auc) t += right(fixed(a, 4), 7) + " ";
    t += "\n";
  }
  return t;
}

std::string EvalTable::json() const {
  nlohmann::json views = nlohmann::json::array();
  for (const auto& r : rows) views.push_back({{"id", r.id}, {"psnr", r.psnr}, {"ssim", r.ssim}});
  nlohmann::json doc{{"schema_version", kSchemaVersion},
                     {"views", views},
                     {"mean_psnr", mean_psnr},
                     {"mean_ssim", mean_ssim}};
  if (!pose_auc.empty()) {
    nlohmann::json auc = nlohmann::json::object();
    for (size_t i = 0; i < pose_auc.size(); ++i) auc[std::to_string(static_cast<int>(kAucThresholds[i]))] = pose_auc[i];
    doc["pose_auc"] = auc;
  }
  return doc.dump(2) + "\n";
}

EvalTable cmd_eval(const fs::path& pred_dir, const fs::path& gt_dir) {
  const SyntheticScene pred = load_scene(pred_dir);
  const SyntheticScene gt = load_scene(gt_dir);
  std::map<int, const View*> gt_views;
  for (const auto* list : {&gt.context_views, &gt.target_views, &gt.eval_views}) {
    for (const auto& v : *list) gt_views[v.id] = &v;
  }
  EvalTable table;
  std::vector<CameraPose> pred_ctx, gt_ctx;
  for (const auto* list : {&pred.context_views, &pred.target_views, &pred.eval_views}) {
    for (const auto& v : *list) {
      const auto it = gt_views.find(v.id);
      if (it == gt_views.end()) continue;
      if (!v.image.same_shape(it->second->image)) {
        throw ConfigError("eval: image size of view " + std::to_string(v.id) + " differs from the ground truth");
      }
      table.rows.push_back({v.id, psnr(v.image, it->second->image), ssim(v.image, it->second->image)});
      if (list == &pred.context_views) {
        pred_ctx.push_back(v.pose);
        gt_ctx.push_back(it->second->pose);
      }
    }
  }
  if (table.rows.empty()) throw ConfigError("eval: no view ids shared between prediction and ground truth");
  for (const auto& r : table.rows) {
    table.mean_psnr += r.psnr / static_cast<double>(table.rows.size());
    table.mean_ssim += r.ssim / static_cast<double>(table.rows.size());
  }
  if (pred_ctx.size() >= 2) table.pose_auc = pose_auc(pose_errors(pred_ctx, gt_ctx), kAucThresholds);
  write_text(table.json(), pred_dir / "eval.json");
  return table;
}

PruneSummary cmd_prune(const fs::path& ply_in, double threshold, const fs::path& ply_out) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("prune: threshold must lie in [0, 1]");
  const GlobalScene scene = import_ply(ply_in);
  const GlobalScene kept = prune_by_opacity(scene, threshold);
  export_ply(kept, ply_out);
  return {scene.size(), kept.size()};
}

PostOptResult cmd_postopt(const fs::path& ply, const fs::path& poses_json, const fs::path& targets_dir,
                          const fs::path& out_dir) {
  const GlobalScene scene = import_ply(ply);
  const std::vector<PoseEntry> init = load_poses(poses_json);
  const SyntheticScene targets = load_scene(targets_dir);
  std::map<int, const View*> by_id;
  for (const auto* list : {&targets.context_views, &targets.target_views, &targets.eval_views}) {
    for (const auto& v : *list) by_id[v.id] = &v;
  }
  std::vector<View> views;
  for (const auto& p : init) {
    const auto it = by_id.find(p.id);
    if (it == by_id.end()) throw ConfigError("postopt: no target image for view " + std::to_string(p.id));
    views.push_back({p.id, p.pose, it->second->image});
  }
  PostOptResult r = post_optimize(scene, views, targets.gt_intrinsics);
  fs::create_directories(out_dir);
  export_ply(r.scene, out_dir / "gaussians.ply");
  std::vector<PoseEntry> refined;
  for (size_t i = 0; i < views.size(); ++i) refined.push_back({views[i].id, r.poses[i]});
  save_poses(refined, out_dir / "poses.json");
  write_text(nlohmann::json{{"schema_version", kSchemaVersion},
                            {"iterations", r.losses.size()},
                            {"initial_psnr", r.initial_psnr},
                            {"final_psnr", r.final_psnr},
                            {"losses", r.losses}}
                     .dump(2) + "\n",
             out_dir / "postopt.json");
  return r;
}

AblationSummary cmd_ablate(const fs::path& suite_json, const fs::path& out_dir) {
  const SuiteConfig suite = parse_suite_config(read_text(suite_json));
  AblationSummary s = run_ablation(suite, out_dir);
  std::string table = summary_table(s) + "\n";
  for (const auto& c : check_orderings(s, kFrozenMargins)) {
    if (!c.available) continue;
    table += (c.passed() ? "PASS " : "FAIL ") + c.name + ": " + fixed(c.lhs, 3) + " vs " + fixed(c.rhs, 3) +
             " (margin " + fixed(c.margin, 2) + ")\n";
  }
  write_text(summary_to_json(s), out_dir / "ablation.json");
  write_text(table, out_dir / "ablation.txt");
  return s;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Pose-free Gaussian splatting harness"};
  app.require_subcommand(1);

  fs::path spec, out, scene_dir, ply, camera, png, pred, gt, ply_out, poses, targets, suite;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene directory");
  synth->add_option("spec-json", spec)->required();
  synth->add_option("out-dir", out)->required();

  TrainCommand tc;
  std::string forcing = "mix", norm = "max-pair";
  auto* trn = app.add_subcommand("train", "Run the training harness on a scene directory");
  trn->add_option("scene-dir", tc.scene_dir)->required();
  trn->add_option("out-dir", tc.out_dir)->required();
  trn->add_option("--forcing", forcing)->check(CLI::IsMember({"teacher", "self", "mix"}));
  trn->add_option("--norm", norm)->check(CLI::IsMember({"max-pair", "mean-pair", "max-trans", "none"}));
  trn->add_option("--steps", tc.steps)->check(CLI::NonNegativeNumber);
  trn->add_option("--seed", tc.seed);

  auto* rnd = app.add_subcommand("render", "Render a PLY from a camera file");
  rnd->add_option("ply", ply)->required();
  rnd->add_option("camera-json", camera)->required();
  rnd->add_option("out-png", png)->required();

  auto* evl = app.add_subcommand("eval", "Compare a prediction directory against ground truth");
  evl->add_option("pred-dir", pred)->required();
  evl->add_option("gt-dir", gt)->required();

  double threshold = 0.005;
  auto* prn = app.add_subcommand("prune", "Drop low-opacity Gaussians");
  prn->add_option("ply-in", ply)->required();
  prn->add_option("ply-out", ply_out)->required();
  prn->add_option("--threshold", threshold);

  auto* post = app.add_subcommand("postopt", "Refine poses, means and colors photometrically");
  post->add_option("ply", ply)->required();
  post->add_option("poses-json", poses)->required();
  post->add_option("targets-dir", targets)->required();
  post->add_option("out-dir", out)->required();

  auto* abl = app.add_subcommand("ablate", "Run the forcing and normalization ablation grids");
  abl->add_option("suite-json", suite)->required();
  abl->add_option("out-dir", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kConfigError;
  }

  try {
    if (*synth) {
      cmd_synth(spec, out);
    } else if (*trn) {
      tc.forcing = parse_forcing(forcing);
      tc.norm = parse_normalization(norm);
      const TrainResult r = cmd_train(tc);
      std::cout << summary_json(r.report);
    } else if (*rnd) {
      cmd_render(ply, camera, png);
    } else if (*evl) {
      std::cout << cmd_eval(pred, gt).text();
    } else if (*prn) {
      const PruneSummary s = cmd_prune(ply, threshold, ply_out);
      std::cout << "kept " << s.after << " of " << s.before << ", removed fraction " << fixed(s.removed_fraction(), 6)
                << "\n";
    } else if (*post) {
      const PostOptResult r = cmd_postopt(ply, poses, targets, out);
      std::cout << "PSNR " << fixed(r.initial_psnr, 3) << " -> " << fixed(r.final_psnr, 3) << "\n";
    } else if (*abl) {
      const AblationSummary s = cmd_ablate(suite, out);
      std::cout << read_text(out / "ablation.txt");
      for (const auto& c : check_orderings(s, kFrozenMargins)) {
        if (c.available && !c.passed()) return kFailure;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "pfsplat: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kSuccess;
}

}  // namespace pfsplat::cli
