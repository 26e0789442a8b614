#include "pfsplat/scene_io.hpp"

#include "pfsplat/errors.hpp"
#include "pfsplat/image.hpp"
#include "pfsplat/ply.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace pfsplat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_json(const std::string& text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(what) + ": malformed JSON (" + e.what() + ")");
  }
}

void require_object(const json& j, std::string_view what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view what) {
  require_object(j, what);
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(std::string(what) + ": unknown key '" + key + "'");
    }
  }
}

void check_schema(const json& j, std::string_view what) {
  if (!j.contains("schema_version")) throw ConfigError(std::string(what) + ": missing schema_version");
  if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kSchemaVersion) {
    throw ConfigError(std::string(what) + ": unsupported schema_version " + j["schema_version"].dump() +
                      " (expected " + std::to_string(kSchemaVersion) + ")");
  }
}

template <class T>
T get(const json& j, std::string_view key, std::string_view what) {
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(std::string(what) + ": missing key '" + std::string(key) + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(what) + ": key '" + std::string(key) + "' has the wrong type");
  }
}

template <class T>
void maybe(const json& j, std::string_view key, T& out, std::string_view what) {
  if (j.contains(key)) out = get<T>(j, key, what);
}

json to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"w", k.width}, {"h", k.height}};
}

CameraIntrinsics intrinsics_from(const json& j) {
  constexpr std::string_view what = "intrinsics";
  check_keys(j, {"fx", "fy", "cx", "cy", "w", "h"}, what);
  CameraIntrinsics k;
  k.fx = get<double>(j, "fx", what);
  k.fy = get<double>(j, "fy", what);
  k.cx = get<double>(j, "cx", what);
  k.cy = get<double>(j, "cy", what);
  k.width = get<int>(j, "w", what);
  k.height = get<int>(j, "h", what);
  try {
    k.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return k;
}

void put_pose(json& j, const CameraPose& p) {
  json r = json::array();
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) r.push_back(p.rotation(row, col));
  }
  j["rotation"] = r;
  j["translation"] = {p.translation.x(), p.translation.y(), p.translation.z()};
}

CameraPose pose_from(const json& j, std::string_view what) {
  const auto r = get<std::vector<double>>(j, "rotation", what);
  const auto t = get<std::vector<double>>(j, "translation", what);
  if (r.size() != 9 || t.size() != 3) throw ConfigError(std::string(what) + ": rotation needs 9 and translation 3 values");
  CameraPose p;
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) p.rotation(row, col) = r[static_cast<size_t>(row * 3 + col)];
  }
  p.translation = Vec3(t[0], t[1], t[2]);
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
  return p;
}

Vec3 vec3_from(const json& j, std::string_view key, std::string_view what) {
  const auto v = get<std::vector<double>>(j, key, what);
  if (v.size() != 3) throw ConfigError(std::string(what) + ": '" + std::string(key) + "' needs 3 values");
  return {v[0], v[1], v[2]};
}

template <class F>
void validated(F&& f, std::string_view what) {
  try {
    f();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

void apply_scene_spec(const json& j, SceneSpec& s) {
  constexpr std::string_view what = "scene spec";
  check_keys(j,
             {"schema_version", "num_views", "num_gaussians", "camera_radius", "image_size", "seed", "num_candidates",
              "num_eval", "arc_degrees", "fov_degrees", "jitter", "global_scale", "origin_offset"},
             what);
  if (j.contains("schema_version")) check_schema(j, what);
  maybe(j, "num_views", s.num_views, what);
  maybe(j, "num_gaussians", s.num_gaussians, what);
  maybe(j, "camera_radius", s.camera_radius, what);
  maybe(j, "image_size", s.image_size, what);
  maybe(j, "seed", s.seed, what);
  maybe(j, "num_candidates", s.num_candidates, what);
  maybe(j, "num_eval", s.num_eval, what);
  maybe(j, "arc_degrees", s.arc_degrees, what);
  maybe(j, "fov_degrees", s.fov_degrees, what);
  maybe(j, "jitter", s.jitter, what);
  maybe(j, "global_scale", s.global_scale, what);
  if (j.contains("origin_offset")) s.origin_offset = vec3_from(j, "origin_offset", what);
  validated([&] { s.validate(); }, what);
}

void apply_train_config(const json& j, TrainConfig& c) {
  constexpr std::string_view what = "train config";
  check_keys(j,
             {"schema_version", "steps", "targets_per_step", "forcing", "norm", "seed", "schedule", "weights", "lr",
              "render", "grid", "depth_prior", "init_opacity", "init_rotation_error_deg", "init_translation_error",
              "init_focal_error", "train_noise", "eval_noise", "solve_iterations", "solve_lr_rotation",
              "solve_lr_translation", "evaluate"},
             what);
  if (j.contains("schema_version")) check_schema(j, what);
  maybe(j, "steps", c.steps, what);
  maybe(j, "targets_per_step", c.targets_per_step, what);
  if (j.contains("forcing")) c.schedule.mode = parse_forcing(get<std::string>(j, "forcing", what));
  if (j.contains("norm")) c.normalization = parse_normalization(get<std::string>(j, "norm", what));
  maybe(j, "seed", c.seed, what);
  if (j.contains("schedule")) {
    const json& s = j["schedule"];
    check_keys(s, {"t_start", "t_end", "ratio_r", "rng_seed", "mode"}, "schedule");
    maybe(s, "t_start", c.schedule.t_start, "schedule");
    maybe(s, "t_end", c.schedule.t_end, "schedule");
    maybe(s, "ratio_r", c.schedule.ratio_r, "schedule");
    maybe(s, "rng_seed", c.schedule.rng_seed, "schedule");
    if (s.contains("mode")) c.schedule.mode = parse_forcing(get<std::string>(s, "mode", "schedule"));
  }
  if (j.contains("weights")) {
    const json& w = j["weights"];
    check_keys(w, {"lambda_intrin", "lambda_pose", "lambda_opacity", "lambda_t", "huber_delta", "lambda_ssim"},
               "weights");
    maybe(w, "lambda_intrin", c.weights.lambda_intrin, "weights");
    maybe(w, "lambda_pose", c.weights.lambda_pose, "weights");
    maybe(w, "lambda_opacity", c.weights.lambda_opacity, "weights");
    maybe(w, "lambda_t", c.weights.lambda_t, "weights");
    maybe(w, "huber_delta", c.weights.huber_delta, "weights");
    maybe(w, "lambda_ssim", c.weights.lambda_ssim, "weights");
  }
  if (j.contains("lr")) {
    const json& l = j["lr"];
    check_keys(l, {"mean", "color", "opacity", "log_scale", "rotation", "translation", "focal", "final_fraction"},
               "lr");
    maybe(l, "mean", c.lr.mean, "lr");
    maybe(l, "color", c.lr.color, "lr");
    maybe(l, "opacity", c.lr.opacity, "lr");
    maybe(l, "log_scale", c.lr.log_scale, "lr");
    maybe(l, "rotation", c.lr.rotation, "lr");
    maybe(l, "translation", c.lr.translation, "lr");
    maybe(l, "focal", c.lr.focal, "lr");
    maybe(l, "final_fraction", c.lr.final_fraction, "lr");
  }
  if (j.contains("render")) {
    const json& r = j["render"];
    check_keys(r, {"tile_size", "near_plane", "far_plane", "alpha_floor", "transmittance_stop", "background"},
               "render");
    maybe(r, "tile_size", c.render.tile_size, "render");
    maybe(r, "near_plane", c.render.near_plane, "render");
    maybe(r, "far_plane", c.render.far_plane, "render");
    maybe(r, "alpha_floor", c.render.alpha_floor, "render");
    maybe(r, "transmittance_stop", c.render.transmittance_stop, "render");
    if (r.contains("background")) c.render.background = vec3_from(r, "background", "render");
  }
  maybe(j, "grid", c.grid, what);
  maybe(j, "depth_prior", c.depth_prior, what);
  maybe(j, "init_opacity", c.init_opacity, what);
  maybe(j, "init_rotation_error_deg", c.init_rotation_error_deg, what);
  maybe(j, "init_translation_error", c.init_translation_error, what);
  maybe(j, "init_focal_error", c.init_focal_error, what);
  for (auto [key, noise] : {std::pair{"train_noise", &c.train_noise}, std::pair{"eval_noise", &c.eval_noise}}) {
    if (!j.contains(key)) continue;
    const json& n = j[key];
    check_keys(n, {"rotation_deg", "translation"}, key);
    maybe(n, "rotation_deg", noise->rotation_deg, key);
    maybe(n, "translation", noise->translation, key);
  }
  maybe(j, "solve_iterations", c.solve_iterations, what);
  maybe(j, "solve_lr_rotation", c.solve_lr_rotation, what);
  maybe(j, "solve_lr_translation", c.solve_lr_translation, what);
  maybe(j, "evaluate", c.evaluate, what);
  validated([&] { c.validate(); }, what);
}

json metrics_json(const EvalMetrics& m) {
  json auc = json::object();
  for (size_t i = 0; i < m.pose_auc.size() && i < std::size(kAucThresholds); ++i) {
    auc[std::to_string(static_cast<int>(kAucThresholds[i]))] = m.pose_auc[i];
  }
  return {{"pose_free_psnr", m.pose_free_psnr},
          {"pose_free_ssim", m.pose_free_ssim},
          {"pose_dependent_psnr", m.pose_dependent_psnr},
          {"pose_dependent_ssim", m.pose_dependent_ssim},
          {"pose_auc", auc},
          {"mean_rotation_error_deg", m.mean_rotation_error_deg},
          {"solve_failures", m.solve_failures}};
}

}  // namespace

std::string_view to_string(ViewRole r) {
  switch (r) {
    case ViewRole::Context: return "context";
    case ViewRole::Target: return "target";
    case ViewRole::Eval: return "eval";
  }
  return "context";
}

ViewRole parse_view_role(std::string_view name) {
  if (name == "context") return ViewRole::Context;
  if (name == "target") return ViewRole::Target;
  if (name == "eval") return ViewRole::Eval;
  throw ConfigError("unknown view role '" + std::string(name) + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& text, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void save_scene(const SyntheticScene& scene, const fs::path& dir) {
  fs::create_directories(dir / "images");
  json views = json::array();
  auto add = [&](const View& v, ViewRole role) {
    const std::string rel = "images/" + std::to_string(v.id) + ".png";
    write_png(v.image, dir / rel);
    json e{{"id", v.id}, {"role", to_string(role)}, {"image_path", rel}};
    put_pose(e, v.pose);
    views.push_back(e);
  };
  for (const auto& v : scene.context_views) add(v, ViewRole::Context);
  for (const auto& v : scene.target_views) add(v, ViewRole::Target);
  for (const auto& v : scene.eval_views) add(v, ViewRole::Eval);
  json doc{{"schema_version", kSchemaVersion},
           {"intrinsics", to_json(scene.gt_intrinsics)},
           {"views", views},
           {"seed", scene.seed}};
  if (!scene.gt_gaussians.empty()) {
    export_ply(scene.gt_gaussians, dir / "gaussians.ply");
    doc["gaussians_path"] = "gaussians.ply";
  }
  write_text(doc.dump(2) + "\n", dir / "scene.json");
}

SyntheticScene load_scene(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / "scene.json" : path;
  const fs::path dir = file.parent_path();
  constexpr std::string_view what = "scene";
  const json j = parse_json(read_text(file), what);
  check_keys(j, {"schema_version", "intrinsics", "views", "gaussians_path", "seed"}, what);
  check_schema(j, what);
  SyntheticScene scene;
  scene.gt_intrinsics = intrinsics_from(get<json>(j, "intrinsics", what));
  maybe(j, "seed", scene.seed, what);
  const json views = get<json>(j, "views", what);
  if (!views.is_array()) throw ConfigError("scene: 'views' must be an array");
  for (const json& e : views) {
    check_keys(e, {"id", "role", "rotation", "translation", "image_path"}, "scene view");
    View v;
    v.id = get<int>(e, "id", "scene view");
    v.pose = pose_from(e, "scene view");
    v.image = read_png(dir / get<std::string>(e, "image_path", "scene view"));
    if (v.image.width != scene.gt_intrinsics.width || v.image.height != scene.gt_intrinsics.height) {
      throw ConfigError("scene view " + std::to_string(v.id) + ": image size disagrees with the intrinsics");
    }
    const ViewRole role = e.contains("role") ? parse_view_role(get<std::string>(e, "role", "scene view")) : ViewRole::Context;
    (role == ViewRole::Context ? scene.context_views : role == ViewRole::Target ? scene.target_views : scene.eval_views)
        .push_back(std::move(v));
  }
  if (j.contains("gaussians_path")) scene.gt_gaussians = import_ply(dir / get<std::string>(j, "gaussians_path", what));
  return scene;
}

void save_camera(const CameraFile& camera, const fs::path& path) {
  json doc{{"schema_version", kSchemaVersion}, {"intrinsics", to_json(camera.intrinsics)}};
  put_pose(doc, camera.pose);
  write_text(doc.dump(2) + "\n", path);
}

CameraFile load_camera(const fs::path& path) {
  constexpr std::string_view what = "camera";
  const json j = parse_json(read_text(path), what);
  check_keys(j, {"schema_version", "intrinsics", "rotation", "translation"}, what);
  check_schema(j, what);
  return {intrinsics_from(get<json>(j, "intrinsics", what)), pose_from(j, what)};
}

void save_poses(std::span<const PoseEntry> poses, const fs::path& path) {
  json arr = json::array();
  for (const auto& p : poses) {
    json e{{"id", p.id}};
    put_pose(e, p.pose);
    arr.push_back(e);
  }
  write_text(json{{"schema_version", kSchemaVersion}, {"poses", arr}}.dump(2) + "\n", path);
}

std::vector<PoseEntry> load_poses(const fs::path& path) {
  constexpr std::string_view what = "poses";
  const json j = parse_json(read_text(path), what);
  check_keys(j, {"schema_version", "poses"}, what);
  check_schema(j, what);
  const json arr = get<json>(j, "poses", what);
  if (!arr.is_array()) throw ConfigError("poses: 'poses' must be an array");
  std::vector<PoseEntry> out;
  for (const json& e : arr) {
    check_keys(e, {"id", "rotation", "translation"}, "pose entry");
    out.push_back({get<int>(e, "id", "pose entry"), pose_from(e, "pose entry")});
  }
  return out;
}

SceneSpec parse_scene_spec(const std::string& json_text) {
  SceneSpec s;
  apply_scene_spec(parse_json(json_text, "scene spec"), s);
  return s;
}

SceneSpec load_scene_spec(const fs::path& path) { return parse_scene_spec(read_text(path)); }

TrainConfig parse_train_config(const std::string& json_text, TrainConfig base) {
  apply_train_config(parse_json(json_text, "train config"), base);
  return base;
}

void SuiteConfig::validate() const {
  if (num_scenes < 1) throw InvalidArgument("suite: num_scenes must be at least 1");
  if (workers < 1) throw InvalidArgument("suite: workers must be at least 1");
  if (!(min_global_scale > 0.0 && max_global_scale >= min_global_scale)) {
    throw InvalidArgument("suite: need 0 < min_global_scale <= max_global_scale");
  }
  if (!(max_origin_offset >= 0.0)) throw InvalidArgument("suite: max_origin_offset must be non-negative");
  scene.validate();
  train.validate();
}

SuiteConfig parse_suite_config(const std::string& json_text) {
  constexpr std::string_view what = "suite";
  const json j = parse_json(json_text, what);
  check_keys(j,
             {"schema_version", "num_scenes", "base_seed", "scene", "train", "forcing_modes", "normalizations",
              "min_global_scale", "max_global_scale", "max_origin_offset", "workers"},
             what);
  check_schema(j, what);
  SuiteConfig s;
  maybe(j, "num_scenes", s.num_scenes, what);
  maybe(j, "base_seed", s.base_seed, what);
  if (j.contains("scene")) apply_scene_spec(j["scene"], s.scene);
  if (j.contains("train")) apply_train_config(j["train"], s.train);
  if (j.contains("forcing_modes")) {
    s.forcing_modes.clear();
    for (const auto& m : get<std::vector<std::string>>(j, "forcing_modes", what)) s.forcing_modes.push_back(parse_forcing(m));
  }
  if (j.contains("normalizations")) {
    s.normalizations.clear();
    for (const auto& n : get<std::vector<std::string>>(j, "normalizations", what)) {
      s.normalizations.push_back(parse_normalization(n));
    }
  }
  maybe(j, "min_global_scale", s.min_global_scale, what);
  maybe(j, "max_global_scale", s.max_global_scale, what);
  maybe(j, "max_origin_offset", s.max_origin_offset, what);
  maybe(j, "workers", s.workers, what);
  validated([&] { s.validate(); }, what);
  return s;
}

std::string summary_json(const TrainReport& r) {
  json doc{{"schema_version", kSchemaVersion},
           {"num_steps", r.steps.size()},
           {"normalization_scale", r.normalization_scale},
           {"wall_clock_seconds", r.wall_clock_seconds},
           {"evaluated", r.evaluated}};
  if (!r.steps.empty()) doc["final_loss"] = r.steps.back().total;
  if (r.evaluated) doc["metrics"] = metrics_json(r.final_metrics);
  return doc.dump(2) + "\n";
}

void write_report(const TrainReport& report, const fs::path& steps_jsonl, const fs::path& summary) {
  std::string lines;
  for (const auto& s : report.steps) {
    lines += json{{"step", s.step},
                  {"total", s.total},
                  {"image", s.parts.image},
                  {"intrinsic", s.parts.intrinsic},
                  {"pose", s.parts.pose},
                  {"opacity", s.parts.opacity},
                  {"source", to_string(s.source)}}
                 .dump();
    lines += '\n';
  }
  write_text(lines, steps_jsonl);
  write_text(summary_json(report), summary);
}

EvalMetrics parse_summary_metrics(const std::string& json_text) {
  constexpr std::string_view what = "summary";
  const json j = parse_json(json_text, what);
  check_keys(j, {"schema_version", "num_steps", "normalization_scale", "wall_clock_seconds", "evaluated", "final_loss",
                 "metrics"},
             what);
  check_schema(j, what);
  const json m = get<json>(j, "metrics", what);
  check_keys(m, {"pose_free_psnr", "pose_free_ssim", "pose_dependent_psnr", "pose_dependent_ssim", "pose_auc",
                 "mean_rotation_error_deg", "solve_failures"},
             "metrics");
  EvalMetrics out;
  out.pose_free_psnr = get<double>(m, "pose_free_psnr", "metrics");
  out.pose_free_ssim = get<double>(m, "pose_free_ssim", "metrics");
  out.pose_dependent_psnr = get<double>(m, "pose_dependent_psnr", "metrics");
  out.pose_dependent_ssim = get<double>(m, "pose_dependent_ssim", "metrics");
  out.mean_rotation_error_deg = get<double>(m, "mean_rotation_error_deg", "metrics");
  out.solve_failures = get<int>(m, "solve_failures", "metrics");
  const json auc = get<json>(m, "pose_auc", "metrics");
  for (double t : kAucThresholds) out.pose_auc.push_back(get<double>(auc, std::to_string(static_cast<int>(t)), "pose_auc"));
  return out;
}

}  // namespace pfsplat
