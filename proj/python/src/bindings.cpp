#include "pfsplat/ablation.hpp"
#include "pfsplat/cli.hpp"
#include "pfsplat/curriculum.hpp"
#include "pfsplat/errors.hpp"
#include "pfsplat/gaussians.hpp"
#include "pfsplat/geometry.hpp"
#include "pfsplat/losses.hpp"
#include "pfsplat/metrics.hpp"
#include "pfsplat/ply.hpp"
#include "pfsplat/rasterizer.hpp"
#include "pfsplat/scene_io.hpp"
#include "pfsplat/synthetic.hpp"
#include "pfsplat/trainer.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

namespace py = pybind11;
using namespace pfsplat;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const ImageBuffer& img) {
  Array out({img.height, img.width, 3});
  std::memcpy(out.mutable_data(), img.rgb.data(), img.rgb.size() * sizeof(double));
  return out;
}

ImageBuffer from_numpy(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw InvalidArgument("image arrays must have shape (H, W, 3)");
  ImageBuffer img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(img.rgb.data(), a.data(), img.rgb.size() * sizeof(double));
  return img;
}

Rotation9D seed_from(const Mat3& m) {
  Rotation9D s;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) s.values[static_cast<size_t>(r * 3 + c)] = m(r, c);
  }
  return s;
}

}  // namespace

PYBIND11_MODULE(pfsplat, m) {
  m.doc() = "Pose-free Gaussian splatting harness";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", error.ptr());
  py::register_exception<DegenerateRotation>(m, "DegenerateRotation", error.ptr());
  py::register_exception<DegenerateScene>(m, "DegenerateScene", error.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  auto io = py::register_exception<IoError>(m, "IoError", error.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", error.ptr());
  py::register_exception<PlyHeaderError>(m, "PlyHeaderError", io.ptr());
  py::register_exception<PlyTruncatedError>(m, "PlyTruncatedError", io.ptr());
  py::register_exception<PlyPropertyError>(m, "PlyPropertyError", io.ptr());

  py::enum_<NormalizationStrategy>(m, "NormalizationStrategy")
      .value("MaxPairwise", NormalizationStrategy::MaxPairwise)
      .value("MeanPairwise", NormalizationStrategy::MeanPairwise)
      .value("MaxTranslation", NormalizationStrategy::MaxTranslation)
      .value("NoNorm", NormalizationStrategy::None);
  py::enum_<ForcingMode>(m, "ForcingMode")
      .value("Teacher", ForcingMode::Teacher)
      .value("Self", ForcingMode::Self)
      .value("Mix", ForcingMode::Mix);
  py::enum_<PoseSource>(m, "PoseSource")
      .value("GroundTruth", PoseSource::GroundTruth)
      .value("Predicted", PoseSource::Predicted);

  py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
      .def(py::init<>())
      .def(py::init([](double fx, double fy, double cx, double cy, int w, int h) {
             return CameraIntrinsics{fx, fy, cx, cy, w, h};
           }),
           py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"), py::arg("width"), py::arg("height"))
      .def_readwrite("fx", &CameraIntrinsics::fx)
      .def_readwrite("fy", &CameraIntrinsics::fy)
      .def_readwrite("cx", &CameraIntrinsics::cx)
      .def_readwrite("cy", &CameraIntrinsics::cy)
      .def_readwrite("width", &CameraIntrinsics::width)
      .def_readwrite("height", &CameraIntrinsics::height)
      .def("validate", &CameraIntrinsics::validate);

  py::class_<CameraPose>(m, "CameraPose")
      .def(py::init<>())
      .def(py::init([](const Mat3& r, const Vec3& t) { return CameraPose{r, t}; }), py::arg("rotation"),
           py::arg("translation"))
      .def_readwrite("rotation", &CameraPose::rotation)
      .def_readwrite("translation", &CameraPose::translation)
      .def("inverse", &CameraPose::inverse)
      .def("center", &CameraPose::center)
      .def("validate", &CameraPose::validate)
      .def("__mul__", [](const CameraPose& a, const CameraPose& b) { return a * b; });

  py::class_<Gaussian>(m, "Gaussian")
      .def(py::init<>())
      .def_readwrite("mean", &Gaussian::mean)
      .def_readwrite("opacity", &Gaussian::opacity)
      .def_property(
          "rotation", [](const Gaussian& g) { return Eigen::Vector4d(g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z()); },
          [](Gaussian& g, const Eigen::Vector4d& q) { g.rotation = Eigen::Quaterniond(q(0), q(1), q(2), q(3)); })
      .def_readwrite("log_scale", &Gaussian::log_scale)
      .def_readwrite("color", &Gaussian::color)
      .def("covariance", &Gaussian::covariance);

  py::class_<LocalScene>(m, "LocalScene")
      .def(py::init<>())
      .def_readwrite("gaussians", &LocalScene::gaussians)
      .def_readwrite("view_id", &LocalScene::view_id);

  py::class_<GlobalScene>(m, "GlobalScene")
      .def(py::init<>())
      .def_readwrite("gaussians", &GlobalScene::gaussians)
      .def_readwrite("provenance", &GlobalScene::provenance)
      .def("__len__", &GlobalScene::size);

  py::class_<RenderConfig>(m, "RenderConfig")
      .def(py::init<>())
      .def_readwrite("tile_size", &RenderConfig::tile_size)
      .def_readwrite("near_plane", &RenderConfig::near_plane)
      .def_readwrite("far_plane", &RenderConfig::far_plane)
      .def_readwrite("alpha_floor", &RenderConfig::alpha_floor)
      .def_readwrite("transmittance_stop", &RenderConfig::transmittance_stop)
      .def_readwrite("background", &RenderConfig::background);

  py::class_<LossWeights>(m, "LossWeights")
      .def(py::init<>())
      .def_readwrite("lambda_intrin", &LossWeights::lambda_intrin)
      .def_readwrite("lambda_pose", &LossWeights::lambda_pose)
      .def_readwrite("lambda_opacity", &LossWeights::lambda_opacity)
      .def_readwrite("lambda_t", &LossWeights::lambda_t)
      .def_readwrite("huber_delta", &LossWeights::huber_delta)
      .def_readwrite("lambda_ssim", &LossWeights::lambda_ssim);

  py::class_<ForcingSchedule>(m, "ForcingSchedule")
      .def(py::init<>())
      .def_readwrite("t_start", &ForcingSchedule::t_start)
      .def_readwrite("t_end", &ForcingSchedule::t_end)
      .def_readwrite("ratio_r", &ForcingSchedule::ratio_r)
      .def_readwrite("mode", &ForcingSchedule::mode)
      .def_readwrite("rng_seed", &ForcingSchedule::rng_seed);

  // Geometry.
  m.def("orthogonalize_9d", [](const Mat3& seed) { return orthogonalize_9d(seed_from(seed)); }, py::arg("seed"));
  m.def("so3_exp", &so3_exp);
  m.def("so3_log", &so3_log);
  m.def("relative_pose", &relative_pose);
  m.def("normalization_scale",
        [](const std::vector<CameraPose>& poses, NormalizationStrategy s) { return normalization_scale(poses, s); });
  m.def("normalize_scene", [](const std::vector<CameraPose>& poses, NormalizationStrategy s) {
    const NormalizedPoses n = normalize_scene(poses, s);
    return py::make_tuple(n.poses, n.scale);
  });
  m.def("parse_normalization", &parse_normalization);
  m.def("rotation_angle_between", &rotation_angle_between);

  // Gaussians and rendering.
  m.def("aggregate", [](const std::vector<LocalScene>& l, const std::vector<CameraPose>& p) { return aggregate(l, p); });
  m.def("prune_by_opacity", &prune_by_opacity);
  m.def("import_ply", &import_ply);
  m.def("export_ply", &export_ply);
  m.def(
      "render",
      [](const GlobalScene& s, const CameraPose& p, const CameraIntrinsics& k, const RenderConfig& c) {
        return to_numpy(render(s, p, k, c));
      },
      py::arg("scene"), py::arg("pose"), py::arg("intrinsics"), py::arg("config") = RenderConfig{});

  // Losses and metrics.
  m.def("image_loss", [](const Array& a, const Array& b, const LossWeights& w) {
    const ImageLoss l = image_loss(from_numpy(a), from_numpy(b), w);
    return py::make_tuple(l.value, to_numpy(l.d_rendered));
  });
  m.def("rotation_loss", &rotation_loss);
  m.def("translation_loss", &translation_loss);
  m.def("pose_loss", [](const std::vector<CameraPose>& pred, const std::vector<CameraPose>& gt, const LossWeights& w) {
    return pose_loss(pred, gt, w).value;
  });
  m.def("intrinsic_loss", [](double fx, double fy, double gfx, double gfy, double width) {
    return intrinsic_loss({fx, fy}, {gfx, gfy}, width);
  });
  m.def("opacity_loss", [](const std::vector<double>& o) { return opacity_loss(o); });
  m.def("psnr", [](const Array& a, const Array& b) { return psnr(from_numpy(a), from_numpy(b)); });
  m.def("ssim", [](const Array& a, const Array& b) { return ssim(from_numpy(a), from_numpy(b)); });
  m.def(
      "pose_auc",
      [](const std::vector<CameraPose>& pred, const std::vector<CameraPose>& gt, const std::vector<double>& thresholds) {
        return pose_auc(pose_errors(pred, gt), thresholds);
      },
      py::arg("pred"), py::arg("gt"), py::arg("thresholds") = std::vector<double>{5.0, 10.0, 20.0});

  // Curriculum.
  m.def("predicted_pose_probability", &predicted_pose_probability);
  m.def("choose_pose_source", &choose_pose_source);

  // Scenes and training.
  py::class_<SceneSpec>(m, "SceneSpec")
      .def(py::init<>())
      .def_readwrite("num_views", &SceneSpec::num_views)
      .def_readwrite("num_gaussians", &SceneSpec::num_gaussians)
      .def_readwrite("camera_radius", &SceneSpec::camera_radius)
      .def_readwrite("image_size", &SceneSpec::image_size)
      .def_readwrite("seed", &SceneSpec::seed)
      .def_readwrite("num_candidates", &SceneSpec::num_candidates)
      .def_readwrite("num_eval", &SceneSpec::num_eval)
      .def_readwrite("arc_degrees", &SceneSpec::arc_degrees)
      .def_readwrite("fov_degrees", &SceneSpec::fov_degrees)
      .def_readwrite("jitter", &SceneSpec::jitter)
      .def_readwrite("global_scale", &SceneSpec::global_scale)
      .def_readwrite("origin_offset", &SceneSpec::origin_offset);

  py::class_<View>(m, "View")
      .def_readonly("id", &View::id)
      .def_readonly("pose", &View::pose)
      .def_property_readonly("image", [](const View& v) { return to_numpy(v.image); });

  py::class_<SyntheticScene>(m, "SyntheticScene")
      .def_readonly("gt_gaussians", &SyntheticScene::gt_gaussians)
      .def_readonly("gt_intrinsics", &SyntheticScene::gt_intrinsics)
      .def_readonly("context_views", &SyntheticScene::context_views)
      .def_readonly("target_views", &SyntheticScene::target_views)
      .def_readonly("eval_views", &SyntheticScene::eval_views)
      .def_readonly("seed", &SyntheticScene::seed)
      .def("gt_poses", &SyntheticScene::gt_poses);

  m.def("generate_scene", &generate_scene);
  m.def("save_scene", &save_scene);
  m.def("load_scene", &load_scene);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("steps", &TrainConfig::steps)
      .def_readwrite("targets_per_step", &TrainConfig::targets_per_step)
      .def_readwrite("schedule", &TrainConfig::schedule)
      .def_readwrite("weights", &TrainConfig::weights)
      .def_readwrite("normalization", &TrainConfig::normalization)
      .def_readwrite("render", &TrainConfig::render)
      .def_readwrite("grid", &TrainConfig::grid)
      .def_readwrite("depth_prior", &TrainConfig::depth_prior)
      .def_readwrite("evaluate", &TrainConfig::evaluate)
      .def_readwrite("seed", &TrainConfig::seed)
      .def("validate", &TrainConfig::validate);

  py::class_<EvalMetrics>(m, "EvalMetrics")
      .def_readonly("pose_free_psnr", &EvalMetrics::pose_free_psnr)
      .def_readonly("pose_free_ssim", &EvalMetrics::pose_free_ssim)
      .def_readonly("pose_dependent_psnr", &EvalMetrics::pose_dependent_psnr)
      .def_readonly("pose_dependent_ssim", &EvalMetrics::pose_dependent_ssim)
      .def_readonly("pose_auc", &EvalMetrics::pose_auc)
      .def_readonly("mean_rotation_error_deg", &EvalMetrics::mean_rotation_error_deg)
      .def_readonly("solve_failures", &EvalMetrics::solve_failures);

  py::class_<TrainReport>(m, "TrainReport")
      .def_property_readonly("losses",
                             [](const TrainReport& r) {
                               std::vector<double> out;
                               for (const auto& s : r.steps) out.push_back(s.total);
                               return out;
                             })
      .def_property_readonly("sources",
                             [](const TrainReport& r) {
                               std::vector<PoseSource> out;
                               for (const auto& s : r.steps) out.push_back(s.source);
                               return out;
                             })
      .def_readonly("final_metrics", &TrainReport::final_metrics)
      .def_readonly("evaluated", &TrainReport::evaluated)
      .def_readonly("normalization_scale", &TrainReport::normalization_scale)
      .def_readonly("wall_clock_seconds", &TrainReport::wall_clock_seconds);

  m.def("train", [](const SyntheticScene& scene, const TrainConfig& cfg) {
    py::gil_scoped_release release;
    TrainResult r = train(scene, cfg);
    return std::make_pair(r.state.predicted_poses(), std::move(r.report));
  });

  m.def(
      "post_optimize",
      [](const GlobalScene& scene, const std::vector<CameraPose>& poses, const std::vector<Array>& images,
         const CameraIntrinsics& k, int iterations) {
        if (poses.size() != images.size()) throw InvalidArgument("post_optimize: one image per pose required");
        std::vector<View> views;
        for (size_t i = 0; i < poses.size(); ++i) views.push_back({static_cast<int>(i), poses[i], from_numpy(images[i])});
        PostOptOptions opt;
        opt.iterations = iterations;
        const PostOptResult r = post_optimize(scene, views, k, opt);
        return py::make_tuple(r.scene, r.poses, r.initial_psnr, r.final_psnr);
      },
      py::arg("scene"), py::arg("poses"), py::arg("images"), py::arg("intrinsics"), py::arg("iterations") = 200);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"pfsplat"};
        for (const auto& a : args) argv.push_back(a.c_str());
        return cli::run(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"));
}
