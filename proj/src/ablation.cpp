#include "pfsplat/ablation.hpp"

#include "pfsplat/errors.hpp"
#include "pfsplat/random.hpp"

#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

namespace pfsplat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSuiteScaleStream = 21;

std::string_view kind_name(AblationKind k) { return k == AblationKind::Forcing ? "forcing" : "normalization"; }

json run_to_json(const AblationRun& r) {
  const EvalMetrics& m = r.metrics;
  return {{"schema_version", kSchemaVersion},
          {"kind", kind_name(r.job.kind)},
          {"scene_index", r.job.scene_index},
          {"forcing", to_string(r.job.mode)},
          {"norm", to_string(r.job.normalization)},
          {"global_scale", r.global_scale},
          {"diverged", r.diverged},
          {"pose_free_psnr", m.pose_free_psnr},
          {"pose_free_ssim", m.pose_free_ssim},
          {"pose_dependent_psnr", m.pose_dependent_psnr},
          {"pose_dependent_ssim", m.pose_dependent_ssim},
          {"pose_auc", m.pose_auc},
          {"mean_rotation_error_deg", m.mean_rotation_error_deg},
          {"solve_failures", m.solve_failures}};
}

AblationRun run_from_json(const json& j) {
  if (j.value("schema_version", -1) != kSchemaVersion) throw ConfigError("ablation run: unsupported schema_version");
  AblationRun r;
  r.job.kind = j.at("kind").get<std::string>() == "forcing" ? AblationKind::Forcing : AblationKind::Normalization;
  r.job.scene_index = j.at("scene_index").get<int>();
  r.job.mode = parse_forcing(j.at("forcing").get<std::string>());
  r.job.normalization = parse_normalization(j.at("norm").get<std::string>());
  r.global_scale = j.at("global_scale").get<double>();
  r.diverged = j.at("diverged").get<bool>();
  r.metrics.pose_free_psnr = j.at("pose_free_psnr").get<double>();
  r.metrics.pose_free_ssim = j.at("pose_free_ssim").get<double>();
  r.metrics.pose_dependent_psnr = j.at("pose_dependent_psnr").get<double>();
  r.metrics.pose_dependent_ssim = j.at("pose_dependent_ssim").get<double>();
  r.metrics.pose_auc = j.at("pose_auc").get<std::vector<double>>();
  r.metrics.mean_rotation_error_deg = j.at("mean_rotation_error_deg").get<double>();
  r.metrics.solve_failures = j.at("solve_failures").get<int>();
  return r;
}

std::string run_file_name(const AblationJob& job) {
  return std::string(kind_name(job.kind)) + "_" + std::to_string(job.scene_index) + "_" +
         std::string(to_string(job.mode)) + "_" + std::string(to_string(job.normalization)) + ".json";
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

template <class Row, class Key, class Get>
Row& row_for(std::vector<Row>& rows, Key key, Get get) {
  for (auto& r : rows) {
    if (get(r) == key) return r;
  }
  Row& r = rows.emplace_back();
  get(r) = key;
  return r;
}

std::string pad(std::string s, size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

SceneSpec suite_scene_spec(const SuiteConfig& suite, AblationKind kind, int index) {
  SceneSpec spec = suite.scene;
  spec.seed = suite.base_seed + static_cast<std::uint64_t>(index);
  if (kind == AblationKind::Normalization) {
    KeyedRng rng(spec.seed, kSuiteScaleStream);
    spec.global_scale = rng.uniform(suite.min_global_scale, suite.max_global_scale);
    const double reach = suite.max_origin_offset * spec.camera_radius * spec.global_scale;
    for (int a = 0; a < 3; ++a) spec.origin_offset(a) = rng.uniform(-reach, reach);
  }
  return spec;
}

std::vector<AblationJob> ablation_jobs(const SuiteConfig& suite) {
  std::vector<AblationJob> jobs;
  for (int i = 0; i < suite.num_scenes; ++i) {
    for (ForcingMode m : suite.forcing_modes) jobs.push_back({AblationKind::Forcing, i, m, suite.train.normalization});
  }
  for (int i = 0; i < suite.num_scenes; ++i) {
    for (NormalizationStrategy n : suite.normalizations) {
      jobs.push_back({AblationKind::Normalization, i, suite.train.schedule.mode, n});
    }
  }
  return jobs;
}

AblationRun run_ablation_job(const SuiteConfig& suite, const AblationJob& job) {
  const SceneSpec spec = suite_scene_spec(suite, job.kind, job.scene_index);
  const SyntheticScene scene = generate_scene(spec);
  TrainConfig cfg = suite.train;
  cfg.schedule.mode = job.mode;
  cfg.normalization = job.normalization;
  cfg.evaluate = true;
  AblationRun run{job, spec.global_scale, {}, false};
  try {
    run.metrics = train(scene, cfg).report.final_metrics;
  } catch (const DivergenceError&) {
    run.diverged = true;
  }
  return run;
}

const AblationSummary::ModeRow* AblationSummary::mode(ForcingMode m) const {
  for (const auto& r : modes) {
    if (r.mode == m) return &r;
  }
  return nullptr;
}

const AblationSummary::NormRow* AblationSummary::norm(NormalizationStrategy s) const {
  for (const auto& r : norms) {
    if (r.strategy == s) return &r;
  }
  return nullptr;
}

AblationSummary summarize(std::vector<AblationRun> runs) {
  AblationSummary s;
  for (const auto& r : runs) {
    // A diverged run scores zero, so it can only hurt its row.
    const EvalMetrics& m = r.metrics;
    if (r.job.kind == AblationKind::Forcing) {
      auto& row = row_for(s.modes, r.job.mode, [](auto& x) -> ForcingMode& { return x.mode; });
      row.pose_free_psnr += m.pose_free_psnr;
      row.pose_dependent_psnr += m.pose_dependent_psnr;
      row.pose_free_ssim += m.pose_free_ssim;
      row.pose_auc10 += m.pose_auc.size() > 1 ? m.pose_auc[1] : 0.0;
      ++row.runs;
    } else {
      auto& row = row_for(s.norms, r.job.normalization, [](auto& x) -> NormalizationStrategy& { return x.strategy; });
      row.psnr += m.pose_dependent_psnr;
      row.ssim += m.pose_dependent_ssim;
      ++row.runs;
    }
  }
  for (auto& r : s.modes) {
    const double n = r.runs;
    r.pose_free_psnr /= n;
    r.pose_dependent_psnr /= n;
    r.pose_free_ssim /= n;
    r.pose_auc10 /= n;
  }
  for (auto& r : s.norms) {
    r.psnr /= r.runs;
    r.ssim /= r.runs;
  }
  s.runs = std::move(runs);
  return s;
}

AblationSummary run_ablation(const SuiteConfig& suite, const std::optional<fs::path>& out_dir) {
  suite.validate();
  const std::vector<AblationJob> jobs = ablation_jobs(suite);
  std::vector<AblationRun> runs;
  if (suite.workers <= 1) {
    for (const auto& job : jobs) {
      runs.push_back(run_ablation_job(suite, job));
      if (out_dir) write_text(run_to_json(runs.back()).dump(2) + "\n", *out_dir / "runs" / run_file_name(job));
    }
    return summarize(std::move(runs));
  }

  // Workers share nothing; each writes one JSON file per job and the parent collects them.
  const fs::path dir = out_dir ? *out_dir / "runs"
                               : fs::temp_directory_path() / ("pfsplat_ablate_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::vector<pid_t> children;
  for (int w = 0; w < suite.workers; ++w) {
    const pid_t pid = ::fork();
    if (pid < 0) throw IoError("run_ablation: fork failed");
    if (pid == 0) {
      int status = 0;
      try {
        for (size_t j = static_cast<size_t>(w); j < jobs.size(); j += static_cast<size_t>(suite.workers)) {
          write_text(run_to_json(run_ablation_job(suite, jobs[j])).dump(2) + "\n", dir / run_file_name(jobs[j]));
        }
      } catch (const std::exception& e) {
        std::fprintf(stderr, "ablation worker %d: %s\n", w, e.what());
        status = 1;
      }
      std::fflush(nullptr);
      ::_exit(status);
    }
    children.push_back(pid);
  }
  bool failed = false;
  for (pid_t pid : children) {
    int status = 0;
    ::waitpid(pid, &status, 0);
    failed = failed || !WIFEXITED(status) || WEXITSTATUS(status) != 0;
  }
  if (failed) throw IoError("run_ablation: a worker process failed");
  for (const auto& job : jobs) {
    runs.push_back(run_from_json(json::parse(read_text(dir / run_file_name(job)))));
  }
  if (!out_dir) fs::remove_all(dir);
  return summarize(std::move(runs));
}

std::vector<OrderingCheck> check_orderings(const AblationSummary& s, const AblationMargins& m) {
  std::vector<OrderingCheck> out;
  const auto* teacher = s.mode(ForcingMode::Teacher);
  const auto* self = s.mode(ForcingMode::Self);
  const auto* mix = s.mode(ForcingMode::Mix);
  auto add = [&](std::string name, const auto* a, const auto* b, auto field, double margin) {
    OrderingCheck c{std::move(name), 0.0, 0.0, margin, a && b};
    if (c.available) {
      c.lhs = field(*a);
      c.rhs = field(*b);
    }
    out.push_back(c);
  };
  const auto pf = [](const AblationSummary::ModeRow& r) { return r.pose_free_psnr; };
  const auto pd = [](const AblationSummary::ModeRow& r) { return r.pose_dependent_psnr; };
  add("pose-free mix >= teacher", mix, teacher, pf, m.mix_over_teacher_pose_free);
  add("pose-free mix >= self", mix, self, pf, m.mix_over_self_pose_free);
  add("pose-dependent teacher >= self", teacher, self, pd, m.teacher_over_self_pose_dependent);

  const auto* max_pair = s.norm(NormalizationStrategy::MaxPairwise);
  const auto* mean_pair = s.norm(NormalizationStrategy::MeanPairwise);
  const auto* max_trans = s.norm(NormalizationStrategy::MaxTranslation);
  const auto* none = s.norm(NormalizationStrategy::None);
  const auto psnr = [](const AblationSummary::NormRow& r) { return r.psnr; };
  add("max-pair >= mean-pair", max_pair, mean_pair, psnr, m.max_over_mean_pair);
  OrderingCheck rest{"mean-pair >= max(max-trans, none)", 0.0, 0.0, m.mean_pair_over_rest,
                     mean_pair && (max_trans || none)};
  if (rest.available) {
    rest.lhs = mean_pair->psnr;
    rest.rhs = std::max(max_trans ? max_trans->psnr : -1e300, none ? none->psnr : -1e300);
  }
  out.push_back(rest);
  return out;
}

std::string summary_table(const AblationSummary& s) {
  std::string t;
  if (!s.modes.empty()) {
    t += "forcing    pose-free PSNR  pose-free SSIM  pose-dep PSNR  AUC@10  runs\n";
    for (const auto& r : s.modes) {
      t += pad(std::string(to_string(r.mode)), 11) + pad(fmt("%.3f", r.pose_free_psnr), 16) +
           pad(fmt("%.4f", r.pose_free_ssim), 16) + pad(fmt("%.3f", r.pose_dependent_psnr), 15) +
           pad(fmt("%.3f", r.pose_auc10), 8) + std::to_string(r.runs) + "\n";
    }
  }
  if (!s.norms.empty()) {
    if (!t.empty()) t += "\n";
    t += "norm       PSNR     SSIM     runs\n";
    for (const auto& r : s.norms) {
      t += pad(std::string(to_string(r.strategy)), 11) + pad(fmt("%.3f", r.psnr), 9) + pad(fmt("%.4f", r.ssim), 9) +
           std::to_string(r.runs) + "\n";
    }
  }
  return t;
}

std::string summary_to_json(const AblationSummary& s) {
  json modes = json::array(), norms = json::array(), runs = json::array();
  for (const auto& r : s.modes) {
    modes.push_back({{"forcing", to_string(r.mode)},
                     {"pose_free_psnr", r.pose_free_psnr},
                     {"pose_free_ssim", r.pose_free_ssim},
                     {"pose_dependent_psnr", r.pose_dependent_psnr},
                     {"pose_auc10", r.pose_auc10},
                     {"runs", r.runs}});
  }
  for (const auto& r : s.norms) {
    norms.push_back({{"norm", to_string(r.strategy)}, {"psnr", r.psnr}, {"ssim", r.ssim}, {"runs", r.runs}});
  }
  for (const auto& r : s.runs) runs.push_back(run_to_json(r));
  return json{{"schema_version", kSchemaVersion}, {"forcing", modes}, {"normalization", norms}, {"runs", runs}}.dump(2) +
         "\n";
}

}  // namespace pfsplat
