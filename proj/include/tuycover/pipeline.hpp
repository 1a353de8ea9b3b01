// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "tuycover/io.hpp"
#include "tuycover/multi_roi.hpp"

namespace tuycover {

enum class Method { greedy, binary_greedy, exact, exact_worstcase, joint_exact, joint_greedy };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::greedy: return "greedy";
    case Method::binary_greedy: return "binary_greedy";
    case Method::exact: return "exact";
    case Method::exact_worstcase: return "exact_worstcase";
    case Method::joint_exact: return "joint_exact";
    case Method::joint_greedy: return "joint_greedy";
  }
  return "unknown";
}

inline Method method_from_string(const std::string& s) {
  if (s == "greedy") return Method::greedy;
  if (s == "binary_greedy") return Method::binary_greedy;
  if (s == "exact") return Method::exact;
  if (s == "exact_worstcase") return Method::exact_worstcase;
  if (s == "joint_exact") return Method::joint_exact;
  if (s == "joint_greedy") return Method::joint_greedy;
  throw config_error("unknown method: " + s);
}

inline OcclusionLevel occlusion_from_string(const std::string& s) {
  if (s == "none") return OcclusionLevel::none;
  if (s == "mild") return OcclusionLevel::mild;
  if (s == "moderate") return OcclusionLevel::moderate;
  if (s == "severe") return OcclusionLevel::severe;
  throw config_error("unknown occlusion level: " + s);
}

inline const char* to_string(OcclusionLevel level) {
  switch (level) {
    case OcclusionLevel::none: return "none";
    case OcclusionLevel::mild: return "mild";
    case OcclusionLevel::moderate: return "moderate";
    case OcclusionLevel::severe: return "severe";
  }
  return "unknown";
}

inline FusionWeighting weighting_from_string(const std::string& s) {
  if (s == "distance_weighted") return FusionWeighting::distance_weighted;
  if (s == "uniform") return FusionWeighting::uniform;
  if (s == "none") return FusionWeighting::none;
  throw config_error("unknown fusion weighting: " + s);
}

inline const char* to_string(FusionWeighting w) {
  switch (w) {
    case FusionWeighting::distance_weighted: return "distance_weighted";
    case FusionWeighting::uniform: return "uniform";
    case FusionWeighting::none: return "none";
  }
  return "unknown";
}

struct SceneConfig {
  PhantomPreset preset = PhantomPreset::block_with_voids;
  std::uint64_t seed = 7;
  OcclusionLevel occlusion = OcclusionLevel::none;
  std::array<int, 3> dims{64, 64, 64};
  double spacing_mm = 2.0;
};

struct GeometryConfig {
  double sid_mm = 2000.0;
  double sdd_mm = 4000.0;
  Detector detector{96, 96, 2.4, 4000.0};
  int num_candidates = 240;
};

struct ResolutionConfig {
  double f_min_mm = 2.0;
  std::optional<int> z_override = 500;
};

struct ValidityConfig {
  double eta = 0.25;
  double calibration_percentile = 0.95;
  std::optional<double> alpha_fixed;  // skips calibration when set
  bool per_roi_alpha = false;
};

struct FusionConfig {
  double d_fuse_mm = 0.0;
  FusionWeighting weighting = FusionWeighting::distance_weighted;
};

struct RunConfig {
  SceneConfig scene;
  GeometryConfig geometry;
  std::vector<Roi> rois{{Vec3{6.0, -4.0, 8.0}, 14.0}, {Vec3{-10.0, 6.0, -6.0}, 14.0}};
  ResolutionConfig resolution;
  ValidityConfig validity;
  Method method = Method::greedy;
  int k = 20;
  FusionConfig fusion;
  SolveOptions solver;
  std::string output_dir = "out";
  std::uint64_t master_seed = 7;
  double esr_quantile_p = 0.95;
  int esr_voxel_samples = 1;
};

inline RunConfig default_run_config() { return RunConfig{}; }

inline void validate(const RunConfig& config) {
  if (config.k < 1) throw config_error("budget k must be >= 1");
  if (config.rois.empty()) throw config_error("at least one ROI is required");
  if (!(config.geometry.sid_mm > 0.0) || !(config.geometry.sdd_mm > config.geometry.sid_mm))
    throw config_error("need 0 < SID < SDD");
  if (config.geometry.detector.n_u < 1 || config.geometry.detector.n_v < 1 ||
      !(config.geometry.detector.pitch_mm > 0.0))
    throw config_error("detector must have positive pixel counts and pitch");
  if (config.geometry.num_candidates < 1) throw config_error("need at least one candidate view");
  if (!(config.resolution.f_min_mm > 0.0)) throw config_error("f_min must be positive");
  if (!(config.validity.eta > 0.0 && config.validity.eta <= 1.0))
    throw config_error("eta must lie in (0,1]");
  if (!(config.validity.calibration_percentile > 0.0 &&
        config.validity.calibration_percentile < 1.0))
    throw config_error("calibration percentile must lie in (0,1)");
  if (config.validity.alpha_fixed &&
      !(*config.validity.alpha_fixed >= 0.0 && *config.validity.alpha_fixed <= 1.0))
    throw config_error("alpha must lie in [0,1]");
  if (config.fusion.d_fuse_mm < 0.0) throw config_error("d_fuse must be non-negative");
  if (!(config.solver.time_limit_s > 0.0) || !(config.solver.gap_limit > 0.0))
    throw config_error("solver limits must be positive");
  if (!(config.esr_quantile_p > 0.0 && config.esr_quantile_p < 1.0))
    throw config_error("ESR quantile must lie in (0,1)");
  if (config.esr_voxel_samples < 1) throw config_error("ESR voxel samples must be >= 1");
  const bool joint = config.method == Method::joint_exact || config.method == Method::joint_greedy;
  if (!joint && config.fusion.weighting == FusionWeighting::uniform)
    throw config_error("uniform fusion applies to joint methods only");
}

inline json to_json(const RunConfig& c) {
  json j;
  j["scene"] = {{"preset", "block_with_voids"},
                {"seed", c.scene.seed},
                {"occlusion", to_string(c.scene.occlusion)},
                {"dims", c.scene.dims},
                {"spacing_mm", c.scene.spacing_mm}};
  j["geometry"] = {{"sid_mm", c.geometry.sid_mm},
                   {"sdd_mm", c.geometry.sdd_mm},
                   {"detector",
                    {{"n_u", c.geometry.detector.n_u},
                     {"n_v", c.geometry.detector.n_v},
                     {"pitch_mm", c.geometry.detector.pitch_mm}}},
                   {"num_candidates", c.geometry.num_candidates}};
  j["rois"] = json::array();
  for (const Roi& roi : c.rois) j["rois"].push_back(to_json(roi));
  j["resolution"] = {{"f_min_mm", c.resolution.f_min_mm}};
  if (c.resolution.z_override) j["resolution"]["z_override"] = *c.resolution.z_override;
  j["validity"] = {{"eta", c.validity.eta},
                   {"calibration_percentile", c.validity.calibration_percentile},
                   {"per_roi_alpha", c.validity.per_roi_alpha}};
  if (c.validity.alpha_fixed) j["validity"]["alpha"] = *c.validity.alpha_fixed;
  j["method"] = to_string(c.method);
  j["budget"] = c.k;
  j["fusion"] = {{"d_fuse_mm", c.fusion.d_fuse_mm}, {"weighting", to_string(c.fusion.weighting)}};
  j["solver"] = {{"time_limit_s", c.solver.time_limit_s},
                 {"gap_limit", c.solver.gap_limit},
                 {"enum_cap", c.solver.enum_cap}};
  j["output_dir"] = c.output_dir;
  j["master_seed"] = c.master_seed;
  j["esr"] = {{"quantile_p", c.esr_quantile_p}, {"voxel_samples", c.esr_voxel_samples}};
  return j;
}

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  try {
    if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
    c.scene.seed = c.master_seed;
    if (j.contains("scene")) {
      const json& s = j.at("scene");
      if (s.contains("preset") && s.at("preset").get<std::string>() != "block_with_voids")
        throw config_error("unknown scene preset");
      if (s.contains("seed")) c.scene.seed = s.at("seed").get<std::uint64_t>();
      if (s.contains("occlusion"))
        c.scene.occlusion = occlusion_from_string(s.at("occlusion").get<std::string>());
      if (s.contains("dims")) {
        const auto dims = s.at("dims").get<std::vector<int>>();
        if (dims.size() != 3) throw config_error("scene dims must have 3 entries");
        c.scene.dims = {dims[0], dims[1], dims[2]};
      }
      if (s.contains("spacing_mm")) c.scene.spacing_mm = s.at("spacing_mm").get<double>();
    }
    if (j.contains("geometry")) {
      const json& g = j.at("geometry");
      if (g.contains("sid_mm")) c.geometry.sid_mm = g.at("sid_mm").get<double>();
      if (g.contains("sdd_mm")) c.geometry.sdd_mm = g.at("sdd_mm").get<double>();
      if (g.contains("detector")) {
        const json& d = g.at("detector");
        if (d.contains("n_u")) c.geometry.detector.n_u = d.at("n_u").get<int>();
        if (d.contains("n_v")) c.geometry.detector.n_v = d.at("n_v").get<int>();
        if (d.contains("pitch_mm")) c.geometry.detector.pitch_mm = d.at("pitch_mm").get<double>();
      }
      if (g.contains("num_candidates"))
        c.geometry.num_candidates = g.at("num_candidates").get<int>();
    }
    c.geometry.detector.sdd_mm = c.geometry.sdd_mm;
    if (j.contains("rois")) {
      c.rois.clear();
      for (const json& r : j.at("rois")) c.rois.push_back(roi_from_json(r));
    }
    if (j.contains("resolution")) {
      const json& r = j.at("resolution");
      if (r.contains("f_min_mm")) c.resolution.f_min_mm = r.at("f_min_mm").get<double>();
      if (r.contains("z_override")) {
        if (r.at("z_override").is_null())
          c.resolution.z_override.reset();
        else
          c.resolution.z_override = r.at("z_override").get<int>();
      }
    }
    if (j.contains("validity")) {
      const json& v = j.at("validity");
      if (v.contains("eta")) c.validity.eta = v.at("eta").get<double>();
      if (v.contains("calibration_percentile"))
        c.validity.calibration_percentile = v.at("calibration_percentile").get<double>();
      if (v.contains("alpha") && !v.at("alpha").is_null())
        c.validity.alpha_fixed = v.at("alpha").get<double>();
      if (v.contains("per_roi_alpha")) c.validity.per_roi_alpha = v.at("per_roi_alpha").get<bool>();
    }
    if (j.contains("method")) c.method = method_from_string(j.at("method").get<std::string>());
    if (j.contains("budget")) c.k = j.at("budget").get<int>();
    if (j.contains("fusion")) {
      const json& f = j.at("fusion");
      if (f.contains("d_fuse_mm")) c.fusion.d_fuse_mm = f.at("d_fuse_mm").get<double>();
      if (f.contains("weighting"))
        c.fusion.weighting = weighting_from_string(f.at("weighting").get<std::string>());
    }
    if (j.contains("solver")) {
      const json& s = j.at("solver");
      if (s.contains("time_limit_s")) c.solver.time_limit_s = s.at("time_limit_s").get<double>();
      if (s.contains("gap_limit")) c.solver.gap_limit = s.at("gap_limit").get<double>();
      if (s.contains("enum_cap")) c.solver.enum_cap = s.at("enum_cap").get<std::uint64_t>();
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("esr")) {
      const json& e = j.at("esr");
      if (e.contains("quantile_p")) c.esr_quantile_p = e.at("quantile_p").get<double>();
      if (e.contains("voxel_samples")) c.esr_voxel_samples = e.at("voxel_samples").get<int>();
    }
  } catch (const json::exception& e) {
    throw config_error(std::string("malformed config: ") + e.what());
  }
  validate(c);
  return c;
}

// -- shared construction with content-keyed caching -------------------------

namespace detail {

struct PipelineCache {
  std::map<std::string, VoxelVolume> volumes;
  std::map<std::string, std::vector<RoiPatch>> patches;
  std::map<std::string, double> alphas;
};

inline std::string scene_key(const RunConfig& c, OcclusionLevel level) {
  json j{{"seed", c.scene.seed},
         {"dims", c.scene.dims},
         {"spacing", c.scene.spacing_mm},
         {"occlusion", to_string(level)}};
  return j.dump();
}

inline std::string patch_key(const RunConfig& c, OcclusionLevel level, const Roi& roi) {
  json j{{"scene", scene_key(c, level)},
         {"sid", c.geometry.sid_mm},
         {"sdd", c.geometry.sdd_mm},
         {"det", {c.geometry.detector.n_u, c.geometry.detector.n_v, c.geometry.detector.pitch_mm}},
         {"m", c.geometry.num_candidates},
         {"roi", {roi.center_mm.x, roi.center_mm.y, roi.center_mm.z, roi.radius_mm}}};
  return j.dump();
}

inline const VoxelVolume& cached_volume(PipelineCache& cache, const RunConfig& c,
                                        OcclusionLevel level) {
  const std::string key = scene_key(c, level);
  auto it = cache.volumes.find(key);
  if (it != cache.volumes.end()) return it->second;
  VoxelVolume vol = generate_phantom(c.scene.seed, c.scene.preset, c.scene.dims, c.scene.spacing_mm);
  if (level != OcclusionLevel::none) vol = apply_occlusion(vol, level, c.scene.seed);
  return cache.volumes.emplace(key, std::move(vol)).first->second;
}

inline const std::vector<RoiPatch>& cached_patches(PipelineCache& cache, const RunConfig& c,
                                                   OcclusionLevel level, const SourceSet& sources,
                                                   const Roi& roi) {
  const std::string key = patch_key(c, level, roi);
  auto it = cache.patches.find(key);
  if (it != cache.patches.end()) return it->second;
  const VoxelVolume& vol = cached_volume(cache, c, level);
  std::vector<RoiPatch> patches =
      project_all_patches(vol, c.geometry.detector, Vec3{}, sources, roi);
  return cache.patches.emplace(key, std::move(patches)).first->second;
}

/// Alpha protocol: fixed value if configured, else the percentile of the
/// unoccluded baseline, held fixed across occlusion levels. Pooled over
/// all ROIs by default; per-ROI thresholds on request.
inline double pooled_alpha(PipelineCache& cache, const RunConfig& c, const SourceSet& sources,
                           const std::vector<Roi>& rois) {
  json key_json{{"patches", json::array()},
                {"percentile", c.validity.calibration_percentile}};
  for (const Roi& roi : rois)
    key_json["patches"].push_back(patch_key(c, OcclusionLevel::none, roi));
  const std::string key = key_json.dump();
  auto it = cache.alphas.find(key);
  if (it != cache.alphas.end()) return it->second;
  std::vector<double> pooled;
  for (const Roi& roi : rois) {
    const auto& patches = cached_patches(cache, c, OcclusionLevel::none, sources, roi);
    for (const RoiPatch& patch : patches)
      pooled.insert(pooled.end(), patch.absorption.begin(), patch.absorption.end());
  }
  if (pooled.empty()) throw calibration_error("no pixels available for alpha calibration");
  const double alpha = nearest_rank_quantile(std::move(pooled), c.validity.calibration_percentile);
  return cache.alphas.emplace(key, alpha).first->second;
}

/// One threshold per ROI; all entries coincide unless per_roi_alpha is set.
inline std::vector<double> resolve_alphas(PipelineCache& cache, const RunConfig& c,
                                          const SourceSet& sources,
                                          const std::vector<Roi>& rois) {
  std::vector<double> alphas;
  if (c.validity.alpha_fixed) {
    alphas.assign(rois.size(), *c.validity.alpha_fixed);
  } else if (c.validity.per_roi_alpha) {
    for (const Roi& roi : rois) alphas.push_back(pooled_alpha(cache, c, sources, {roi}));
  } else {
    alphas.assign(rois.size(), pooled_alpha(cache, c, sources, rois));
  }
  return alphas;
}

struct RoiArtifacts {
  Roi roi;
  std::shared_ptr<const DirectionGrid> grid;
  std::shared_ptr<const ValidityMask> mask;
  std::shared_ptr<const CoverageMatrix> soft;
  std::shared_ptr<const CoverageMatrix> binary;
  int z_formula = 0;
};

inline RoiArtifacts build_roi_artifacts(PipelineCache& cache, const RunConfig& c,
                                        OcclusionLevel level, const SourceSet& sources,
                                        const Roi& roi, double alpha) {
  RoiArtifacts art;
  art.roi = roi;
  art.z_formula = required_directions(c.resolution.f_min_mm, roi.radius_mm);
  art.grid = std::make_shared<DirectionGrid>(
      make_direction_grid(c.resolution.f_min_mm, roi.radius_mm, c.resolution.z_override));
  const auto& patches = cached_patches(cache, c, level, sources, roi);
  art.mask = std::make_shared<ValidityMask>(mask_from_patches(patches, alpha, c.validity.eta));
  art.soft = std::make_shared<CoverageMatrix>(
      build_matrix(MatrixFlavor::soft, sources, roi, art.grid, art.mask));
  art.binary = std::make_shared<CoverageMatrix>(
      build_matrix(MatrixFlavor::binary, sources, roi, art.grid, art.mask));
  return art;
}

inline json validity_json(const ValidityMask& mask) {
  int n_geo = 0, n_att = 0;
  for (int i = 0; i < mask.size(); ++i) {
    if (!mask.geometric_ok[static_cast<std::size_t>(i)])
      ++n_geo;
    else if (!mask.valid[static_cast<std::size_t>(i)])
      ++n_att;
  }
  return json{{"mean_validity", mask.mean_validity()},
              {"n_valid", mask.count_valid()},
              {"n_excluded_geometric", n_geo},
              {"n_excluded_attenuation", n_att}};
}

}  // namespace detail

/// Everything cmd_plan produces: the JSON report plus the in-memory pieces
/// tests and callers reuse.
struct RunReport {
  json report;
  RunConfig config;
  std::vector<Selection> selections;          // one per ROI (single-ROI methods)
  std::vector<ExactResult> certificates;      // exact methods
  std::vector<WorstCaseResult> worstcase;     // exact_worstcase
  std::vector<CoverageReadout> readouts;
  std::vector<EsrReport> esr;
  std::vector<std::string> sphere_maps;       // per ROI/cluster gap CSV
};

/// Full pipeline for one configuration: scene -> validity -> matrices ->
/// selection -> readouts + ESR, persisted under config.output_dir.
inline RunReport run_plan(const RunConfig& config, bool persist = true) {
  validate(config);
  const auto t0 = std::chrono::steady_clock::now();
  const auto lap = [&t0]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  detail::PipelineCache cache;
  RunReport out;
  out.config = config;
  json& report = out.report;
  report["config"] = to_json(config);

  const SourceSet sources =
      fibonacci_source_sphere(config.geometry.num_candidates, config.geometry.sid_mm, Vec3{});

  {
    Scene scene;
    scene.volume = detail::cached_volume(cache, config, config.scene.occlusion);
    scene.detector = config.geometry.detector;
    scene.rois = config.rois;
    validate_rois(scene);
  }
  const double t_scene = lap();

  const std::vector<double> alphas = detail::resolve_alphas(cache, config, sources, config.rois);
  if (config.validity.per_roi_alpha && !config.validity.alpha_fixed) {
    report["alpha_per_roi"] = alphas;
    report["alpha_source"] = "calibrated_per_roi";
  } else {
    report["alpha"] = alphas.front();
    report["alpha_source"] = config.validity.alpha_fixed ? "fixed" : "calibrated";
  }
  const double t_alpha = lap();

  const bool joint =
      config.method == Method::joint_exact || config.method == Method::joint_greedy;

  std::vector<detail::RoiArtifacts> artifacts;
  for (std::size_t r = 0; r < config.rois.size(); ++r)
    artifacts.push_back(detail::build_roi_artifacts(cache, config, config.scene.occlusion, sources,
                                                    config.rois[r], alphas[r]));

  double mean_validity = 0.0;
  json validity_summary = json::array();
  for (const auto& art : artifacts) {
    validity_summary.push_back(detail::validity_json(*art.mask));
    mean_validity += art.mask->mean_validity();
  }
  mean_validity /= static_cast<double>(artifacts.size());
  report["validity"] = {{"mean_roi_validity", mean_validity}, {"per_roi", validity_summary}};
  const double t_validity = lap();

  for (const auto& art : artifacts)
    if (art.mask->count_valid() == 0)
      throw infeasible_scene("an ROI has zero valid candidate views");

  std::filesystem::path outdir(config.output_dir);
  if (persist) std::filesystem::create_directories(outdir);

  const auto persist_matrix = [&](const CoverageMatrix& matrix, const std::string& name) {
    if (!persist) return std::string{};
    const std::string file = name + ".csv";
    write_text_file((outdir / file).string(), matrix_to_csv(matrix));
    return file;
  };

  if (!joint) {
    report["results"] = json::array();
    for (std::size_t r = 0; r < artifacts.size(); ++r) {
      const auto& art = artifacts[r];
      json entry;
      entry["roi_index"] = r;
      entry["roi"] = to_json(art.roi);
      entry["z_formula"] = art.z_formula;
      entry["z_used"] = art.grid->size();
      entry["theta_max_rad"] = art.grid->tolerance_rad;
      entry["validity"] = detail::validity_json(*art.mask);

      Selection sel;
      switch (config.method) {
        case Method::greedy:
          sel = greedy_select(*art.soft, config.k);
          break;
        case Method::binary_greedy:
          sel = binary_greedy_select(*art.binary, config.k);
          break;
        case Method::exact: {
          const Selection warm = greedy_select(*art.soft, config.k);
          const ExactResult res = exact_select(*art.soft, config.k, config.solver, &warm);
          sel.chosen = res.chosen;
          sel.objective = res.objective;
          sel.budget = config.k;
          sel.flavor = MatrixFlavor::soft;
          entry["certificate"] = to_json(res);
          out.certificates.push_back(res);
          break;
        }
        case Method::exact_worstcase: {
          const WorstCaseResult res =
              exact_worstcase_select(*art.soft, config.k, true, config.solver);
          sel.chosen = res.chosen;
          sel.objective = evaluate_objective(*art.soft, res.chosen);
          sel.budget = config.k;
          sel.flavor = MatrixFlavor::soft;
          entry["worstcase"] = to_json(res);
          out.worstcase.push_back(res);
          break;
        }
        default:
          throw config_error("joint methods handle all ROIs at once");
      }
      entry["selection"] = to_json(sel);
      entry["unused_budget"] = config.k - static_cast<int>(sel.chosen.size());

      CoverageReadout ro = readout(sel.chosen, *art.soft, art.binary.get());
      ro.selection_flavor = sel.flavor;
      entry["readout"] = to_json(ro);

      const EsrReport esr = esr_report(sel.chosen, sources, art.roi, *art.grid, *art.mask,
                                        config.esr_quantile_p, config.esr_voxel_samples);
      entry["esr"] = to_json(esr, art.grid.get());

      std::vector<Vec3> dirs;
      for (const Direction& d : art.grid->directions) dirs.push_back(d.unit);
      out.sphere_maps.push_back(sphere_map_csv(dirs, esr.per_direction_gap_rad,
                                               art.grid->tolerance_rad));
      if (persist) {
        const std::string file = "gaps_roi" + std::to_string(r) + ".csv";
        write_text_file((outdir / file).string(),
                        esr_gaps_csv(dirs, esr.per_direction_gap_rad));
        entry["files"] = {{"gaps_csv", file},
                          {"matrix_soft", persist_matrix(*art.soft, "matrix_soft_roi" + std::to_string(r))},
                          {"matrix_binary",
                           persist_matrix(*art.binary, "matrix_binary_roi" + std::to_string(r))}};
      }

      out.selections.push_back(sel);
      out.readouts.push_back(ro);
      out.esr.push_back(esr);
      report["results"].push_back(entry);
    }
  } else {
    const auto member_mask = [&](const Roi& roi) {
      for (const auto& art : artifacts)
        if (art.roi.center_mm == roi.center_mm && art.roi.radius_mm == roi.radius_mm)
          return *art.mask;
      throw invalid_parameter("unknown member ROI");
    };
    JointInstance instance = build_joint_instance(
        config.rois, config.fusion.d_fuse_mm, config.fusion.weighting, config.k, sources,
        config.resolution.f_min_mm, config.resolution.z_override, member_mask);

    for (const Cluster& cl : instance.clusters)
      if (cl.matrix->mask->count_valid() == 0)
        throw infeasible_scene("a cluster has zero valid candidate views");

    json jclusters = json::array();
    Selection sel;
    std::vector<double> per_cluster;
    if (config.method == Method::joint_greedy) {
      sel = joint_greedy_select(instance, config.k);
      evaluate_joint_objective(instance, sel.chosen, &per_cluster);
    } else {
      const Selection warm = joint_greedy_select(instance, config.k);
      const ExactResult res = joint_exact_select(instance, config.solver, &warm);
      sel.chosen = res.chosen;
      sel.objective = res.objective;
      sel.budget = config.k;
      sel.flavor = MatrixFlavor::soft;
      per_cluster = res.per_cluster_objective;
      report["joint"]["certificate"] = to_json(res);
      out.certificates.push_back(res);
    }
    report["joint"]["selection"] = to_json(sel);
    out.selections.push_back(sel);

    for (std::size_t ci = 0; ci < instance.clusters.size(); ++ci) {
      const Cluster& cl = instance.clusters[ci];
      json jc;
      jc["members"] = cl.members;
      jc["centroid_mm"] = to_json(cl.centroid_mm);
      jc["effective_radius_mm"] = cl.effective_radius_mm;
      jc["weight"] = cl.weight;
      jc["z_used"] = cl.matrix->z;
      jc["z_formula"] = required_directions(config.resolution.f_min_mm, cl.effective_radius_mm);
      jc["objective"] = per_cluster.size() > ci ? per_cluster[ci] : 0.0;
      jc["validity"] = detail::validity_json(*cl.matrix->mask);

      const Roi cluster_roi{cl.centroid_mm, cl.effective_radius_mm};
      const EsrReport esr = esr_report(sel.chosen, sources, cluster_roi, *cl.matrix->grid,
                                        *cl.matrix->mask, config.esr_quantile_p,
                                        config.esr_voxel_samples);
      jc["esr"] = to_json(esr, cl.matrix->grid.get());
      out.esr.push_back(esr);

      std::vector<Vec3> dirs;
      for (const Direction& d : cl.matrix->grid->directions) dirs.push_back(d.unit);
      out.sphere_maps.push_back(sphere_map_csv(dirs, esr.per_direction_gap_rad,
                                               cl.matrix->grid->tolerance_rad));
      if (persist) {
        const std::string file = "gaps_cluster" + std::to_string(ci) + ".csv";
        write_text_file((outdir / file).string(),
                        esr_gaps_csv(dirs, esr.per_direction_gap_rad));
        jc["files"] = {{"gaps_csv", file},
                       {"matrix_soft",
                        persist_matrix(*cl.matrix, "matrix_soft_cluster" + std::to_string(ci))}};
      }
      jclusters.push_back(jc);
    }
    report["joint"]["clusters"] = jclusters;
    report["joint"]["weighting"] = to_string(config.fusion.weighting);
  }

  report["timings"] = {{"scene_s", t_scene},
                       {"alpha_s", t_alpha - t_scene},
                       {"validity_s", t_validity - t_alpha},
                       {"total_s", lap()}};
  if (persist) write_text_file((outdir / "report.json").string(), report.dump(2) + "\n");
  return out;
}

// -- sweep -------------------------------------------------------------------

struct SweepCell {
  int k = 0;
  OcclusionLevel occlusion = OcclusionLevel::none;
  Method method = Method::greedy;
  int roi_index = 0;
  bool failed = false;
  std::string failure;
  double mean_validity = 0.0;
  int n_valid = 0;
  CoverageReadout readout;
  double objective = 0.0;
  double esr_mean_mm = 0.0;
  double esr_quantile_mm = 0.0;
  double upper_bound = 0.0;
  double gap = 0.0;
  std::string status = "-";
  double ratio_to_exact = 0.0;  // greedy objective / exact objective, same cell
  double wall_ms = 0.0;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // ordered by (k, occlusion, method, roi)
  std::string csv;
};

/// Cross-product study over budgets, occlusion levels, and single-ROI
/// methods. Matrices are cached per (scene, ROI); alpha is calibrated once
/// on the unoccluded baseline and held fixed, matching cmd_plan.
inline SweepResult run_sweep(const RunConfig& base, const std::vector<int>& k_list,
                             const std::vector<OcclusionLevel>& occlusion_list,
                             const std::vector<Method>& methods) {
  validate(base);
  if (k_list.empty() || occlusion_list.empty() || methods.empty())
    throw config_error("sweep lists must be non-empty");
  for (Method m : methods)
    if (m == Method::joint_exact || m == Method::joint_greedy)
      throw config_error("sweep covers single-ROI methods; use plan for joint methods");
  for (int k : k_list)
    if (k < 1) throw config_error("budgets must be >= 1");

  const SourceSet sources =
      fibonacci_source_sphere(base.geometry.num_candidates, base.geometry.sid_mm, Vec3{});

  detail::PipelineCache cache;
  const std::vector<double> alphas = detail::resolve_alphas(cache, base, sources, base.rois);

  // Artifacts per (occlusion, roi), built serially so the cache stays simple.
  std::map<std::pair<int, int>, detail::RoiArtifacts> artifacts;
  for (OcclusionLevel level : occlusion_list)
    for (std::size_t r = 0; r < base.rois.size(); ++r)
      artifacts.emplace(std::make_pair(static_cast<int>(level), static_cast<int>(r)),
                        detail::build_roi_artifacts(cache, base, level, sources,
                                                    base.rois[r], alphas[r]));

  struct CellSpec {
    int k;
    OcclusionLevel level;
    Method method;
    int roi;
  };
  std::vector<CellSpec> specs;
  for (int k : k_list)
    for (OcclusionLevel level : occlusion_list)
      for (Method method : methods)
        for (std::size_t r = 0; r < base.rois.size(); ++r)
          specs.push_back({k, level, method, static_cast<int>(r)});

  std::vector<SweepCell> cells(specs.size());
  parallel_for(specs.size(), [&](std::size_t idx) {
    const CellSpec& spec = specs[idx];
    SweepCell& cell = cells[idx];
    cell.k = spec.k;
    cell.occlusion = spec.level;
    cell.method = spec.method;
    cell.roi_index = spec.roi;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const detail::RoiArtifacts& art =
          artifacts.at({static_cast<int>(spec.level), spec.roi});
      cell.mean_validity = art.mask->mean_validity();
      cell.n_valid = art.mask->count_valid();
      if (cell.n_valid == 0) throw infeasible_scene("ROI has zero valid candidates");

      Selection sel;
      switch (spec.method) {
        case Method::greedy:
          sel = greedy_select(*art.soft, spec.k);
          break;
        case Method::binary_greedy:
          sel = binary_greedy_select(*art.binary, spec.k);
          break;
        case Method::exact: {
          const Selection warm = greedy_select(*art.soft, spec.k);
          const ExactResult res = exact_select(*art.soft, spec.k, base.solver, &warm);
          sel.chosen = res.chosen;
          sel.objective = res.objective;
          sel.flavor = MatrixFlavor::soft;
          cell.upper_bound = res.upper_bound;
          cell.gap = res.gap;
          cell.status = to_string(res.status);
          break;
        }
        case Method::exact_worstcase: {
          const WorstCaseResult res = exact_worstcase_select(*art.soft, spec.k, true, base.solver);
          sel.chosen = res.chosen;
          sel.objective = evaluate_objective(*art.soft, res.chosen);
          sel.flavor = MatrixFlavor::soft;
          cell.status = to_string(res.status);
          break;
        }
        default:
          throw config_error("unsupported sweep method");
      }
      sel.budget = spec.k;
      cell.objective = sel.objective;
      cell.readout = readout(sel.chosen, *art.soft, art.binary.get());
      const EsrReport esr = esr_report(sel.chosen, sources, art.roi, *art.grid, *art.mask,
                                        base.esr_quantile_p, 1);
      cell.esr_mean_mm = esr.esr_mean_mm;
      cell.esr_quantile_mm = esr.esr_quantile_mm;
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.failure = e.what();
    }
    cell.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });

  // Greedy/exact objective ratio joined on (k, occlusion, roi).
  std::map<std::tuple<int, int, int>, double> exact_obj;
  for (const SweepCell& cell : cells)
    if (cell.method == Method::exact && !cell.failed)
      exact_obj[{cell.k, static_cast<int>(cell.occlusion), cell.roi_index}] = cell.objective;
  for (SweepCell& cell : cells) {
    if (cell.method != Method::greedy || cell.failed) continue;
    const auto it = exact_obj.find({cell.k, static_cast<int>(cell.occlusion), cell.roi_index});
    if (it != exact_obj.end() && it->second > 0.0) cell.ratio_to_exact = cell.objective / it->second;
  }

  std::sort(cells.begin(), cells.end(), [](const SweepCell& a, const SweepCell& b) {
    return std::tuple{a.k, static_cast<int>(a.occlusion), static_cast<int>(a.method),
                      a.roi_index} <
           std::tuple{b.k, static_cast<int>(b.occlusion), static_cast<int>(b.method),
                      b.roi_index};
  });

  SweepResult result;
  std::ostringstream csv;
  csv << "k,occlusion,method,roi,n_valid,mean_validity,binary_tuy,soft_tuy,saturated,objective,"
         "esr_mean_mm,esr_q_mm,upper_bound,gap,status,ratio_to_exact,error,wall_ms\n";
  for (const SweepCell& cell : cells) {
    csv << cell.k << ',' << to_string(cell.occlusion) << ',' << to_string(cell.method) << ','
        << cell.roi_index << ',' << cell.n_valid << ',' << format_double(cell.mean_validity)
        << ',' << format_double(cell.readout.binary_tuy) << ','
        << format_double(cell.readout.soft_tuy) << ',' << format_double(cell.readout.saturated)
        << ',' << format_double(cell.objective) << ',' << format_double(cell.esr_mean_mm) << ','
        << format_double(cell.esr_quantile_mm) << ',' << format_double(cell.upper_bound) << ','
        << format_double(cell.gap) << ',' << cell.status << ','
        << format_double(cell.ratio_to_exact) << ',' << (cell.failed ? cell.failure : "") << ','
        << format_double(cell.wall_ms) << '\n';
  }
  result.csv = csv.str();
  result.cells = std::move(cells);
  return result;
}

// -- sphere map export from a persisted report --------------------------------

/// Re-emits the (lon, lat, gap) CSV for one ROI (or cluster) section of a
/// plan report. The report must carry the per-direction gaps and grid.
inline std::string export_sphere_map(const json& report, int roi_index) {
  const json* entry = nullptr;
  if (report.contains("results")) {
    const json& results = report.at("results");
    if (roi_index < 0 || roi_index >= static_cast<int>(results.size()))
      throw config_error("roi index out of range for this report");
    entry = &results.at(static_cast<std::size_t>(roi_index));
  } else if (report.contains("joint")) {
    const json& clusters = report.at("joint").at("clusters");
    if (roi_index < 0 || roi_index >= static_cast<int>(clusters.size()))
      throw config_error("cluster index out of range for this report");
    entry = &clusters.at(static_cast<std::size_t>(roi_index));
  } else {
    throw config_error("report carries no results section");
  }
  if (!entry->contains("esr")) throw config_error("report entry has no ESR section");
  const json& esr = entry->at("esr");
  if (!esr.contains("directions") || !esr.contains("per_direction_gap_rad"))
    throw config_error("ESR section lacks per-direction data");
  std::vector<Vec3> dirs;
  for (const json& d : esr.at("directions")) dirs.push_back(vec3_from_json(d));
  const auto gaps = esr.at("per_direction_gap_rad").get<std::vector<double>>();
  const double theta = esr.at("tolerance_rad").get<double>();
  return sphere_map_csv(dirs, gaps, theta);
}

}  // namespace tuycover
