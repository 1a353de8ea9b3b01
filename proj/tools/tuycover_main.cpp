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

// Command-line front end: plan one selection run, sweep a study grid,
// exercise the set-cover reductions, export sphere maps, or generate and
// calibrate scenes. Exit codes: 0 ok, 2 config error, 3 infeasible scene,
// 4 solver limit without a feasible incumbent.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tuycover/pipeline.hpp"

namespace {

using tuycover::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNoIncumbent = 4;

void print_error(const std::string& type, const std::string& message) {
  json err{{"error", {{"type", type}, {"message", message}}}};
  std::cout << err.dump() << "\n";
}

struct ConfigFlags {
  std::string config_file;
  std::optional<std::string> method, occlusion, weighting, out_dir;
  std::optional<int> k, m, z_override, det_n, esr_voxel_samples;
  std::optional<std::uint64_t> seed;
  bool per_roi_alpha = false;
  std::optional<double> f_min, eta, alpha, percentile, sid, sdd, det_pitch, d_fuse, time_limit,
      gap_limit;
  std::vector<std::string> roi_specs;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
  cmd->add_option("--config", flags.config_file, "JSON config file");
  cmd->add_option("--method", flags.method,
                  "greedy|binary_greedy|exact|exact_worstcase|joint_exact|joint_greedy");
  cmd->add_option("--k", flags.k, "projection budget");
  cmd->add_option("--seed", flags.seed, "master seed");
  cmd->add_option("--occlusion", flags.occlusion, "none|mild|moderate|severe");
  cmd->add_option("--m", flags.m, "candidate view count");
  cmd->add_option("--f-min", flags.f_min, "target feature size [mm]");
  cmd->add_option("--z", flags.z_override, "direction grid override");
  cmd->add_option("--eta", flags.eta, "max fraction of over-threshold patch pixels");
  cmd->add_option("--alpha", flags.alpha, "fixed absorption threshold (skips calibration)");
  cmd->add_option("--percentile", flags.percentile, "alpha calibration percentile");
  cmd->add_flag("--per-roi-alpha", flags.per_roi_alpha, "calibrate one threshold per ROI");
  cmd->add_option("--sid", flags.sid, "source-to-isocenter distance [mm]");
  cmd->add_option("--sdd", flags.sdd, "source-to-detector distance [mm]");
  cmd->add_option("--det-n", flags.det_n, "detector pixels per side");
  cmd->add_option("--det-pitch", flags.det_pitch, "detector pixel pitch [mm]");
  cmd->add_option("--roi", flags.roi_specs, "ROI as x,y,z,r [mm]; repeatable")->delimiter(';');
  cmd->add_option("--d-fuse", flags.d_fuse, "cluster fusion distance [mm]");
  cmd->add_option("--weighting", flags.weighting, "distance_weighted|uniform|none");
  cmd->add_option("--time-limit", flags.time_limit, "solver time limit [s]");
  cmd->add_option("--gap-limit", flags.gap_limit, "solver relative gap limit");
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--esr-voxel-samples", flags.esr_voxel_samples,
                  "ESR evaluation points inside the ROI");
}

tuycover::RunConfig resolve_config(const ConfigFlags& flags) {
  tuycover::RunConfig config;
  if (!flags.config_file.empty())
    config = tuycover::config_from_json(json::parse(tuycover::read_text_file(flags.config_file)));
  if (flags.seed) {
    config.master_seed = *flags.seed;
    config.scene.seed = *flags.seed;
  }
  if (flags.method) config.method = tuycover::method_from_string(*flags.method);
  if (flags.k) config.k = *flags.k;
  if (flags.occlusion) config.scene.occlusion = tuycover::occlusion_from_string(*flags.occlusion);
  if (flags.m) config.geometry.num_candidates = *flags.m;
  if (flags.f_min) config.resolution.f_min_mm = *flags.f_min;
  if (flags.z_override) config.resolution.z_override = *flags.z_override;
  if (flags.eta) config.validity.eta = *flags.eta;
  if (flags.alpha) config.validity.alpha_fixed = *flags.alpha;
  if (flags.percentile) config.validity.calibration_percentile = *flags.percentile;
  if (flags.per_roi_alpha) config.validity.per_roi_alpha = true;
  if (flags.sid) config.geometry.sid_mm = *flags.sid;
  if (flags.sdd) {
    config.geometry.sdd_mm = *flags.sdd;
    config.geometry.detector.sdd_mm = *flags.sdd;
  }
  if (flags.det_n) {
    config.geometry.detector.n_u = *flags.det_n;
    config.geometry.detector.n_v = *flags.det_n;
  }
  if (flags.det_pitch) config.geometry.detector.pitch_mm = *flags.det_pitch;
  if (!flags.roi_specs.empty()) {
    config.rois.clear();
    for (const std::string& spec : flags.roi_specs) {
      tuycover::Vec3 c;
      double r = 0.0;
      if (std::sscanf(spec.c_str(), "%lf,%lf,%lf,%lf", &c.x, &c.y, &c.z, &r) != 4)
        throw tuycover::config_error("ROI spec must be x,y,z,r: " + spec);
      config.rois.push_back({c, r});
    }
  }
  if (flags.d_fuse) config.fusion.d_fuse_mm = *flags.d_fuse;
  if (flags.weighting) config.fusion.weighting = tuycover::weighting_from_string(*flags.weighting);
  if (flags.time_limit) config.solver.time_limit_s = *flags.time_limit;
  if (flags.gap_limit) config.solver.gap_limit = *flags.gap_limit;
  if (flags.out_dir) config.output_dir = *flags.out_dir;
  if (flags.esr_voxel_samples) config.esr_voxel_samples = *flags.esr_voxel_samples;
  tuycover::validate(config);
  return config;
}

int run_with_exit_codes(const std::function<int()>& body) {
  try {
    return body();
  } catch (const tuycover::config_error& e) {
    print_error("config", e.what());
    return kExitConfig;
  } catch (const tuycover::infeasible_scene& e) {
    print_error("infeasible_scene", e.what());
    return kExitInfeasible;
  } catch (const CLI::ParseError&) {
    throw;
  } catch (const std::exception& e) {
    print_error("runtime", e.what());
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ROI-focused CBCT view selection: Tuy coverage optimization and diagnostics"};
  app.require_subcommand(1);

  ConfigFlags plan_flags;
  CLI::App* plan = app.add_subcommand("plan", "run the full selection pipeline once");
  add_config_flags(plan, plan_flags);

  ConfigFlags sweep_flags;
  std::vector<int> sweep_ks{20, 60, 100};
  std::vector<std::string> sweep_occlusions{"none"};
  std::vector<std::string> sweep_methods{"greedy"};
  std::string sweep_out = "sweep.csv";
  CLI::App* sweep = app.add_subcommand("sweep", "cross-product study grid to CSV");
  add_config_flags(sweep, sweep_flags);
  sweep->add_option("--k-list", sweep_ks, "budgets")->delimiter(',');
  sweep->add_option("--occlusion-list", sweep_occlusions, "occlusion levels")->delimiter(',');
  sweep->add_option("--methods", sweep_methods, "methods")->delimiter(',');
  sweep->add_option("--csv", sweep_out, "output CSV path");

  std::string reduce_file;
  int reduce_count = 1000;
  std::uint64_t reduce_seed = 0;
  int reduce_n_max = 10, reduce_m_max = 10, reduce_k_max = 4;
  double reduce_density = 0.35;
  CLI::App* reduce = app.add_subcommand("reduce", "set-cover reduction equivalence checks");
  reduce->add_option("--file", reduce_file, "JSON set-cover instance to check");
  reduce->add_option("--count", reduce_count, "number of random instances");
  reduce->add_option("--seed", reduce_seed, "base seed");
  reduce->add_option("--n-max", reduce_n_max, "max universe size");
  reduce->add_option("--m-max", reduce_m_max, "max subset count");
  reduce->add_option("--k-max", reduce_k_max, "max budget");
  reduce->add_option("--density", reduce_density, "element membership probability");

  std::string map_report, map_out;
  int map_roi = 0;
  CLI::App* sphere = app.add_subcommand("export-sphere-map", "per-direction gap CSV from a report");
  sphere->add_option("--report", map_report, "report.json from a plan run")->required();
  sphere->add_option("--roi-index", map_roi, "ROI (or cluster) index");
  sphere->add_option("--out", map_out, "output CSV path");

  ConfigFlags scene_flags;
  std::string scene_out = "scene";
  CLI::App* scene_gen = app.add_subcommand("scene-gen", "write the phantom volume to disk");
  add_config_flags(scene_gen, scene_flags);
  scene_gen->add_option("--volume-out", scene_out, "output base path (.json/.raw)");

  ConfigFlags calib_flags;
  CLI::App* calibrate = app.add_subcommand("calibrate-alpha", "print the calibrated threshold");
  add_config_flags(calibrate, calib_flags);

  CLI11_PARSE(app, argc, argv);

  if (plan->parsed()) {
    return run_with_exit_codes([&]() {
      const tuycover::RunConfig config = resolve_config(plan_flags);
      const tuycover::RunReport report = tuycover::run_plan(config);
      for (const tuycover::ExactResult& cert : report.certificates)
        if (cert.status == tuycover::SolveStatus::time_limit && cert.chosen.empty())
          return kExitNoIncumbent;
      std::cout << report.report.dump(2) << "\n";
      return kExitOk;
    });
  }

  if (sweep->parsed()) {
    return run_with_exit_codes([&]() {
      const tuycover::RunConfig config = resolve_config(sweep_flags);
      std::vector<tuycover::OcclusionLevel> levels;
      for (const std::string& s : sweep_occlusions)
        levels.push_back(tuycover::occlusion_from_string(s));
      std::vector<tuycover::Method> methods;
      for (const std::string& s : sweep_methods)
        methods.push_back(tuycover::method_from_string(s));
      const tuycover::SweepResult result = tuycover::run_sweep(config, sweep_ks, levels, methods);
      tuycover::write_text_file(sweep_out, result.csv);
      int failures = 0;
      for (const auto& cell : result.cells) failures += cell.failed ? 1 : 0;
      std::cout << json{{"cells", result.cells.size()},
                        {"failed_cells", failures},
                        {"csv", sweep_out}}
                       .dump()
                << "\n";
      return kExitOk;
    });
  }

  if (reduce->parsed()) {
    return run_with_exit_codes([&]() {
      if (!reduce_file.empty()) {
        const tuycover::SetCoverInstance sc =
            tuycover::setcover_from_json(json::parse(tuycover::read_text_file(reduce_file)));
        const tuycover::EquivalenceOutcome outcome = tuycover::check_reduction_equivalence(sc);
        std::cout << json{{"setcover", outcome.setcover},
                          {"cttop", outcome.cttop},
                          {"binary_directional", outcome.binary_directional},
                          {"soft_directional", outcome.soft_directional},
                          {"agree", outcome.all_agree()}}
                         .dump()
                  << "\n";
        return outcome.all_agree() ? kExitOk : 1;
      }
      tuycover::RandomSetCoverParams params;
      params.n_max = reduce_n_max;
      params.m_max = reduce_m_max;
      params.k_max = reduce_k_max;
      params.density = reduce_density;
      params.seed = reduce_seed;
      const tuycover::ReduceReport report = tuycover::run_reduce_batch(params, reduce_count);
      std::cout << json{{"total", report.total},
                        {"agree", report.agree},
                        {"disagreeing_seeds", report.disagreeing_seeds}}
                       .dump()
                << "\n";
      return report.all_agree() ? kExitOk : 1;
    });
  }

  if (sphere->parsed()) {
    return run_with_exit_codes([&]() {
      const json report = json::parse(tuycover::read_text_file(map_report));
      const std::string csv = tuycover::export_sphere_map(report, map_roi);
      if (map_out.empty())
        std::cout << csv;
      else
        tuycover::write_text_file(map_out, csv);
      return kExitOk;
    });
  }

  if (scene_gen->parsed()) {
    return run_with_exit_codes([&]() {
      const tuycover::RunConfig config = resolve_config(scene_flags);
      tuycover::VoxelVolume vol = tuycover::generate_phantom(
          config.scene.seed, config.scene.preset, config.scene.dims, config.scene.spacing_mm);
      if (config.scene.occlusion != tuycover::OcclusionLevel::none)
        vol = tuycover::apply_occlusion(vol, config.scene.occlusion, config.scene.seed);
      tuycover::write_volume(vol, scene_out);
      std::cout << json{{"volume", scene_out + ".json"},
                        {"raw", scene_out + ".raw"},
                        {"occlusion", tuycover::to_string(config.scene.occlusion)}}
                       .dump()
                << "\n";
      return kExitOk;
    });
  }

  if (calibrate->parsed()) {
    return run_with_exit_codes([&]() {
      const tuycover::RunConfig config = resolve_config(calib_flags);
      const tuycover::SourceSet sources = tuycover::fibonacci_source_sphere(
          config.geometry.num_candidates, config.geometry.sid_mm, tuycover::Vec3{});
      const tuycover::VoxelVolume baseline = tuycover::generate_phantom(
          config.scene.seed, config.scene.preset, config.scene.dims, config.scene.spacing_mm);
      json out;
      out["percentile"] = config.validity.calibration_percentile;
      if (config.validity.per_roi_alpha) {
        out["alpha_per_roi"] = tuycover::calibrate_alpha_per_roi(
            baseline, config.geometry.detector, tuycover::Vec3{}, sources, config.rois,
            config.validity.calibration_percentile);
      } else {
        out["alpha"] = tuycover::calibrate_alpha(baseline, config.geometry.detector,
                                                 tuycover::Vec3{}, sources, config.rois,
                                                 config.validity.calibration_percentile);
      }
      std::cout << out.dump() << "\n";
      return kExitOk;
    });
  }

  return kExitOk;
}
