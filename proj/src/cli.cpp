#include "depthpatch/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "depthpatch/asset_io.hpp"
#include "depthpatch/attack_loss.hpp"
#include "depthpatch/config.hpp"
#include "depthpatch/defenses.hpp"
#include "depthpatch/manifest.hpp"
#include "depthpatch/metrics.hpp"
#include "depthpatch/optimizer.hpp"
#include "depthpatch/plot.hpp"
#include "depthpatch/pseudolidar.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace depthpatch {
namespace {

constexpr int kExitConfig = 2;
constexpr int kExitAsset = 3;
constexpr int kExitBackend = 4;
constexpr int kExitRuntime = 5;

// Errors are mapped by phase; codes that are unambiguous override the phase.
int exit_code_for(const Error& e, int phase_default) {
  switch (e.code()) {
    case Errc::backend_unavailable:
      return kExitBackend;
    case Errc::bad_config:
    case Errc::unknown_key:
    case Errc::missing_required:
      return kExitConfig;
    default:
      return phase_default;
  }
}

RunConfig load_config_with_overrides(const std::string& path,
                                     const std::vector<std::string>& overrides) {
  if (!fs::exists(path)) fail(Errc::missing_file, "config file not found: " + path);
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  json j;
  const bool blank =
      std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c) != 0; });
  if (blank) {
    j = json::object();
  } else {
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      fail(Errc::bad_config, "config parse error: " + std::string(e.what()));
    }
  }
  for (const std::string& o : overrides) apply_override(j, o);
  return parse_run_config(j);
}

int cmd_attack(const std::string& config_path, const std::string& out_dir,
               const std::vector<std::string>& overrides) {
  RunConfig cfg;
  try {
    cfg = load_config_with_overrides(config_path, overrides);
    require_attack_paths(cfg);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_code_for(e, kExitConfig);
  }

  AttackAssets assets;
  try {
    assets = load_attack_assets(cfg);
  } catch (const Error& e) {
    std::cerr << "asset error: " << e.what() << "\n";
    return exit_code_for(e, kExitAsset);
  }

  std::shared_ptr<DepthModel> model;
  try {
    model = make_depth_model(cfg.model);
  } catch (const Error& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return exit_code_for(e, kExitBackend);
  }

  try {
    const RunArtifacts art = run_attack(cfg, assets, model, out_dir);
    std::cout << "attack complete: adv " << art.initial_adv << " -> " << art.final_adv
              << "; artifacts in " << out_dir << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "attack failed: " << e.what() << "\n";
    return exit_code_for(e, kExitRuntime);
  }
}

RunConfig config_for_attack_dir(const std::string& attack_dir, const std::string& config_path,
                                const std::vector<std::string>& overrides) {
  const std::string path =
      config_path.empty() ? (fs::path(attack_dir) / "config_snapshot.json").string() : config_path;
  return load_config_with_overrides(path, overrides);
}

int cmd_evaluate(const std::string& attack_dir, const std::string& config_path,
                 std::string out_dir, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  try {
    cfg = config_for_attack_dir(attack_dir, config_path, overrides);
    require_attack_paths(cfg);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_code_for(e, kExitConfig);
  }

  AttackAssets assets;
  PatchArtifacts patch;
  try {
    assets = load_attack_assets(cfg);
    patch = load_patch_artifacts(attack_dir, assets.shape);
  } catch (const Error& e) {
    std::cerr << "asset error: " << e.what() << "\n";
    return exit_code_for(e, kExitAsset);
  }

  std::shared_ptr<DepthModel> model;
  try {
    model = make_depth_model(cfg.model);
  } catch (const Error& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return exit_code_for(e, kExitBackend);
  }

  try {
    if (out_dir.empty()) out_dir = (fs::path(attack_dir) / "eval").string();
    fs::create_directories(out_dir);
    const EvalReport report = placement_sweep(assets, patch, *model, cfg.evaluate);
    write_sweep_csv(report, (fs::path(out_dir) / "sweep.csv").string());
    write_error_samples_csv(report, (fs::path(out_dir) / "errors.csv").string());
    write_summary_json(report, (fs::path(out_dir) / "summary.json").string());
    write_manifest(out_dir, config_to_json(cfg), cfg.seed,
                   {"sweep.csv", "errors.csv", "summary.json"});
    std::cout << "evaluate complete: mean E_d " << report.mean_e_d << " m, mean R_a "
              << report.mean_r_a << "; outputs in " << out_dir << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "evaluate failed: " << e.what() << "\n";
    return exit_code_for(e, kExitRuntime);
  }
}

int cmd_defend_eval(const std::string& attack_dir, const std::string& config_path,
                    std::string out_dir, const std::vector<std::string>& defense_args,
                    const std::vector<std::string>& overrides) {
  RunConfig cfg;
  std::vector<DefenseSpec> grid;
  try {
    cfg = config_for_attack_dir(attack_dir, config_path, overrides);
    require_attack_paths(cfg);
    if (defense_args.empty()) {
      grid = default_defense_grid(cfg.defense);
    } else {
      for (const std::string& d : defense_args) grid.push_back(parse_defense_spec(d));
    }
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_code_for(e, kExitConfig);
  }

  AttackAssets assets;
  PatchArtifacts patch;
  try {
    assets = load_attack_assets(cfg);
    patch = load_patch_artifacts(attack_dir, assets.shape);
  } catch (const Error& e) {
    std::cerr << "asset error: " << e.what() << "\n";
    return exit_code_for(e, kExitAsset);
  }

  std::shared_ptr<DepthModel> model;
  try {
    model = make_depth_model(cfg.model);
  } catch (const Error& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return exit_code_for(e, kExitBackend);
  }

  try {
    if (out_dir.empty()) out_dir = (fs::path(attack_dir) / "defense").string();
    fs::create_directories(out_dir);
    const auto rows = defense_eval(assets, patch, *model, grid, cfg.defense.distance_m,
                                   cfg.defense.noise_seed, cfg.evaluate.max_scenes);
    write_defense_csv(rows, (fs::path(out_dir) / "defense.csv").string());
    write_manifest(out_dir, config_to_json(cfg), cfg.seed, {"defense.csv"});
    std::cout << "defend-eval complete: " << rows.size() << " rows; outputs in " << out_dir
              << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "defend-eval failed: " << e.what() << "\n";
    return exit_code_for(e, kExitRuntime);
  }
}

int cmd_export_lidar(const std::string& depth_path, const std::string& camera_path,
                     const std::string& out_path) {
  try {
    const DepthGrid depth = load_depth(depth_path);
    const Intrinsics intr = load_intrinsics(camera_path, depth.w(), depth.h());
    const PointCloud pc = depth_to_pointcloud(depth, intr);
    save_pointcloud(pc, out_path);
    if (pc.skipped_nonfinite > 0)
      std::cerr << "export-lidar: skipped " << pc.skipped_nonfinite << " non-finite pixels\n";
    std::cout << "export-lidar complete: " << pc.points.size() << " points -> " << out_path
              << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "export-lidar failed: " << e.what() << "\n";
    return exit_code_for(e, kExitAsset);
  }
}

int cmd_plot(const std::string& in_dir, std::string out_dir) {
  try {
    if (out_dir.empty()) out_dir = (fs::path(in_dir) / "plots").string();
    const auto written = plot_all(in_dir, out_dir);
    for (const auto& f : written) std::cout << "wrote " << f << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "plot failed: " << e.what() << "\n";
    return exit_code_for(e, kExitAsset);
  }
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"adversarial patch synthesis and evaluation for monocular depth estimation"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);

  std::string config_path, out_dir, attack_dir, depth_path, camera_path, in_dir;
  std::vector<std::string> overrides, defense_args;

  auto* attack = app.add_subcommand("attack", "optimize a patch against a depth model");
  attack->add_option("--config", config_path, "run config (JSON)")->required();
  attack->add_option("--out", out_dir, "output directory")->required();
  attack->add_option("--set", overrides, "config override section.key=value");

  auto* evaluate = app.add_subcommand("evaluate", "placement sweep over a completed attack");
  evaluate->add_option("--attack-dir", attack_dir, "completed attack output directory")->required();
  evaluate->add_option("--config", config_path, "config (default: attack dir snapshot)");
  evaluate->add_option("--out", out_dir, "output directory (default: <attack-dir>/eval)");
  evaluate->add_option("--set", overrides, "config override section.key=value");

  auto* defend = app.add_subcommand("defend-eval", "input-transformation defense evaluation");
  defend->add_option("--attack-dir", attack_dir, "completed attack output directory")->required();
  defend->add_option("--config", config_path, "config (default: attack dir snapshot)");
  defend->add_option("--out", out_dir, "output directory (default: <attack-dir>/defense)");
  defend->add_option("--defense", defense_args, "defense spec, e.g. jpeg:50 bits:3 (repeatable)");
  defend->add_option("--set", overrides, "config override section.key=value");

  auto* lidar = app.add_subcommand("export-lidar", "back-project a depth grid to a point cloud");
  lidar->add_option("--depth", depth_path, "depth payload (.f32 with .json sidecar)")->required();
  lidar->add_option("--camera", camera_path, "scene camera.json")->required();
  lidar->add_option("--out", out_dir, "output .xyz path")->required();

  auto* plot = app.add_subcommand("plot", "render figures from evaluate/defend-eval CSVs");
  plot->add_option("--in", in_dir, "directory with sweep.csv / errors.csv / defense.csv")
      ->required();
  plot->add_option("--out", out_dir, "output directory (default: <in>/plots)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  if (attack->parsed()) return cmd_attack(config_path, out_dir, overrides);
  if (evaluate->parsed()) return cmd_evaluate(attack_dir, config_path, out_dir, overrides);
  if (defend->parsed())
    return cmd_defend_eval(attack_dir, config_path, out_dir, defense_args, overrides);
  if (lidar->parsed()) return cmd_export_lidar(depth_path, camera_path, out_dir);
  if (plot->parsed()) return cmd_plot(in_dir, out_dir);
  return kExitConfig;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args);
}

}  // namespace depthpatch
