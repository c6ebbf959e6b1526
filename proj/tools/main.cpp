#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "jeanie/error.hpp"
#include "jeanie/io.hpp"

using namespace jeanie;

namespace {

std::vector<std::string> choices(std::string_view list) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = std::min(list.find(", ", pos), list.size());
    out.emplace_back(list.substr(pos, comma - pos));
    pos = comma + 2;
  }
  return out;
}

template <class E>
CLI::Option* add_enum(CLI::App& app, const std::string& name, E& target, const std::string& desc) {
  return app
      .add_option_function<std::string>(
          name, [&target](const std::string& s) { target = io::enum_from<E>(s); }, desc)
      ->check(CLI::IsMember(choices(io::enum_choices<E>())))
      ->default_str(std::string(io::enum_name(target)));
}

template <class E>
CLI::Option* add_optional_enum(CLI::App& app, const std::string& name, std::optional<E>& target,
                               E fallback, const std::string& desc) {
  return app
      .add_option_function<std::string>(
          name, [&target](const std::string& s) { target = io::enum_from<E>(s); }, desc)
      ->check(CLI::IsMember(choices(io::enum_choices<E>())))
      ->default_str(std::string(io::enum_name(fallback)));
}

std::string grid_text(const geometry::CameraShiftGrid& g) {
  return std::to_string(g.eta_az) + "x" + std::to_string(g.eta_alt);
}

double degrees(double radians) { return radians * 180.0 / std::numbers::pi; }

void add_view_options(CLI::App& cmd, geometry::CameraShiftGrid& grid, geometry::ViewOptions& view,
                      std::string& grid_spec, double& step_az, double& step_alt) {
  grid_spec = grid_text(grid);
  step_az = degrees(grid.delta_az);
  step_alt = degrees(grid.delta_alt);
  cmd.add_option("--grid", grid_spec,
                 "viewpoint shifts per side as AZxALT; 3x3 with 15-degree steps covers "
                 "[-45, 45] degrees on both axes, 0x0 is the input view only");
  cmd.add_option("--step-az", step_az, "azimuth step in degrees")->check(CLI::PositiveNumber);
  cmd.add_option("--step-alt", step_alt, "altitude step in degrees")->check(CLI::PositiveNumber);
  add_enum(cmd, "--mode", view.mode, "view simulation: euler (hip-centred rotation) or camvpc (stereo camera)");
  cmd.add_option("--camera-distance", view.camera_distance, "camvpc pivot distance");
  cmd.add_option("--camera-height", view.camera_height, "camvpc pivot height");
}

void finish_grid(geometry::CameraShiftGrid& grid, const std::string& spec, double step_az,
                 double step_alt) {
  cli::parse_grid(spec, grid);
  grid.delta_az = geometry::deg_to_rad(step_az);
  grid.delta_alt = geometry::deg_to_rad(step_alt);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint temporal and viewpoint alignment for few-shot skeleton action recognition"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  // align
  cli::AlignOptions align;
  align.aligner.base = {};  // pairwise tools default to squared Euclidean
  std::string align_grid;
  double align_step_az = 0.0, align_step_alt = 0.0;
  auto* align_cmd = app.add_subcommand("align", "distance between two sequence files");
  align_cmd->add_option("query", align.query, "query sequence file")->required();
  align_cmd->add_option("support", align.support, "support sequence file")->required();
  add_enum(*align_cmd, "--method", align.aligner.method, "alignment method");
  align_cmd->add_option("--gamma", align.aligner.jeanie.smooth.gamma, "soft-min temperature")
      ->check(CLI::PositiveNumber);
  align_cmd->add_flag("--hard", align.aligner.jeanie.smooth.hard, "use the exact minimum");
  align_cmd->add_option("--iota", align.aligner.jeanie.iota,
                        "max viewpoint index change per axis per step")
      ->check(CLI::NonNegativeNumber);
  add_enum(*align_cmd, "--base", align.aligner.base.kind, "base distance between block features");
  align_cmd->add_option("--sigma", align.aligner.base.sigma, "RBF bandwidth")->check(CLI::PositiveNumber);
  add_view_options(*align_cmd, align.representation.grid, align.representation.view, align_grid,
                   align_step_az, align_step_alt);
  align_cmd->add_option("--block-length", align.representation.blocks.block_length,
                        "frames per temporal block");
  align_cmd->add_option("--stride", align.representation.blocks.stride, "frames between block starts");
  align_cmd->add_option("--encoder", align.encoder_path,
                        "encoder JSON; without it features are raw block coordinates");
  align_cmd->add_option("--export-path", align.export_path, "CSV of the optimal path (needs --hard)");

  // simulate-views
  cli::SimulateOptions sim;
  sim.grid = fsar::RepresentationConfig{}.grid;
  std::string sim_grid;
  double sim_step_az = 0.0, sim_step_alt = 0.0;
  auto* sim_cmd = app.add_subcommand("simulate-views", "write one sequence file per grid cell");
  sim_cmd->add_option("input", sim.input, "input sequence file")->required();
  sim_cmd->add_option("out_dir", sim.out_dir, "output directory")->required();
  add_view_options(*sim_cmd, sim.grid, sim.view, sim_grid, sim_step_az, sim_step_alt);

  // train
  cli::TrainOptions train;
  const io::RunConfig defaults;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  train_cmd->add_option("--config", train.config_path, "run config JSON; missing keys keep defaults");
  train_cmd->add_option("--mode", train.mode, "training procedure")
      ->check(CLI::IsMember({"sup", "unsup", "finetune", "weighted", "maml", "adapt"}));
  train_cmd->add_option("--seed", train.seed, "seed of every random stream (config: seed)")
      ->default_str(std::to_string(defaults.seed));
  train_cmd->add_option("--jobs", train.jobs, "worker threads (config: jobs)")
      ->default_str(std::to_string(defaults.jobs))
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--out", train.out, "checkpoint path");
  train_cmd->add_option("--metrics", train.metrics, "JSON-lines metrics path, - for stdout");
  train_cmd->add_flag("--record-wall-time", train.record_wall_time,
                      "add wall_ms to each metrics line (breaks byte-identical reruns)");

  // evaluate
  cli::EvaluateOptions eval;
  const fsar::EvaluationConfig eval_defaults;
  auto* eval_cmd = app.add_subcommand("evaluate", "few-shot accuracy of a checkpoint on the test classes");
  eval_cmd->add_option("checkpoint", eval.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--config", eval.config_path,
                       "run config JSON; must match the checkpoint (default: the stored config)");
  add_optional_enum(*eval_cmd, "--classifier", eval.classifier, eval_defaults.classifier,
                    "classifier (config: evaluation.classifier)");
  eval_cmd->add_option("--rho", eval.rho, "fused weight of the supervised distance (config: evaluation.rho)")
      ->default_str(io::format_double(eval_defaults.rho))
      ->check(CLI::Range(0.0, 1.0));
  add_optional_enum(*eval_cmd, "--code-dist", eval.code_distance, eval_defaults.code_distance,
                    "distance between codes (config: evaluation.code_distance)");
  eval_cmd->add_option("--episodes", eval.episodes, "test episodes per seed (config: evaluation.episodes)")
      ->default_str(std::to_string(eval_defaults.episodes));
  eval_cmd->add_option("--n-way", eval.n_way, "classes per episode (config: evaluation.n_way)")
      ->default_str(std::to_string(eval_defaults.n_way));
  eval_cmd->add_option("--z-shot", eval.z_shot, "supports per class (config: evaluation.z_shot)")
      ->default_str(std::to_string(eval_defaults.z_shot));
  eval_cmd->add_option("--seeds", eval.seeds, "episode stream seeds (config: evaluation.seeds)")
      ->default_str("1");
  eval_cmd->add_option("--jobs", eval.jobs, "worker threads (config: jobs)")
      ->default_str(std::to_string(defaults.jobs))
      ->check(CLI::PositiveNumber);

  // config
  auto* config_cmd = app.add_subcommand("config", "print the default run config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_code(e.kind());
  }

  try {
    if (*align_cmd) {
      finish_grid(align.representation.grid, align_grid, align_step_az, align_step_alt);
      cli::run_align(align, std::cout);
    } else if (*sim_cmd) {
      finish_grid(sim.grid, sim_grid, sim_step_az, sim_step_alt);
      cli::run_simulate_views(sim, std::cout);
    } else if (*train_cmd) {
      cli::run_train(train, std::cout);
    } else if (*eval_cmd) {
      cli::run_evaluate(eval, std::cout);
    } else if (*config_cmd) {
      std::cout << io::to_json_text(defaults);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
