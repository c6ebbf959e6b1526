#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "jeanie/config.hpp"
#include "jeanie/error.hpp"

namespace jeanie::cli {

struct AlignOptions {
  std::string query;
  std::string support;
  alignment::AlignerConfig aligner;
  fsar::RepresentationConfig representation;
  std::string encoder_path;  // empty: identity encoder (raw block coordinates)
  std::string export_path;   // hard mode only
};

struct SimulateOptions {
  std::string input;
  std::string out_dir;
  geometry::CameraShiftGrid grid;
  geometry::ViewOptions view;
};

struct TrainOptions {
  std::string config_path;
  std::string mode = "sup";
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string out = "checkpoint.bin";
  std::string metrics = "-";
  bool record_wall_time = false;
};

struct EvaluateOptions {
  std::string checkpoint;
  std::string config_path;  // empty: the config stored in the checkpoint
  std::optional<fsar::ClassifierKind> classifier;
  std::optional<double> rho;
  std::optional<coding::CodeDistanceKind> code_distance;
  std::optional<int> episodes;
  std::optional<int> n_way;
  std::optional<int> z_shot;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<int> jobs;
};

void run_align(const AlignOptions& opts, std::ostream& out);
void run_simulate_views(const SimulateOptions& opts, std::ostream& out);
void run_train(const TrainOptions& opts, std::ostream& out);
void run_evaluate(const EvaluateOptions& opts, std::ostream& out);

/// "AxB" -> (eta_az, eta_alt).
void parse_grid(const std::string& text, geometry::CameraShiftGrid& grid);

/// 0 ok, 2 usage/config, 3 data/io, 4 numeric/training.
int exit_code(ErrorKind kind);

}  // namespace jeanie::cli
