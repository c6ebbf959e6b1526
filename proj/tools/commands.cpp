#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include <nlohmann/json.hpp>

#include "jeanie/checkpoint.hpp"
#include "jeanie/io.hpp"

namespace jeanie::cli {

namespace fs = std::filesystem;

namespace {

encoder::LinearBlockEncoder align_encoder(const AlignOptions& opts, std::size_t joints) {
  const auto& blocks = opts.representation.blocks;
  if (opts.encoder_path.empty()) {
    return encoder::LinearBlockEncoder::identity(joints, static_cast<std::size_t>(blocks.block_length));
  }
  auto enc = encoder::load_encoder(opts.encoder_path);
  require(enc.joints() == joints && enc.block_length() == static_cast<std::size_t>(blocks.block_length),
          ErrorKind::Encoder, "encoder does not match the sequence joints or block length");
  return enc;
}

// Relative manifest paths are pinned to the config file's directory, so the
// config stored in a checkpoint stays usable from anywhere.
io::RunConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  io::RunConfig cfg = io::load_run_config(path);
  if (cfg.data.source == io::DataSource::Manifest && fs::path(cfg.data.manifest).is_relative()) {
    cfg.data.manifest = fs::absolute(fs::path(path).parent_path() / cfg.data.manifest)
                            .lexically_normal()
                            .string();
  }
  return cfg;
}

class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, std::ostream& stdout_stream, bool wall_time)
      : wall_time_(wall_time), start_(std::chrono::steady_clock::now()) {
    if (path == "-") {
      out_ = &stdout_stream;
    } else {
      file_.open(path, std::ios::binary);
      require(static_cast<bool>(file_), ErrorKind::Io, "cannot write " + path);
      out_ = &file_;
    }
  }

  void operator()(const fsar::IterationMetrics& m) {
    *out_ << "{\"iter\":" << m.iter << ",\"loss\":" << io::format_double(m.loss)
          << ",\"acc\":" << io::format_double(m.acc);
    if (wall_time_) {
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - start_);
      *out_ << ",\"wall_ms\":" << ms.count();
    }
    *out_ << "}\n";
    out_->flush();
  }

 private:
  bool wall_time_;
  std::chrono::steady_clock::time_point start_;
  std::ofstream file_;
  std::ostream* out_ = nullptr;
};

}  // namespace

void parse_grid(const std::string& text, geometry::CameraShiftGrid& grid) {
  const std::size_t x = text.find('x');
  auto parse_int = [&](std::string_view part, int& out) {
    const auto r = std::from_chars(part.data(), part.data() + part.size(), out);
    return r.ec == std::errc() && r.ptr == part.data() + part.size() && out >= 0;
  };
  int az = 0;
  int alt = 0;
  const std::string_view view(text);
  require(x != std::string::npos && parse_int(view.substr(0, x), az) &&
              parse_int(view.substr(x + 1), alt),
          ErrorKind::Argument, "grid must look like AxB with nonnegative integers, got '" + text + "'");
  grid.eta_az = az;
  grid.eta_alt = alt;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Argument:
    case ErrorKind::Config:
      return 2;
    case ErrorKind::Layout:
    case ErrorKind::Geometry:
    case ErrorKind::Shape:
    case ErrorKind::SequenceTooShort:
    case ErrorKind::Encoder:
    case ErrorKind::Parse:
    case ErrorKind::Io:
    case ErrorKind::CheckpointMismatch:
      return 3;
    case ErrorKind::Ambiguity:
    case ErrorKind::OracleScope:
    case ErrorKind::Normalization:
    case ErrorKind::Numeric:
    case ErrorKind::Training:
      return 4;
  }
  return 4;
}

void run_align(const AlignOptions& opts, std::ostream& out) {
  opts.aligner.validate();
  opts.representation.validate();
  require(opts.export_path.empty() || opts.aligner.jeanie.smooth.hard, ErrorKind::Argument,
          "--export-path needs --hard");
  const SkeletonSequence query = io::parse_sequence(opts.query);
  const SkeletonSequence support = io::parse_sequence(opts.support);
  query.validate();
  support.validate();
  require(query.joints() == support.joints(), ErrorKind::Shape,
          "query and support have different joint counts");
  const auto enc = align_encoder(opts, query.joints());
  const auto& repr = opts.representation;
  const auto psi = encoder::encode_sequence(query, repr.grid, repr.view, repr.blocks, enc);
  const auto psi_s = encoder::encode_sequence(support, {}, repr.view, repr.blocks, enc);

  const auto& a = opts.aligner;
  alignment::AlignmentResult result;
  switch (a.method) {
    case alignment::Method::JEANIE:
      result = alignment::jeanie(alignment::base_distance_tensor(psi, psi_s, a.base), a.jeanie);
      break;
    case alignment::Method::FVM:
      result = alignment::fvm(alignment::base_distance_tensor(psi, psi_s, a.base), a.jeanie.smooth);
      break;
    case alignment::Method::SoftDTW: {
      const auto D = alignment::base_distance_tensor(psi.center_view(), psi_s, a.base);
      result = alignment::soft_dtw(D.view_slice(0, 0), a.jeanie.smooth);
      break;
    }
    case alignment::Method::Euclidean:
      result.distance = alignment::align(psi, psi_s, a);
      break;
  }
  if (!opts.export_path.empty()) {
    require(result.path.has_value(), ErrorKind::Argument,
            "path export is available for dtw, fvm and jeanie only");
    std::ofstream csv(opts.export_path, std::ios::binary);
    require(static_cast<bool>(csv), ErrorKind::Io, "cannot write " + opts.export_path);
    alignment::write_path_csv(*result.path, csv);
  }
  out << std::fixed << std::setprecision(6) << result.distance << "\n";
}

void run_simulate_views(const SimulateOptions& opts, std::ostream& out) {
  opts.grid.validate();
  const std::string raw = io::read_file(opts.input);
  const SkeletonSequence seq = io::parse_sequence_text(raw, opts.input);
  seq.validate();
  const geometry::ViewGrid views = geometry::make_view_grid(seq, opts.grid, opts.view);
  fs::create_directories(opts.out_dir);

  double worst = 0.0;
  for (int i = 0; i < views.azimuth_cells(); ++i) {
    for (int j = 0; j < views.altitude_cells(); ++j) {
      const fs::path file =
          fs::path(opts.out_dir) / ("view_" + std::to_string(i) + "_" + std::to_string(j) + ".csv");
      // The centre cell is the untouched input.
      if (i == opts.grid.eta_az && j == opts.grid.eta_alt) {
        io::write_file(file.string(), raw);
      } else {
        io::write_sequence(views.at(i, j), file.string());
      }
      if (opts.view.mode != geometry::ViewMode::CamVPC) continue;
      const auto cam = geometry::camera_for_offset(opts.grid.azimuth_offset(i),
                                                   opts.grid.altitude_offset(j), opts.view);
      const Eigen::Matrix3d F = geometry::fundamental_matrix(cam);
      for (std::size_t f = 0; f < seq.frames(); ++f) {
        for (std::size_t jt = 0; jt < seq.joints(); ++jt) {
          worst = std::max(worst, geometry::epipolar_residual(cam, F, seq.joint(f, jt)));
        }
      }
    }
  }
  out << "views " << views.azimuth_cells() * views.altitude_cells() << "\n";
  if (opts.view.mode == geometry::ViewMode::CamVPC) {
    out << "max_epipolar_residual " << std::scientific << std::setprecision(3) << worst << "\n";
    require(worst <= 1e-6, ErrorKind::Geometry, "epipolar residual above 1e-6");
  }
}

void run_train(const TrainOptions& opts, std::ostream& out) {
  io::RunConfig cfg = load_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.jobs) cfg.jobs = *opts.jobs;
  cfg.validate();

  const io::LoadedData data = io::load_data(cfg.data);
  const fsar::Workspace ws(data.corpus, cfg.fsar.representation, cfg.jobs);
  fsar::RngStreams rng(cfg.seed);
  MetricsWriter metrics(opts.metrics, out, opts.record_wall_time);
  const fsar::MetricsSink sink = [&](const fsar::IterationMetrics& m) { metrics(m); };
  const std::span<const int> pool = data.split.train;

  fsar::Model model;
  if (opts.mode == "sup") {
    model = fsar::train_supervised(ws, pool, cfg.fsar, rng, sink);
  } else if (opts.mode == "unsup") {
    model = fsar::train_unsupervised(ws, pool, cfg.fsar, rng, sink);
  } else if (opts.mode == "finetune") {
    model = fsar::train_finetune_unsup(ws, pool, cfg.fsar, rng, sink);
  } else if (opts.mode == "weighted") {
    model = fsar::train_weighted_fusion(ws, pool, cfg.fsar, rng, sink);
  } else if (opts.mode == "maml") {
    model = fsar::train_maml_fusion(ws, pool, cfg.fsar, rng, sink);
  } else if (opts.mode == "adapt") {
    model = fsar::train_adaptation_fusion(ws, pool, cfg.fsar, rng, sink);
  } else {
    fail(ErrorKind::Argument, "unknown training mode '" + opts.mode + "'");
  }
  io::write_checkpoint(io::make_checkpoint(model, cfg, rng, opts.mode), opts.out);
}

void run_evaluate(const EvaluateOptions& opts, std::ostream& out) {
  const io::Checkpoint ck = io::read_checkpoint(opts.checkpoint);
  io::RunConfig cfg = opts.config_path.empty() ? io::config_from_checkpoint(ck)
                                               : load_config(opts.config_path);
  if (opts.jobs) cfg.jobs = *opts.jobs;
  auto& e = cfg.evaluation;
  if (opts.classifier) e.classifier = *opts.classifier;
  if (opts.rho) e.rho = *opts.rho;
  if (opts.code_distance) e.code_distance = *opts.code_distance;
  if (opts.episodes) e.episodes = *opts.episodes;
  if (opts.seeds) e.seeds = *opts.seeds;
  if (opts.n_way) e.n_way = *opts.n_way;
  if (opts.z_shot) e.z_shot = *opts.z_shot;
  cfg.validate();

  const fsar::Model model = io::model_from_checkpoint(ck, cfg);
  const io::LoadedData data = io::load_data(cfg.data);
  const fsar::Workspace ws(data.corpus, cfg.fsar.representation, cfg.jobs);
  const fsar::EvaluationResult r = fsar::evaluate(ws, data.split.test, model, cfg.fsar, e);

  nlohmann::json j;
  j["classifier"] = io::enum_name(e.classifier);
  j["n_way"] = e.n_way;
  j["z_shot"] = e.z_shot;
  j["episodes"] = r.episodes;
  j["seeds"] = e.seeds;
  if (e.classifier != fsar::ClassifierKind::Supervised) j["code_distance"] = io::enum_name(e.code_distance);
  if (e.classifier == fsar::ClassifierKind::Fused) j["rho"] = e.rho;
  j["accuracy"] = r.accuracy;
  j["ci95"] = r.ci95;
  j["per_seed"] = r.per_seed;
  out << j.dump() << "\n";
}

}  // namespace jeanie::cli
