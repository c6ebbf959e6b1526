// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Pass criterion names (AC1 ... AC10) to run
// a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "commands.hpp"
#include "jeanie/alignment.hpp"
#include "jeanie/coding.hpp"
#include "jeanie/config.hpp"
#include "jeanie/fsar.hpp"
#include "jeanie/geometry.hpp"
#include "jeanie/io.hpp"

using namespace jeanie;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

alignment::DistanceTensor random_tensor(int k, int kp, int tau, int taup, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  alignment::DistanceTensor D(k, kp, tau, taup);
  for (double& v : D.values()) v = u(rng);
  return D;
}

// Pinned tolerances.
constexpr double kOracleTol = 1e-8;
constexpr double kOrderSlack = 1e-12;
constexpr double kGradTol = 1e-4;
constexpr double kEpipolarTol = 1e-6;
constexpr double kOrthoTol = 1e-12;
constexpr double kTrendPoints = 0.05;

Outcome ac1() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> tau(1, 4), iota(0, 2), mode(0, 2), shape(0, 4);
  const int shapes[5][2] = {{1, 1}, {1, 2}, {2, 1}, {1, 3}, {3, 1}};
  const double gammas[2] = {0.05, 0.5};
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int s = shape(rng);
    const auto D = random_tensor(shapes[s][0], shapes[s][1], tau(rng), tau(rng), rng);
    const int m = mode(rng);
    alignment::JeanieConfig cfg{{m == 2 ? 0.1 : gammas[m], m == 2}, iota(rng)};
    const double dp = alignment::jeanie(D, cfg).distance;
    const double brute = alignment::brute_force_alignment(D, cfg);
    worst = std::max(worst, std::abs(dp - brute));
  }
  const double secs = seconds_since(t0);
  return {worst <= kOracleTol && secs < 10.0,
          fmt("max |dp - brute| = %.3g over 200 instances in %.2fs", worst, secs)};
}

Outcome ac2() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> tau(1, 12);
  std::uniform_real_distribution<double> gamma(0.01, 2.0);
  int equal = 0;
  for (int i = 0; i < 100; ++i) {
    const auto D = random_tensor(1, 1, tau(rng), tau(rng), rng);
    const alignment::SmoothMinConfig smooth{gamma(rng), false};
    const double a = alignment::jeanie(D, {smooth, 2}).distance;
    const double b = alignment::soft_dtw(D.view_slice(0, 0), smooth).distance;
    if (std::memcmp(&a, &b, sizeof a) == 0) ++equal;
  }
  return {equal == 100, fmt("%d/100 bit-identical", equal)};
}

Outcome ac3() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> cells(1, 3), tau(1, 8), iota(0, 2);
  const alignment::SmoothMinConfig hard{0.1, true};
  int ok = 0;
  for (int i = 0; i < 500; ++i) {
    const auto D = random_tensor(cells(rng), cells(rng), tau(rng), tau(rng), rng);
    const double f = alignment::fvm(D, hard).distance;
    const double j = alignment::jeanie(D, {hard, iota(rng)}).distance;
    const double m = alignment::min_fixed_view_dtw(D, hard);
    if (f <= j + kOrderSlack && j <= m + kOrderSlack) ++ok;
  }
  return {ok == 500, fmt("%d/500 satisfy fvm <= jeanie <= min fixed-view dtw", ok)};
}

double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  const double scale = std::max({analytic.norm(), numeric.norm(), 1e-8});
  return (analytic - numeric).norm() / scale;
}

Outcome ac4() {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> cells(1, 3), tau(2, 5), iota(0, 2);
  std::uniform_real_distribution<double> gamma(0.1, 1.0), u(-1.0, 1.0);
  const double h = 1e-6;
  double worst_jeanie = 0.0, worst_dtw = 0.0, worst_enc = 0.0, worst_loss = 0.0;
  for (int i = 0; i < 50; ++i) {
    {
      auto D = random_tensor(cells(rng), cells(rng), tau(rng), tau(rng), rng);
      const alignment::JeanieConfig cfg{{gamma(rng), false}, iota(rng)};
      const auto g = alignment::jeanie_backward(D, cfg);
      Eigen::VectorXd a(D.values().size()), n(D.values().size());
      for (std::size_t e = 0; e < D.values().size(); ++e) {
        const double keep = D.values()[e];
        D.values()[e] = keep + h;
        const double up = alignment::jeanie(D, cfg).distance;
        D.values()[e] = keep - h;
        const double down = alignment::jeanie(D, cfg).distance;
        D.values()[e] = keep;
        n[static_cast<Eigen::Index>(e)] = (up - down) / (2 * h);
        a[static_cast<Eigen::Index>(e)] = g.values()[e];
      }
      worst_jeanie = std::max(worst_jeanie, relative_error(a, n));
    }
    {
      Eigen::MatrixXd D = (Eigen::MatrixXd::Random(tau(rng), tau(rng)).array() + 1.0).matrix();
      const alignment::SmoothMinConfig cfg{gamma(rng), false};
      const Eigen::MatrixXd g = alignment::soft_dtw_backward(D, cfg);
      Eigen::MatrixXd n(D.rows(), D.cols());
      for (Eigen::Index e = 0; e < D.size(); ++e) {
        const double keep = D(e);
        D(e) = keep + h;
        const double up = alignment::soft_dtw(D, cfg).distance;
        D(e) = keep - h;
        const double down = alignment::soft_dtw(D, cfg).distance;
        D(e) = keep;
        n(e) = (up - down) / (2 * h);
      }
      worst_dtw = std::max(worst_dtw, relative_error(g.reshaped(), n.reshaped()));
    }
    {
      const std::size_t joints = 3, frames = 2;
      const int d = 4;
      auto enc = encoder::LinearBlockEncoder::random(d, joints, frames, rng);
      for (Eigen::Index e = 0; e < enc.bias().size(); ++e) enc.bias()[e] = u(rng);
      encoder::TemporalBlock block{joints, frames, Eigen::VectorXd(3 * joints * frames)};
      for (Eigen::Index e = 0; e < block.values.size(); ++e) block.values[e] = u(rng);
      Eigen::VectorXd up(d);
      for (Eigen::Index e = 0; e < d; ++e) up[e] = u(rng);
      const auto g = encoder::encoder_backward(block, enc, up);
      auto f = [&](const encoder::LinearBlockEncoder& en, const encoder::TemporalBlock& b) {
        return up.dot(en.encode(b));
      };
      std::vector<double> a, n;
      for (Eigen::Index e = 0; e < enc.weights().size(); ++e) {
        auto p = enc, m = enc;
        p.weights()(e) += h;
        m.weights()(e) -= h;
        n.push_back((f(p, block) - f(m, block)) / (2 * h));
        a.push_back(g.params.d_weights(e));
      }
      for (Eigen::Index e = 0; e < enc.bias().size(); ++e) {
        auto p = enc, m = enc;
        p.bias()(e) += h;
        m.bias()(e) -= h;
        n.push_back((f(p, block) - f(m, block)) / (2 * h));
        a.push_back(g.params.d_bias(e));
      }
      for (Eigen::Index e = 0; e < block.values.size(); ++e) {
        auto p = block, m = block;
        p.values[e] += h;
        m.values[e] -= h;
        n.push_back((f(enc, p) - f(enc, m)) / (2 * h));
        a.push_back(g.d_block(e));
      }
      worst_enc = std::max(worst_enc, relative_error(Eigen::Map<Eigen::VectorXd>(a.data(), a.size()),
                                                     Eigen::Map<Eigen::VectorXd>(n.data(), n.size())));
    }
    {
      // Targets held at their unperturbed values, as the loss defines them.
      std::uniform_int_distribution<int> bsz(1, 4), way(2, 5), shot(1, 2);
      const int B = bsz(rng), N = way(rng), Z = shot(rng);
      std::vector<double> dp(static_cast<std::size_t>(B * Z)), dm(static_cast<std::size_t>(B * (N - 1) * Z));
      std::uniform_real_distribution<double> dist(0.0, 5.0);
      for (auto& v : dp) v = dist(rng);
      for (auto& v : dm) v = dist(rng);
      const int beta = std::min<int>(1 + static_cast<int>(rng() % 2), static_cast<int>(dp.size()));
      if (N * Z * beta > static_cast<int>(dm.size())) {
        --i;
        continue;
      }
      const fsar::SupervisedLossConfig cfg{beta};
      const auto loss = fsar::supervised_loss(dp, dm, N * Z, cfg);
      auto sorted_mean = [](std::vector<double> v, std::size_t count, bool smallest) {
        if (smallest) std::sort(v.begin(), v.end());
        else std::sort(v.begin(), v.end(), std::greater<>());
        return std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(count), 0.0) / count;
      };
      const double tp = sorted_mean(dp, static_cast<std::size_t>(beta), true);
      const double tm = sorted_mean(dm, static_cast<std::size_t>(N * Z * beta), false);
      auto value = [&](const std::vector<double>& p, const std::vector<double>& m) {
        const double gp = std::accumulate(p.begin(), p.end(), 0.0) / p.size() - tp;
        const double gm = std::accumulate(m.begin(), m.end(), 0.0) / m.size() - tm;
        return gp * gp + gm * gm;
      };
      std::vector<double> a, n;
      for (std::size_t e = 0; e < dp.size(); ++e) {
        auto p = dp, m = dp;
        p[e] += h;
        m[e] -= h;
        n.push_back((value(p, dm) - value(m, dm)) / (2 * h));
        a.push_back(loss.d_plus_grad[e]);
      }
      for (std::size_t e = 0; e < dm.size(); ++e) {
        auto p = dm, m = dm;
        p[e] += h;
        m[e] -= h;
        n.push_back((value(dp, p) - value(dp, m)) / (2 * h));
        a.push_back(loss.d_minus_grad[e]);
      }
      worst_loss = std::max(worst_loss, relative_error(Eigen::Map<Eigen::VectorXd>(a.data(), a.size()),
                                                       Eigen::Map<Eigen::VectorXd>(n.data(), n.size())));
    }
  }
  const double worst = std::max({worst_jeanie, worst_dtw, worst_enc, worst_loss});
  return {worst <= kGradTol,
          fmt("max relative error: jeanie %.2g, soft-dtw %.2g, encoder %.2g, loss %.2g", worst_jeanie,
              worst_dtw, worst_enc, worst_loss)};
}

double orthogonality_error(const Eigen::Matrix3d& R) {
  return (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

Outcome ac5() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi), u(-1.0, 1.0),
      focal(200.0, 1200.0), centre(-400.0, 400.0), az(-0.8, 0.8), dist(2.0, 6.0);
  double worst_res = 0.0, worst_ortho = 0.0;
  for (int i = 0; i < 10000; ++i) {
    geometry::StereoCamera cam;
    if (i % 2 == 0) {
      cam.R = geometry::euler_matrix({geometry::Axis::X, angle(rng)}) *
              geometry::euler_matrix({geometry::Axis::Y, angle(rng)}) *
              geometry::euler_matrix({geometry::Axis::Z, angle(rng)});
      cam.t = Eigen::Vector3d(u(rng), u(rng), u(rng));
    } else {
      cam = geometry::camera_for_offset(az(rng), az(rng), {geometry::ViewMode::CamVPC, dist(rng), u(rng)});
    }
    for (Eigen::Matrix3d* M : {&cam.M_left, &cam.M_right}) {
      *M << focal(rng), 0.0, centre(rng), 0.0, focal(rng), centre(rng), 0.0, 0.0, 1.0;
    }
    worst_ortho = std::max(worst_ortho, orthogonality_error(cam.R));
    const Eigen::Matrix3d F = geometry::fundamental_matrix(cam);
    // Joints in front of both cameras.
    Eigen::Vector3d p(u(rng), u(rng), 0.0);
    p.z() = 3.0 + 2.0 * std::abs(u(rng));
    worst_res = std::max(worst_res, geometry::epipolar_residual(cam, F, p));
  }
  return {worst_res <= kEpipolarTol && worst_ortho <= kOrthoTol,
          fmt("max residual %.3g over 1e4 pairs, max |R^T R - I| %.3g", worst_res, worst_ortho)};
}

Outcome ac6() {
  std::mt19937_64 rng(606);
  std::normal_distribution<double> g(0.0, 1.0);
  const int dim = 3, tau_star = 3, k = 6;
  coding::CoderConfig base;
  base.alpha_iter = 20;
  int simplex_fail = 0, sparsity_fail = 0, monotone_fail = 0, encodes = 0;
  const coding::CoderKind kinds[] = {coding::CoderKind::HA, coding::CoderKind::SA,
                                     coding::CoderKind::LcSA, coding::CoderKind::SC,
                                     coding::CoderKind::SCPlus, coding::CoderKind::LLC};
  for (int i = 0; i < 1000; ++i) {
    Eigen::MatrixXd atoms(dim * tau_star, k);
    for (Eigen::Index e = 0; e < atoms.size(); ++e) atoms(e) = g(rng);
    const coding::Dictionary dict(atoms, dim, tau_star);
    Eigen::MatrixXd psi_values(dim, 3 * 4);
    for (Eigen::Index e = 0; e < psi_values.size(); ++e) psi_values(e) = g(rng);
    const encoder::FeatureMap psi(psi_values, 3, 1, 4);
    coding::CoderConfig cfg = base;
    cfg.kind = kinds[i % 6];
    coding::ObjectiveTrace trace;
    const coding::Code a = coding::encode(psi, dict, cfg, std::nullopt, &trace);
    ++encodes;
    const bool simplex_kind = cfg.kind == coding::CoderKind::HA || cfg.kind == coding::CoderKind::SA ||
                              cfg.kind == coding::CoderKind::LcSA;
    if (simplex_kind) {
      if (a.minCoeff() < 0.0 || std::abs(a.sum() - 1.0) > 1e-12) ++simplex_fail;
      const auto nnz = (a.array() != 0.0).count();
      if (cfg.kind == coding::CoderKind::HA && nnz != 1) ++sparsity_fail;
      if (cfg.kind == coding::CoderKind::LcSA && nnz > cfg.k_nn) ++sparsity_fail;
    } else {
      for (std::size_t t = 1; t < trace.size(); ++t)
        if (trace[t] > trace[t - 1]) {
          ++monotone_fail;
          break;
        }
      if (cfg.kind == coding::CoderKind::SCPlus && a.minCoeff() < 0.0) ++sparsity_fail;
    }
  }
  // Code distances on random simplex points, including the self-distance.
  int range_fail = 0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    coding::Code a(8), b(8);
    for (int e = 0; e < 8; ++e) {
      a[e] = (i % 3 == 0 && e % 2) ? 0.0 : u(rng);
      b[e] = (i % 3 == 1 && e % 3) ? 0.0 : u(rng);
    }
    a /= a.sum();
    b /= b.sum();
    for (auto kind : {coding::CodeDistanceKind::HIK, coding::CodeDistanceKind::CSK}) {
      const double d = coding::code_distance(a, b, kind);
      if (d < 0.0 || d > 2.0 || coding::code_distance(a, a, kind) != 0.0) ++range_fail;
    }
  }
  const bool pass = simplex_fail + sparsity_fail + monotone_fail + range_fail == 0;
  return {pass, fmt("%d encodes: simplex %d, sparsity %d, monotone %d failures; kernel range %d failures",
                    encodes, simplex_fail, sparsity_fail, monotone_fail, range_fail)};
}

// Desk-scale protocol shared by the trend criteria.
fsar::FsarConfig desk_config() {
  fsar::FsarConfig cfg;
  cfg.representation.grid.eta_az = 2;
  cfg.representation.grid.eta_alt = 1;
  cfg.unsupervised.dictionary_size = 64;
  cfg.unsupervised.iterations = 10;
  return cfg;
}

struct Desk {
  fsar::Workspace ws;
  fsar::Split split;
};

Desk& desk() {
  static Desk d = [] {
    const fsar::SyntheticConfig sc;  // 10 classes x 20 samples
    fsar::Workspace ws(fsar::make_synthetic_corpus(sc), desk_config().representation, 1);
    auto split = fsar::split_by_class(ws.corpus(), 5);
    return Desk{std::move(ws), std::move(split)};
  }();
  return d;
}

Outcome ac7() {
  const fsar::SyntheticConfig sc;
  auto cfg = desk_config();
  cfg.unsupervised.dictionary_size = 16;
  auto& d = desk();
  fsar::RngStreams rng(7);
  auto enc = encoder::LinearBlockEncoder::random(cfg.representation.d_prime, d.ws.joints(),
                                                 cfg.representation.blocks.block_length,
                                                 rng(fsar::RngStreams::EncoderInit));
  fsar::CodingState state{fsar::initial_dictionary(d.ws, d.split.train, enc, cfg.unsupervised,
                                                   rng(fsar::RngStreams::DictionaryInit)),
                          {}, {}};
  const fsar::EpisodeSampler sampler(d.ws.corpus(), d.split.train, 5, 1);
  const auto episodes = sampler.sample_batch(2, rng(fsar::RngStreams::Unsupervised));
  const auto ids = fsar::batch_samples(episodes);
  std::vector<const encoder::BlockStack*> stacks;
  for (int id : ids) stacks.push_back(&d.ws.grid_blocks(id));
  double first = 0.0, last = 0.0;
  for (int it = 0; it < 50; ++it) {
    const auto r = fsar::unsupervised_iteration(stacks, enc, state, cfg.unsupervised);
    if (it == 0) first = r.loss_before;
    last = r.loss_after;
  }
  return {last < first, fmt("loss %.6g -> %.6g after 50 iterations", first, last)};
}

struct TrendRow {
  double a_jeanie = 0, a_dtw = 0, b_jeanie = 0, b_dtw = 0, fused = 0;
};

Outcome ac8() {
  const auto t0 = Clock::now();
  auto& d = desk();
  const auto base = desk_config();
  TrendRow mean;
  std::string per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    fsar::EvaluationConfig ev;
    ev.episodes = 500;
    ev.seeds = {seed};
    auto accuracy = [&](const fsar::Model& m, const fsar::FsarConfig& c, fsar::ClassifierKind k) {
      fsar::EvaluationConfig e = ev;
      e.classifier = k;
      return fsar::evaluate(d.ws, d.split.test, m, c, e).accuracy;
    };
    TrendRow r;
    {
      fsar::RngStreams rng(seed);
      r.a_jeanie = accuracy(fsar::train_supervised(d.ws, d.split.train, base, rng), base,
                            fsar::ClassifierKind::Supervised);
    }
    {
      auto c = base;
      c.supervised.aligner.method = alignment::Method::SoftDTW;
      fsar::RngStreams rng(seed);
      r.a_dtw = accuracy(fsar::train_supervised(d.ws, d.split.train, c, rng), c,
                         fsar::ClassifierKind::Supervised);
    }
    {
      fsar::RngStreams rng(seed);
      r.b_jeanie = accuracy(fsar::train_unsupervised(d.ws, d.split.train, base, rng), base,
                            fsar::ClassifierKind::Unsupervised);
    }
    {
      auto c = base;
      c.unsupervised.coder.recon_distance = coding::ReconDistance::SoftDTW;
      fsar::RngStreams rng(seed);
      r.b_dtw = accuracy(fsar::train_unsupervised(d.ws, d.split.train, c, rng), c,
                         fsar::ClassifierKind::Unsupervised);
    }
    {
      fsar::RngStreams rng(seed);
      r.fused = accuracy(fsar::train_maml_fusion(d.ws, d.split.train, base, rng), base,
                         fsar::ClassifierKind::Fused);
    }
    per_seed += fmt(" [seed %d: sup %.3f/%.3f unsup %.3f/%.3f fused %.3f]", static_cast<int>(seed),
                    r.a_jeanie, r.a_dtw, r.b_jeanie, r.b_dtw, r.fused);
    mean.a_jeanie += r.a_jeanie / 3;
    mean.a_dtw += r.a_dtw / 3;
    mean.b_jeanie += r.b_jeanie / 3;
    mean.b_dtw += r.b_dtw / 3;
    mean.fused += r.fused / 3;
  }
  const double secs = seconds_since(t0);
  const bool a = mean.a_jeanie >= mean.a_dtw + kTrendPoints;
  const bool b = mean.b_jeanie >= mean.b_dtw + kTrendPoints;
  const bool c = mean.fused >= mean.a_jeanie && mean.fused >= mean.b_jeanie;
  return {a && b && c && secs <= 900.0,
          fmt("(a) sup jeanie %.3f vs soft-dtw %.3f %s; (b) unsup jeanie %.3f vs soft-dtw %.3f %s; "
              "(c) maml fused %.3f vs sup %.3f, unsup %.3f %s; %.0fs;",
              mean.a_jeanie, mean.a_dtw, a ? "ok" : "FAIL", mean.b_jeanie, mean.b_dtw,
              b ? "ok" : "FAIL", mean.fused, mean.a_jeanie, mean.b_jeanie, c ? "ok" : "FAIL", secs) +
              per_seed};
}

Outcome ac9() {
  auto& d = desk();
  double acc[2] = {0.0, 0.0};
  const int iotas[2] = {0, 2};
  for (int v = 0; v < 2; ++v) {
    auto c = desk_config();
    c.supervised.aligner.jeanie.iota = iotas[v];
    for (std::uint64_t seed : {1, 2, 3}) {
      fsar::RngStreams rng(seed);
      const auto m = fsar::train_supervised(d.ws, d.split.train, c, rng);
      fsar::EvaluationConfig e;
      e.episodes = 500;
      e.seeds = {seed};
      acc[v] += fsar::evaluate(d.ws, d.split.test, m, c, e).accuracy / 3;
    }
  }
  return {acc[1] >= acc[0], fmt("iota=2 %.3f vs iota=0 %.3f", acc[1], acc[0])};
}

Outcome ac10() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "jeanie_ac10";
  fs::create_directories(dir);
  const std::string config = (dir / "run.json").string();
  io::write_file(config, R"({"seed": 11, "representation": {"grid": {"eta_az": 2, "eta_alt": 1}},
 "supervised": {"iterations": 15}, "unsupervised": {"iterations": 3, "dictionary_size": 16},
 "fusion": {"iterations": 5}})");
  std::vector<std::string> streams;
  bool checkpoints_equal = true;
  for (const char* mode : {"sup", "maml"}) {
    std::string first_ck;
    for (int run = 0; run < 2; ++run) {
      cli::TrainOptions opts;
      opts.config_path = config;
      opts.mode = mode;
      opts.out = (dir / (std::string(mode) + std::to_string(run) + ".ck")).string();
      opts.metrics = (dir / (std::string(mode) + std::to_string(run) + ".jsonl")).string();
      std::ostringstream sink;
      cli::run_train(opts, sink);
      streams.push_back(io::read_file(opts.metrics));
      const std::string ck = io::read_file(opts.out);
      if (run == 0) first_ck = ck;
      else checkpoints_equal = checkpoints_equal && ck == first_ck;
    }
  }
  const bool same = streams[0] == streams[1] && streams[2] == streams[3] && !streams[0].empty();
  fs::remove_all(dir);
  return {same, fmt("sup and maml metrics streams %s (%zu and %zu bytes), checkpoints %s",
                    same ? "byte-identical" : "DIFFER", streams[0].size(), streams[2].size(),
                    checkpoints_equal ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4}, {"AC5", ac5},
      {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9}, {"AC10", ac10}};
  std::set<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %s %s\n", name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
