#include <array>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>
#include <random>
#include <string>

#include "jeanie/error.hpp"
#include "jeanie/fsar.hpp"
#include "jeanie/geometry.hpp"

namespace jeanie::fsar {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Hip, spine, neck, head, shoulders, hands, feet.
constexpr std::array<std::array<double, 3>, 10> kRestPose{{
    {0.0, 0.0, 0.0},
    {0.0, 0.25, 0.0},
    {0.0, 0.5, 0.0},
    {0.0, 0.65, 0.0},
    {-0.2, 0.48, 0.0},
    {-0.45, 0.3, 0.0},
    {0.2, 0.48, 0.0},
    {0.45, 0.3, 0.0},
    {-0.12, -0.5, 0.0},
    {0.12, -0.5, 0.0},
}};

struct Harmonic {
  int joint = 1;
  Eigen::Vector3d direction;
  double amplitude = 0.0;
  double frequency = 1.0;  // cycles per sequence
  double phase = 0.0;
};

Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v;
  do {
    v = Eigen::Vector3d(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

std::vector<Harmonic> random_harmonics(int joints, int count, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> joint(1, joints - 1);
  std::uniform_real_distribution<double> amp(0.15, 0.35);
  std::uniform_int_distribution<int> freq(2, 6);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::vector<Harmonic> motion(static_cast<std::size_t>(count));
  for (auto& h : motion) {
    h.joint = joint(rng);
    Eigen::Vector3d d = random_unit(rng);
    d.y() *= 0.3;  // mostly horizontal, so a change of heading matters
    h.direction = d.normalized();
    h.amplitude = amp(rng);
    h.frequency = 0.5 * freq(rng);
    h.phase = phase(rng);
  }
  return motion;
}

/// The family turned by `heading` about the vertical axis.
std::vector<Harmonic> turned(std::vector<Harmonic> motion, double heading) {
  const Eigen::Matrix3d R = geometry::euler_matrix({geometry::Axis::Y, heading});
  for (auto& h : motion) h.direction = R * h.direction;
  return motion;
}

}  // namespace

void SyntheticConfig::validate() const {
  require(classes >= 1 && samples_per_class >= 1, ErrorKind::Config,
          "synthetic corpus needs at least one class and one sample per class");
  require(joints >= 2, ErrorKind::Config, "synthetic skeletons need at least two joints");
  require(primitives_per_class >= 1 && primitives >= primitives_per_class, ErrorKind::Config,
          "synthetic classes need 1 <= primitives_per_class <= primitives");
  require(min_frames >= 1 && max_frames >= min_frames, ErrorKind::Config,
          "synthetic frame range must satisfy 1 <= min_frames <= max_frames");
  require(speed_warp >= 0.0 && speed_warp < 1.0, ErrorKind::Config,
          "speed_warp must lie in [0, 1) to keep time monotone");
  require(noise >= 0.0 && amplitude_jitter >= 0.0 && distractor_amplitude >= 0.0 && yaw_range_deg >= 0.0 &&
              pitch_range_deg >= 0.0 && yaw_drift_deg >= 0.0,
          ErrorKind::Config, "synthetic ranges must be nonnegative");
}

Corpus make_synthetic_corpus(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);

  std::vector<Eigen::Vector3d> rest(static_cast<std::size_t>(cfg.joints));
  std::uniform_real_distribution<double> box(-0.5, 0.5);
  for (int j = 0; j < cfg.joints; ++j) {
    if (j < static_cast<int>(kRestPose.size())) {
      const auto& p = kRestPose[static_cast<std::size_t>(j)];
      rest[static_cast<std::size_t>(j)] = Eigen::Vector3d(p[0], p[1], p[2]);
    } else {
      rest[static_cast<std::size_t>(j)] = Eigen::Vector3d(box(rng), box(rng), box(rng));
    }
  }

  // Families draw a few primitives from a shared bank, so unseen classes reuse
  // sub-motions of training classes. Classes come in twins: 2f and 2f+1
  // perform family f at headings 90 degrees apart.
  const std::vector<Harmonic> bank = random_harmonics(cfg.joints, cfg.primitives, rng);
  std::vector<int> order(bank.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<Harmonic>> motions;
  for (int c = 0; c < cfg.classes; c += 2) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Harmonic> family;
    for (int k = 0; k < cfg.primitives_per_class; ++k)
      family.push_back(bank[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]);
    motions.push_back(family);
    if (c + 1 < cfg.classes) motions.push_back(turned(family, std::numbers::pi / 2.0));
  }

  std::uniform_int_distribution<int> length(cfg.min_frames, cfg.max_frames);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  Corpus corpus;
  corpus.reserve(static_cast<std::size_t>(cfg.classes * cfg.samples_per_class));
  for (int c = 0; c < cfg.classes; ++c) {
    for (int s = 0; s < cfg.samples_per_class; ++s) {
      const int frames = length(rng);
      const double warp = cfg.speed_warp * unit(rng);
      const double yaw0 = geometry::deg_to_rad(cfg.yaw_range_deg) * unit(rng);
      const double pitch = geometry::deg_to_rad(cfg.pitch_range_deg) * unit(rng);
      const double drift = geometry::deg_to_rad(cfg.yaw_drift_deg) * unit(rng);
      const Eigen::Vector3d offset(0.1 * unit(rng), 0.0, 3.0 + 0.1 * unit(rng));
      std::vector<double> gains;
      std::vector<double> shifts;
      for (std::size_t h = 0; h < motions[static_cast<std::size_t>(c)].size(); ++h) {
        gains.push_back(1.0 + cfg.amplitude_jitter * unit(rng));
        shifts.push_back(0.3 * unit(rng));
      }
      std::vector<Harmonic> distractors = random_harmonics(cfg.joints, 2, rng);
      for (auto& h : distractors) h.amplitude *= cfg.distractor_amplitude / 0.35;

      SkeletonSequence seq(static_cast<std::size_t>(frames), static_cast<std::size_t>(cfg.joints), 0,
                           30.0);
      for (int f = 0; f < frames; ++f) {
        const double u = frames > 1 ? static_cast<double>(f) / (frames - 1) : 0.0;
        const double warped = u + warp / std::numbers::pi * std::sin(std::numbers::pi * u);
        std::vector<Eigen::Vector3d> pose = rest;
        const auto& motion = motions[static_cast<std::size_t>(c)];
        for (std::size_t h = 0; h < motion.size(); ++h) {
          const Harmonic& m = motion[h];
          pose[static_cast<std::size_t>(m.joint)] +=
              gains[h] * m.amplitude *
              std::sin(kTwoPi * m.frequency * warped + m.phase + shifts[h]) * m.direction;
        }
        for (const Harmonic& m : distractors) {
          pose[static_cast<std::size_t>(m.joint)] +=
              m.amplitude * std::sin(kTwoPi * m.frequency * warped + m.phase) * m.direction;
        }
        const double yaw = yaw0 + drift * (u - 0.5);
        const Eigen::Matrix3d R = geometry::euler_matrix({geometry::Axis::X, pitch}) *
                                  geometry::euler_matrix({geometry::Axis::Y, yaw});
        const Eigen::Vector3d hip = pose[0];
        for (int j = 0; j < cfg.joints; ++j) {
          Eigen::Vector3d p = hip + R * (pose[static_cast<std::size_t>(j)] - hip) + offset;
          for (int a = 0; a < 3; ++a) p(a) += cfg.noise * noise(rng);
          seq.joint(static_cast<std::size_t>(f), static_cast<std::size_t>(j)) = p;
        }
      }
      corpus.push_back({std::move(seq), c, "c" + std::to_string(c) + "_s" + std::to_string(s)});
    }
  }
  return corpus;
}

Split split_per_class(const Corpus& corpus, int train_per_class) {
  require(train_per_class >= 0, ErrorKind::Config, "train_per_class must be nonnegative");
  Split split;
  std::vector<int> seen;
  for (int i = 0; i < static_cast<int>(corpus.size()); ++i) {
    const int label = corpus[static_cast<std::size_t>(i)].label;
    require(label >= 0, ErrorKind::Config, "labels must be nonnegative");
    if (label >= static_cast<int>(seen.size())) seen.resize(static_cast<std::size_t>(label) + 1, 0);
    if (seen[static_cast<std::size_t>(label)]++ < train_per_class)
      split.train.push_back(i);
    else
      split.test.push_back(i);
  }
  return split;
}

Split split_by_class(const Corpus& corpus, int train_classes) {
  require(train_classes >= 0, ErrorKind::Config, "train_classes must be nonnegative");
  Split split;
  for (int i = 0; i < static_cast<int>(corpus.size()); ++i) {
    const int label = corpus[static_cast<std::size_t>(i)].label;
    require(label >= 0, ErrorKind::Config, "labels must be nonnegative");
    (label < train_classes ? split.train : split.test).push_back(i);
  }
  return split;
}

}  // namespace jeanie::fsar
