#pragma once

#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "jeanie/alignment.hpp"
#include "jeanie/encoder.hpp"

namespace jeanie::coding {

/// (d' * tau*) x k matrix; column j reshapes to a d' x tau* single-view map.
class Dictionary {
 public:
  Dictionary() = default;
  Dictionary(Eigen::MatrixXd atoms, int dim, int tau_star);

  int dim() const { return dim_; }
  int tau_star() const { return tau_star_; }
  int size() const { return static_cast<int>(atoms_.cols()); }

  const Eigen::MatrixXd& atoms() const { return atoms_; }
  Eigen::MatrixXd& atoms() { return atoms_; }

  encoder::FeatureMap atom(int j) const;

  /// k pseudo-sequences of tau* consecutive blocks cut from random positions
  /// of the given single-view maps, plus N(0, noise^2) jitter.
  static Dictionary from_samples(std::span<const encoder::FeatureMap> maps, int k, int tau_star,
                                 double noise, std::mt19937_64& rng);

  bool operator==(const Dictionary&) const = default;

 private:
  Eigen::MatrixXd atoms_;
  int dim_ = 0;
  int tau_star_ = 0;
};

using Code = Eigen::VectorXd;

enum class CoderKind { HA, SC, SCPlus, LLC, SA, LcSA };
enum class ReconDistance { JEANIE, SoftDTW, SquaredEuclidean };
enum class CodeDistanceKind { L1, L2, HIK, CSK };

struct CoderConfig {
  CoderKind kind = CoderKind::LcSA;
  double kappa = 0.1;
  double sigma = 1.0;
  int k_nn = 5;
  int alpha_iter = 50;
  double omega = 0.01;
  double tolerance = 1e-6;
  ReconDistance recon_distance = ReconDistance::JEANIE;
  // Errors are squared distances, so the soft-min must stay close to the hard
  // minimum: its -gamma log(#paths) bias can push d below zero and scramble
  // the atom ranking.
  alignment::JeanieConfig jeanie{{0.01, false}, 2};
  alignment::BaseDistance base;

  void validate(int atoms) const;
  alignment::AlignerConfig aligner() const;
};

bool is_closed_form(CoderKind kind);

Code one_hot(int size, int index);

encoder::FeatureMap reconstruct(const Dictionary& dict, const Code& code);

/// Configured alignment distance between a (possibly multi-view) map and a
/// single-view reconstruction.
double reconstruction_distance(const encoder::FeatureMap& psi, const encoder::FeatureMap& recon,
                               const CoderConfig& cfg);
/// Squared reconstruction distance.
double reconstruction_error(const encoder::FeatureMap& psi, const Dictionary& dict,
                            const Code& code, const CoderConfig& cfg);

struct ReconstructionGradient {
  double error = 0.0;
  Code d_code;               // k
  Eigen::MatrixXd d_atoms;   // same shape as the dictionary
  Eigen::MatrixXd d_features;  // same shape as psi.values()
};

ReconstructionGradient reconstruction_gradient(const encoder::FeatureMap& psi,
                                               const Dictionary& dict, const Code& code,
                                               const CoderConfig& cfg);

/// Squared distance from psi to every atom.
Eigen::VectorXd atom_errors(const encoder::FeatureMap& psi, const Dictionary& dict,
                            const CoderConfig& cfg);

/// Gibbs weights exp(-e_j / (2 sigma^2)) normalised over the atoms flagged in
/// `mask` (nonzero entries; all atoms when empty).
Code soft_assignment(const Eigen::VectorXd& errors, double sigma, std::span<const char> mask = {});

/// LLC non-locality vector exp(e_j / sigma), min-max rescaled to [0, 1].
Eigen::VectorXd llc_locality(const Eigen::VectorXd& errors, double sigma);

Code encode_HA(const encoder::FeatureMap& psi, const Dictionary& dict, const CoderConfig& cfg);
Code encode_SA(const encoder::FeatureMap& psi, const Dictionary& dict, const CoderConfig& cfg);
Code encode_LcSA(const encoder::FeatureMap& psi, const Dictionary& dict, const CoderConfig& cfg);

Code encode_HA(const Eigen::VectorXd& errors);
Code encode_LcSA(const Eigen::VectorXd& errors, double sigma, int k_nn);

/// Objective values after every accepted iteration, starting with the initial one.
using ObjectiveTrace = std::vector<double>;

Code encode_SC(const encoder::FeatureMap& psi, const Dictionary& dict, const CoderConfig& cfg,
               std::optional<Code> init = std::nullopt, ObjectiveTrace* trace = nullptr);
Code encode_SCPlus(const encoder::FeatureMap& psi, const Dictionary& dict, const CoderConfig& cfg,
                   std::optional<Code> init = std::nullopt, ObjectiveTrace* trace = nullptr);
Code encode_LLC(const encoder::FeatureMap& psi, const Dictionary& dict, const CoderConfig& cfg,
                std::optional<Code> init = std::nullopt, ObjectiveTrace* trace = nullptr);

/// Continues an iterative coder (SC, SC+ or LLC) from `init` for up to
/// cfg.alpha_iter guarded steps. For LLC the given locality vector is used as is,
/// so repeated calls on one batch optimise a single fixed objective.
Code refine_code(const encoder::FeatureMap& psi, const Dictionary& dict, const CoderConfig& cfg,
                 const Code& init, const Eigen::VectorXd& locality, ObjectiveTrace* trace = nullptr);

/// Dispatches on cfg.kind.
Code encode(const encoder::FeatureMap& psi, const Dictionary& dict, const CoderConfig& cfg,
            std::optional<Code> init = std::nullopt, ObjectiveTrace* trace = nullptr);

/// kappa * Omega(alpha): ||alpha||_1 for SC/SC+, ||l (.) alpha||^2 for LLC with
/// locality vector l, zero for the closed-form coders.
double coder_penalty(const Code& code, const CoderConfig& cfg, const Eigen::VectorXd& locality);

/// Sum of squared reconstruction distances of the batch; codes are columns.
double batch_reconstruction_error(std::span<const encoder::FeatureMap> batch,
                                  const Dictionary& dict, const Eigen::MatrixXd& codes,
                                  const CoderConfig& cfg, int jobs = 1);

/// Gradient descent on the atoms with codes and features held fixed. A step
/// that increases the batch error is halved until it does not.
Dictionary learn_dictionary(std::span<const encoder::FeatureMap> batch,
                            const Eigen::MatrixXd& codes, Dictionary dict, int steps,
                            double learning_rate, const CoderConfig& cfg, int jobs = 1);

/// L1/L2 norms of a - b, or the kernel-induced k(a,a) + k(b,b) - 2 k(a,b) for
/// the histogram-intersection and chi-square kernels. The kernel forms require
/// nonnegative, l1-normalised codes.
double code_distance(const Code& a, const Code& b, CodeDistanceKind kind);

/// {"d_prime", "tau_star", "k", "atoms" (row-major)}.
void save_dictionary(const Dictionary& dict, const std::string& path);
Dictionary load_dictionary(const std::string& path);

/// One row per nonzero coefficient: sample_id,atom,value.
void write_codes_csv(std::span<const std::string> sample_ids, const Eigen::MatrixXd& codes,
                     std::ostream& out);

}  // namespace jeanie::coding
