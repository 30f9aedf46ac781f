#pragma once

// Gradient descent on the global loss L = sum_ij f_ij(psi_ij, phi_ij).
//
// Each epoch sweeps the configured pair set once, term by term in a seeded
// shuffled order, applying the per-pair chain-rule update
//
//   g = df/dpsi at the pre-update psi
//   |j> -= eta g d psi / d|j>      <i| -= eta g d psi / d<i|
//
// with both updates computed from pre-step values. With threads > 1 the
// term columns are split across workers that update shared parameters
// without synchronization (hogwild); only threads = 1 is reproducible.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lre/eval.hpp"
#include "lre/model.hpp"
#include "lre/objective.hpp"

namespace lre {

enum class PairPolicy { kNonzeroOnly, kAllPairs };

std::string to_string(PairPolicy policy);
PairPolicy parse_pair_policy(std::string_view name);

struct TrainConfig {
  double eta = 0.05;
  double eta_min = 0.0001;  // linear decay target for the last epoch
  int epochs = 20;
  int dim = 32;
  std::uint64_t seed = 1;
  ObjectiveSpec objective;
  KernelSpec kernel;
  PairPolicy pair_policy = PairPolicy::kNonzeroOnly;
  int threads = 1;
  // Stop when |L_e - L_{e-1}| / L_{e-1} falls below this; 0 disables.
  double convergence_tol = 0.0;
  // Non-finite loss restores the epoch's starting point and halves eta.
  int max_restarts = 5;
  // Also treat a loss increase as a failed epoch (halving until it descends).
  bool enforce_descent = false;
  // Divide every characteristic gradient by the mean multiplier over the
  // pair set, so that eta is comparable across families and corpora.
  bool normalize_multiplier = true;
  // Cap each pair's step at the one-dimensional Newton step along psi.
  bool newton_cap = true;
  // Pairs with Nij below this floor are excluded from the fixed-point report.
  double report_count_floor = 5.0;
  // Called after every accepted epoch (e.g. to write checkpoints).
  std::function<void(int epoch, double loss, const EmbeddingModel&)> on_epoch;

  /// Throws on invalid values, including a pair policy the objective cannot
  /// use (SGNS, FastText, and Swivel need all pairs).
  void validate() const;
  /// The kernel each family is defined with.
  static KernelSpec default_kernel(Family family);
};

struct TrainReport {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;
  std::vector<double> gradient_norm;
  std::vector<double> epoch_eta;
  int restarts = 0;
  bool converged = false;
  double multiplier_scale = 1.0;
  double wall_seconds = 0.0;
  std::optional<FixedPointReport> fixed_point;
};

/// Gradient of the total loss with respect to every parameter.
struct ModelGradient {
  Eigen::MatrixXd covectors;
  Eigen::MatrixXd vectors;   // empty for kSubwordDot
  Eigen::MatrixXd ngrams;    // kSubwordDot only
  Eigen::VectorXd context_bias;
  Eigen::VectorXd term_bias;
  double lds_constant = 0.0;

  double norm() const;
};

struct LossAndGradient {
  double loss = 0.0;
  ModelGradient gradient;
};

double total_loss(const EmbeddingModel& model, const Objective& objective,
                  PairPolicy policy);
LossAndGradient assemble_gradient(const EmbeddingModel& model,
                                  const Objective& objective, PairPolicy policy);

/// Parameter changes from one pair for a given scalar g = df/dpsi and step
/// eta. For kSubwordDot, `vector` is the change applied to every n-gram
/// vector of the term.
struct PairDelta {
  Eigen::VectorXd covector;
  Eigen::VectorXd vector;
  double context_bias = 0.0;
  double term_bias = 0.0;
  double lds_constant = 0.0;  // set by apply_pair_update for the LDS loss
};

/// Chain rule through the model's kernel: delta = -eta g d psi / d theta.
PairDelta kernel_backward(const EmbeddingModel& model, double g, double eta,
                          TokenId i, TokenId j);
void apply_delta(EmbeddingModel& model, const PairDelta& delta, TokenId i,
                 TokenId j);

/// One pair update at the pre-update psi. Returns the characteristic
/// gradient that was applied.
CharGrad apply_pair_update(EmbeddingModel& model, const Objective& objective,
                           double eta, TokenId i, TokenId j);

/// Mean multiplier over the pairs of the set that carry weight (1 if none).
double mean_multiplier(const Objective& objective, PairPolicy policy);

struct TrainResult {
  EmbeddingModel model;
  TrainReport report;
};

/// term_tokens is needed for the subword kernel only.
TrainResult train(const CoocStats& stats, const TrainConfig& config,
                  std::span<const std::string> term_tokens = {});

/// Continue training an existing model.
TrainReport train_model(EmbeddingModel& model, const CoocStats& stats,
                        const TrainConfig& config);

}  // namespace lre
