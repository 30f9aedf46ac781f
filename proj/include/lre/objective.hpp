#pragma once

// Per-pair losses f_ij(psi, phi) and their characteristic gradients
// df/dpsi = multiplier * difference for each embedding family.

#include <string>
#include <string_view>

#include "lre/association.hpp"
#include "lre/corpus.hpp"

namespace lre {

enum class Family { kSvdMse, kSgns, kFastTextSgns, kGlove, kLds, kSwivel };

std::string to_string(Family family);
/// Accepts svd-mse, sgns, fasttext, glove, lds, swivel.
Family parse_family(std::string_view name);

struct ObjectiveSpec {
  Family family = Family::kSvdMse;
  int k = 5;                          // negatives per positive (SGNS, FastText)
  double x_max = 100.0;               // GloVe/LDS weight cap
  double beta = 0.75;                 // GloVe/LDS weight exponent
  double smoothing_exponent = 0.75;   // negative-sample smoothing (SGNS, FastText)
  // SVD_MSE regression target. Must be finite wherever it is evaluated, so
  // plain PMI only works on observed pairs.
  AssociationSpec svd_target = AssociationSpec::pmi();

  void validate() const;
};

struct CharGrad {
  double multiplier = 0.0;
  double difference = 0.0;
  double value = 0.0;

  static CharGrad make(double multiplier, double difference) {
    return {multiplier, difference, multiplier * difference};
  }
};

enum class FixedPointKind {
  kExact,          // gradient vanishes at psi
  kOneSided,       // gradient only tends to zero as psi -> psi (Swivel, Nij = 0)
  kUnconstrained,  // loss is identically zero (GloVe/LDS, Nij = 0)
};

struct FixedPoint {
  double psi;
  FixedPointKind kind;
};

/// GloVe weighting h(x) = (min(x, x_max) / x_max)^beta.
double glove_weight(double x, double x_max, double beta);

double sigmoid(double x);
/// ln(1 + e^x) without overflow.
double softplus(double x);

/// Binds an objective to one stats object, caching what per-pair evaluation
/// needs. The stats must outlive this object.
class Objective {
 public:
  Objective(const ObjectiveSpec& spec, const CoocStats& stats);

  const ObjectiveSpec& spec() const { return spec_; }
  const CoocStats& stats() const { return *stats_; }

  /// Whether pairs with Nij = 0 contribute to the loss.
  bool uses_unobserved_pairs() const;

  /// nij must equal stats().count(i, j); it is passed in so that sweeps over
  /// sparse columns avoid a lookup. lds_constant is C for the LDS family.
  CharGrad char_grad(double psi, TokenId i, TokenId j, double nij,
                     double lds_constant = 0.0) const;
  double loss(double psi, TokenId i, TokenId j, double nij,
              double lds_constant = 0.0) const;
  /// Supremum over psi of d^2 f / d psi^2; the trainer caps per-pair steps
  /// with it.
  double curvature_bound(TokenId i, TokenId j, double nij) const;
  FixedPoint fixed_point(TokenId i, TokenId j, double nij,
                         double lds_constant = 0.0) const;

  /// The association the family drives psi towards.
  double phi(TokenId i, TokenId j, double nij) const;

 private:
  void require_marginals(TokenId i, TokenId j) const;
  double pmi_of(TokenId i, TokenId j, double nij) const;
  double negative(TokenId i, TokenId j) const;

  ObjectiveSpec spec_;
  const CoocStats* stats_;
  std::vector<double> neg_context_weight_;  // k * Ni^s / sum Ni'^s
};

CharGrad char_grad(const ObjectiveSpec& spec, double psi, const CoocStats& stats,
                   TokenId i, TokenId j, double lds_constant = 0.0);
double loss(const ObjectiveSpec& spec, double psi, const CoocStats& stats,
            TokenId i, TokenId j, double lds_constant = 0.0);
FixedPoint fixed_point(const ObjectiveSpec& spec, const CoocStats& stats,
                       TokenId i, TokenId j, double lds_constant = 0.0);

}  // namespace lre
