#pragma once

// Association functions phi(i, j) computed from cooccurrence statistics.

#include <string>
#include <string_view>
#include <vector>

#include "lre/corpus.hpp"

namespace lre {

enum class AssociationKind {
  kPmi,          // ln(N Nij / (Ni Nj))
  kClippedPmi,   // max(PMI, alpha); alpha = 0 gives PPMI
  kShiftedPmi,   // ln(Nij / Nij-)
  kLogCount,     // ln Nij
  kSmoothedPmi,  // PMI with Nij replaced by max(Nij, 1)
};

struct AssociationSpec {
  AssociationKind kind = AssociationKind::kPmi;
  double alpha = 0.0;               // clip floor for kClippedPmi
  int k = 1;                        // negatives per positive for kShiftedPmi
  double smoothing_exponent = 0.75; // negative-sample unigram smoothing

  static AssociationSpec pmi() { return {}; }
  static AssociationSpec ppmi() { return clipped(0.0); }
  static AssociationSpec clipped(double alpha) {
    return {AssociationKind::kClippedPmi, alpha};
  }
  static AssociationSpec shifted(int k, double smoothing_exponent) {
    return {AssociationKind::kShiftedPmi, 0.0, k, smoothing_exponent};
  }
  static AssociationSpec log_count() { return {AssociationKind::kLogCount}; }
  static AssociationSpec smoothed() { return {AssociationKind::kSmoothedPmi}; }
};

/// Text form: pmi, ppmi, clipped:ALPHA, shifted:K:S, log-count, smoothed.
std::string to_string(const AssociationSpec& spec);
AssociationSpec parse_association(std::string_view text);

/// ln(N Nij / (Ni Nj)); -inf when Nij = 0. Throws "undefined marginal" when
/// either marginal is zero.
double pmi(const CoocStats& stats, TokenId i, TokenId j);

/// Swivel's PMI*: PMI with Nij -> max(Nij, 1).
double smoothed_pmi(const CoocStats& stats, TokenId i, TokenId j);

/// k * Nj * Ni^s / sum_i' Ni'^s. With s = 1 this is k Ni Nj / N.
double negative_count(const CoocStats& stats, int k, double smoothing_exponent,
                      TokenId i, TokenId j);

/// Precomputed negative counts for repeated queries over one stats object.
class NegativeCounts {
 public:
  NegativeCounts(const CoocStats& stats, int k, double smoothing_exponent);

  double operator()(TokenId i, TokenId j) const;
  int k() const { return k_; }

 private:
  const CoocStats* stats_;
  int k_;
  std::vector<double> context_weight_;  // k * Ni^s / sum Ni'^s
};

double association(const AssociationSpec& spec, const CoocStats& stats,
                   TokenId i, TokenId j);

}  // namespace lre
