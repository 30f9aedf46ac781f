#include "lre/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lre/error.hpp"

namespace lre {
namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

std::string to_string(Family family) {
  switch (family) {
    case Family::kSvdMse: return "svd-mse";
    case Family::kSgns: return "sgns";
    case Family::kFastTextSgns: return "fasttext";
    case Family::kGlove: return "glove";
    case Family::kLds: return "lds";
    case Family::kSwivel: return "swivel";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  if (name == "svd-mse") return Family::kSvdMse;
  if (name == "sgns") return Family::kSgns;
  if (name == "fasttext") return Family::kFastTextSgns;
  if (name == "glove") return Family::kGlove;
  if (name == "lds") return Family::kLds;
  if (name == "swivel") return Family::kSwivel;
  throw Error("unknown family '" + std::string(name) + "'");
}

void ObjectiveSpec::validate() const {
  if (k < 1) throw Error("objective: k must be >= 1");
  if (!(x_max > 0.0)) throw Error("objective: x_max must be > 0");
  if (!(beta > 0.0 && beta <= 1.0)) throw Error("objective: beta must be in (0, 1]");
}

double glove_weight(double x, double x_max, double beta) {
  if (x <= 0.0) return 0.0;
  return std::pow(std::min(x, x_max) / x_max, beta);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

Objective::Objective(const ObjectiveSpec& spec, const CoocStats& stats)
    : spec_(spec), stats_(&stats) {
  spec_.validate();
  if (spec_.family == Family::kSgns || spec_.family == Family::kFastTextSgns) {
    const auto& marg = stats.context_marginals();
    neg_context_weight_.resize(marg.size());
    double norm = 0.0;
    for (std::size_t i = 0; i < marg.size(); ++i) {
      neg_context_weight_[i] = std::pow(marg[i], spec_.smoothing_exponent);
      norm += neg_context_weight_[i];
    }
    for (auto& w : neg_context_weight_) w = spec_.k * w / norm;
  }
}

bool Objective::uses_unobserved_pairs() const {
  switch (spec_.family) {
    case Family::kSgns:
    case Family::kFastTextSgns:
    case Family::kSwivel:
      return true;
    case Family::kGlove:
    case Family::kLds:
      return false;
    case Family::kSvdMse:
      return spec_.svd_target.kind == AssociationKind::kClippedPmi ||
             spec_.svd_target.kind == AssociationKind::kSmoothedPmi;
  }
  return false;
}

void Objective::require_marginals(TokenId i, TokenId j) const {
  if (!(stats_->context_marginal(i) > 0.0) || !(stats_->term_marginal(j) > 0.0)) {
    throw Error("undefined marginal");
  }
}

double Objective::pmi_of(TokenId i, TokenId j, double nij) const {
  const double ni = stats_->context_marginal(i);
  const double nj = stats_->term_marginal(j);
  if (!(ni > 0.0) || !(nj > 0.0)) throw Error("undefined marginal");
  if (nij <= 0.0) return kNegInf;
  return std::log(stats_->total() * nij / (ni * nj));
}

double Objective::negative(TokenId i, TokenId j) const {
  return neg_context_weight_[i] * stats_->term_marginal(j);
}

double Objective::phi(TokenId i, TokenId j, double nij) const {
  switch (spec_.family) {
    case Family::kSvdMse: {
      const auto& t = spec_.svd_target;
      switch (t.kind) {
        case AssociationKind::kPmi: return pmi_of(i, j, nij);
        case AssociationKind::kClippedPmi: return std::max(pmi_of(i, j, nij), t.alpha);
        case AssociationKind::kSmoothedPmi: return pmi_of(i, j, std::max(nij, 1.0));
        default: return association(t, *stats_, i, j);
      }
    }
    case Family::kSgns:
    case Family::kFastTextSgns:
      require_marginals(i, j);
      return nij > 0.0 ? std::log(nij / negative(i, j)) : kNegInf;
    case Family::kGlove:
    case Family::kLds:
      require_marginals(i, j);
      return nij > 0.0 ? std::log(nij) : kNegInf;
    case Family::kSwivel:
      return nij > 0.0 ? pmi_of(i, j, nij) : pmi_of(i, j, 1.0);
  }
  throw Error("unknown family");
}

CharGrad Objective::char_grad(double psi, TokenId i, TokenId j, double nij,
                              double lds_constant) const {
  switch (spec_.family) {
    case Family::kSvdMse: {
      const double target = phi(i, j, nij);
      if (!std::isfinite(target)) {
        throw Error("svd-mse target is unbounded at an unobserved pair");
      }
      return CharGrad::make(2.0, psi - target);
    }
    case Family::kSgns:
    case Family::kFastTextSgns: {
      require_marginals(i, j);
      const double nneg = negative(i, j);
      // sigma(ln(a/b)) = a/(a+b); exact at a = 0.
      return CharGrad::make(nij + nneg, sigmoid(psi) - nij / (nij + nneg));
    }
    case Family::kGlove:
      require_marginals(i, j);
      if (nij <= 0.0) return {};
      return CharGrad::make(2.0 * glove_weight(nij, spec_.x_max, spec_.beta),
                            psi - std::log(nij));
    case Family::kLds:
      require_marginals(i, j);
      if (nij <= 0.0) return {};
      return CharGrad::make(4.0 * glove_weight(nij, spec_.x_max, spec_.beta),
                            psi - std::log(nij) + lds_constant);
    case Family::kSwivel:
      if (nij > 0.0) return CharGrad::make(std::sqrt(nij), psi - pmi_of(i, j, nij));
      return CharGrad::make(1.0, sigmoid(psi - pmi_of(i, j, 1.0)));
  }
  throw Error("unknown family");
}

double Objective::loss(double psi, TokenId i, TokenId j, double nij,
                       double lds_constant) const {
  switch (spec_.family) {
    case Family::kSvdMse: {
      const double target = phi(i, j, nij);
      if (!std::isfinite(target)) {
        throw Error("svd-mse target is unbounded at an unobserved pair");
      }
      const double r = psi - target;
      return r * r;
    }
    case Family::kSgns:
    case Family::kFastTextSgns: {
      require_marginals(i, j);
      // -[Nij ln sigma(psi) + Nij- ln(1 - sigma(psi))]
      return nij * softplus(-psi) + negative(i, j) * softplus(psi);
    }
    case Family::kGlove: {
      require_marginals(i, j);
      if (nij <= 0.0) return 0.0;
      const double r = psi - std::log(nij);
      return glove_weight(nij, spec_.x_max, spec_.beta) * r * r;
    }
    case Family::kLds: {
      require_marginals(i, j);
      if (nij <= 0.0) return 0.0;
      // Twice h [ln Nij - psi - C]^2, so that df/dpsi = 4h (psi - ln Nij + C).
      const double r = std::log(nij) - psi - lds_constant;
      return 2.0 * glove_weight(nij, spec_.x_max, spec_.beta) * r * r;
    }
    case Family::kSwivel: {
      if (nij > 0.0) {
        const double r = psi - pmi_of(i, j, nij);
        return 0.5 * std::sqrt(nij) * r * r;
      }
      return softplus(psi - pmi_of(i, j, 1.0));
    }
  }
  throw Error("unknown family");
}

double Objective::curvature_bound(TokenId i, TokenId j, double nij) const {
  switch (spec_.family) {
    case Family::kSvdMse:
      return 2.0;
    case Family::kSgns:
    case Family::kFastTextSgns:
      return 0.25 * (nij + negative(i, j));
    case Family::kGlove:
      return 2.0 * glove_weight(nij, spec_.x_max, spec_.beta);
    case Family::kLds:
      return 4.0 * glove_weight(nij, spec_.x_max, spec_.beta);
    case Family::kSwivel:
      return nij > 0.0 ? std::sqrt(nij) : 0.25;
  }
  throw Error("unknown family");
}

FixedPoint Objective::fixed_point(TokenId i, TokenId j, double nij,
                                  double lds_constant) const {
  switch (spec_.family) {
    case Family::kSvdMse: {
      const double target = phi(i, j, nij);
      if (!std::isfinite(target)) {
        throw Error("svd-mse target is unbounded at an unobserved pair");
      }
      return {target, FixedPointKind::kExact};
    }
    case Family::kSgns:
    case Family::kFastTextSgns:
      return {phi(i, j, nij), FixedPointKind::kExact};
    case Family::kGlove:
      if (nij <= 0.0) return {phi(i, j, nij), FixedPointKind::kUnconstrained};
      return {std::log(nij), FixedPointKind::kExact};
    case Family::kLds:
      if (nij <= 0.0) return {phi(i, j, nij), FixedPointKind::kUnconstrained};
      return {std::log(nij) - lds_constant, FixedPointKind::kExact};
    case Family::kSwivel:
      if (nij > 0.0) return {pmi_of(i, j, nij), FixedPointKind::kExact};
      require_marginals(i, j);
      return {kNegInf, FixedPointKind::kOneSided};
  }
  throw Error("unknown family");
}

CharGrad char_grad(const ObjectiveSpec& spec, double psi, const CoocStats& stats,
                   TokenId i, TokenId j, double lds_constant) {
  return Objective(spec, stats).char_grad(psi, i, j, stats.count(i, j), lds_constant);
}

double loss(const ObjectiveSpec& spec, double psi, const CoocStats& stats,
            TokenId i, TokenId j, double lds_constant) {
  return Objective(spec, stats).loss(psi, i, j, stats.count(i, j), lds_constant);
}

FixedPoint fixed_point(const ObjectiveSpec& spec, const CoocStats& stats,
                       TokenId i, TokenId j, double lds_constant) {
  return Objective(spec, stats).fixed_point(i, j, stats.count(i, j), lds_constant);
}

}  // namespace lre
