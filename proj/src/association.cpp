#include "lre/association.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "lre/error.hpp"

namespace lre {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_marginals(const CoocStats& stats, TokenId i, TokenId j) {
  if (!(stats.context_marginal(i) > 0.0) || !(stats.term_marginal(j) > 0.0)) {
    throw Error("undefined marginal");
  }
}

double pmi_of_count(const CoocStats& stats, double nij, TokenId i, TokenId j) {
  if (nij <= 0.0) return kNegInf;
  return std::log(stats.total() * nij /
                  (stats.context_marginal(i) * stats.term_marginal(j)));
}

}  // namespace

namespace {

std::string shortest(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(std::string_view s, std::string_view whole) {
  T v{};
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw Error("invalid association '" + std::string(whole) + "'");
  }
  return v;
}

}  // namespace

std::string to_string(const AssociationSpec& spec) {
  switch (spec.kind) {
    case AssociationKind::kPmi: return "pmi";
    case AssociationKind::kClippedPmi:
      return spec.alpha == 0.0 ? "ppmi" : "clipped:" + shortest(spec.alpha);
    case AssociationKind::kShiftedPmi:
      return "shifted:" + std::to_string(spec.k) + ":" + shortest(spec.smoothing_exponent);
    case AssociationKind::kLogCount: return "log-count";
    case AssociationKind::kSmoothedPmi: return "smoothed";
  }
  throw Error("unknown association");
}

AssociationSpec parse_association(std::string_view text) {
  if (text == "pmi") return AssociationSpec::pmi();
  if (text == "ppmi") return AssociationSpec::ppmi();
  if (text == "log-count") return AssociationSpec::log_count();
  if (text == "smoothed") return AssociationSpec::smoothed();
  if (text.starts_with("clipped:")) {
    return AssociationSpec::clipped(parse_number<double>(text.substr(8), text));
  }
  if (text.starts_with("shifted:")) {
    const auto rest = text.substr(8);
    const auto colon = rest.find(':');
    if (colon == std::string_view::npos) {
      return AssociationSpec::shifted(parse_number<int>(rest, text), 1.0);
    }
    return AssociationSpec::shifted(parse_number<int>(rest.substr(0, colon), text),
                                    parse_number<double>(rest.substr(colon + 1), text));
  }
  throw Error("invalid association '" + std::string(text) + "'");
}

double pmi(const CoocStats& stats, TokenId i, TokenId j) {
  require_marginals(stats, i, j);
  return pmi_of_count(stats, stats.count(i, j), i, j);
}

double smoothed_pmi(const CoocStats& stats, TokenId i, TokenId j) {
  require_marginals(stats, i, j);
  return pmi_of_count(stats, std::max(stats.count(i, j), 1.0), i, j);
}

NegativeCounts::NegativeCounts(const CoocStats& stats, int k,
                               double smoothing_exponent)
    : stats_(&stats), k_(k), context_weight_(stats.vocab_size()) {
  if (k < 1) throw Error("negative_count: k must be >= 1");
  double norm = 0.0;
  for (std::size_t i = 0; i < context_weight_.size(); ++i) {
    context_weight_[i] =
        std::pow(stats.context_marginals()[i], smoothing_exponent);
    norm += context_weight_[i];
  }
  for (auto& w : context_weight_) w = k * w / norm;
}

double NegativeCounts::operator()(TokenId i, TokenId j) const {
  require_marginals(*stats_, i, j);
  return context_weight_[i] * stats_->term_marginal(j);
}

double negative_count(const CoocStats& stats, int k, double smoothing_exponent,
                      TokenId i, TokenId j) {
  require_marginals(stats, i, j);
  if (k < 1) throw Error("negative_count: k must be >= 1");
  if (smoothing_exponent == 1.0) {
    return k * stats.context_marginal(i) * stats.term_marginal(j) /
           stats.total();
  }
  return NegativeCounts(stats, k, smoothing_exponent)(i, j);
}

double association(const AssociationSpec& spec, const CoocStats& stats,
                   TokenId i, TokenId j) {
  switch (spec.kind) {
    case AssociationKind::kPmi:
      return pmi(stats, i, j);
    case AssociationKind::kClippedPmi:
      return std::max(pmi(stats, i, j), spec.alpha);
    case AssociationKind::kShiftedPmi: {
      const double nneg =
          negative_count(stats, spec.k, spec.smoothing_exponent, i, j);
      const double nij = stats.count(i, j);
      return nij > 0.0 ? std::log(nij / nneg) : kNegInf;
    }
    case AssociationKind::kLogCount: {
      require_marginals(stats, i, j);
      const double nij = stats.count(i, j);
      return nij > 0.0 ? std::log(nij) : kNegInf;
    }
    case AssociationKind::kSmoothedPmi:
      return smoothed_pmi(stats, i, j);
  }
  throw Error("unknown association kind");
}

}  // namespace lre
