#include "lre/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>

#include "lre/association.hpp"
#include "lre/error.hpp"

namespace lre {

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("pearson: length mismatch");
  if (x.empty()) throw Error("pearson: empty input");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = x[k] - mx, dy = y[k] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return {0.0, true};
  return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), false};
}

double rmse(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("rmse: length mismatch");
  if (x.empty()) throw Error("rmse: empty input");
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
  return std::sqrt(s / static_cast<double>(x.size()));
}

FixedPointReport fixed_point_report(const EmbeddingModel& model,
                                    const CoocStats& stats,
                                    const ObjectiveSpec& objective,
                                    double count_floor) {
  if (model.num_contexts() != stats.vocab_size() ||
      model.num_terms() != stats.vocab_size()) {
    throw Error("fixed_point_report: model and stats vocabularies differ");
  }
  const Objective obj(objective, stats);
  const double c = model.lds_constant.value_or(0.0);

  FixedPointReport rep;
  rep.family = objective.family;
  rep.count_floor = count_floor;
  std::vector<double> measured, target, measured2, target2;
  double min_count = std::numeric_limits<double>::infinity();

  // Composed term vectors once, instead of per pair.
  Eigen::MatrixXd terms = model.vectors;
  if (model.kernel.kind == KernelKind::kSubwordDot) {
    for (TokenId j = 0; j < model.num_terms(); ++j) {
      terms.col(j) = model.subwords->compose(j);
    }
  }

  for (const auto& e : stats.entries()) {
    if (e.count < count_floor) continue;
    const TokenId i = e.context, j = e.term;
    const double dot = model.covectors.row(i).dot(terms.col(j));
    const double p = pmi(stats, i, j);
    min_count = std::min(min_count, e.count);
    switch (objective.family) {
      case Family::kSvdMse:
        measured.push_back(dot);
        target.push_back(obj.phi(i, j, e.count));
        break;
      case Family::kSgns:
      case Family::kFastTextSgns:
        measured.push_back(dot);
        target.push_back(obj.phi(i, j, e.count));
        measured2.push_back(dot);
        target2.push_back(p - std::log(static_cast<double>(objective.k)));
        break;
      case Family::kGlove:
        measured.push_back(dot);
        target.push_back(p);
        measured2.push_back(psi(model, i, j));
        target2.push_back(std::log(e.count));
        break;
      case Family::kLds:
        measured.push_back(psi(model, i, j));
        target.push_back(std::log(e.count) - c);
        measured2.push_back(dot);
        target2.push_back(p);
        break;
      case Family::kSwivel:
        measured.push_back(dot);
        target.push_back(p);
        break;
    }
  }
  if (measured.empty()) {
    throw Error("fixed_point_report: no pairs with count >= floor");
  }

  switch (objective.family) {
    case Family::kSvdMse:
      rep.measured = "<i|j>";
      rep.target = "svd target";
      break;
    case Family::kSgns:
    case Family::kFastTextSgns:
      rep.measured = "<i|j>";
      rep.target = "ln(Nij/Nij-)";
      rep.secondary_measured = "<i|j>";
      rep.secondary_target = "PMI - ln k";
      break;
    case Family::kGlove:
      rep.measured = "<i|j>";
      rep.target = "PMI";
      rep.secondary_measured = "psi";
      rep.secondary_target = "ln Nij";
      break;
    case Family::kLds:
      rep.measured = "psi";
      rep.target = "ln Nij - C";
      rep.secondary_measured = "<i|j>";
      rep.secondary_target = "PMI";
      break;
    case Family::kSwivel:
      rep.measured = "<i|j>";
      rep.target = "PMI";
      break;
  }
  rep.pair_count = measured.size();
  rep.min_count = min_count;
  rep.pearson_r = pearson(measured, target).r;
  rep.rmse = rmse(measured, target);
  if (!measured2.empty()) {
    rep.secondary_r = pearson(measured2, target2).r;
    rep.secondary_rmse = rmse(measured2, target2);
  }
  return rep;
}

void write_summary(std::ostream& out, const FixedPointReport& r) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::fixed << std::setprecision(4);
  out << "family=" << to_string(r.family) << '\n'
      << "measured=" << r.measured << '\n'
      << "target=" << r.target << '\n'
      << "pearson_r=" << r.pearson_r << '\n'
      << std::setprecision(6) << std::scientific << "rmse=" << r.rmse << '\n'
      << std::defaultfloat << "pair_count=" << r.pair_count << '\n'
      << "count_floor=" << r.count_floor << '\n';
  if (r.secondary_r) {
    out << std::fixed << std::setprecision(4)
        << "secondary_measured=" << *r.secondary_measured << '\n'
        << "secondary_target=" << *r.secondary_target << '\n'
        << "secondary_pearson_r=" << *r.secondary_r << '\n'
        << std::setprecision(6) << std::scientific
        << "secondary_rmse=" << *r.secondary_rmse << '\n';
  }
  out.flags(flags);
  out.precision(prec);
}

// ---------------------------------------------------------------------------
// Histogram

Histogram make_histogram(std::span<const double> values, int bins) {
  if (values.empty()) throw Error("histogram: no values");
  if (bins < 1) throw Error("histogram: bins must be >= 1");
  Histogram h;
  h.sample_size = values.size();

  // Streaming central moments (pairwise update of M2, M3, M4).
  double n = 0.0, mean = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
  double lo = values[0], hi = values[0];
  for (double x : values) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    const double n1 = n;
    n += 1.0;
    const double delta = x - mean;
    const double dn = delta / n;
    const double dn2 = dn * dn;
    const double t = delta * dn * n1;
    mean += dn;
    m4 += t * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * m2 - 4.0 * dn * m3;
    m3 += t * dn * (n - 2.0) - 3.0 * dn * m2;
    m2 += t;
  }
  h.mean = mean;
  const double var = m2 / n;
  h.stdev = std::sqrt(var);
  if (var > 0.0) {
    h.skewness = (m3 / n) / std::pow(var, 1.5);
    h.excess_kurtosis = (m4 / n) / (var * var) - 3.0;
  }

  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / bins;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) h.edges[b] = lo + width * b;
  h.edges.back() = hi;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double x : values) {
    auto b = static_cast<std::size_t>((x - lo) / width);
    h.counts[std::min(b, h.counts.size() - 1)]++;
  }
  return h;
}

std::vector<double> observed_pmi_values(const CoocStats& stats) {
  std::vector<double> v;
  v.reserve(stats.nonzero_count());
  for (const auto& e : stats.entries()) v.push_back(pmi(stats, e.context, e.term));
  return v;
}

Histogram pmi_histogram(const CoocStats& stats, int bins) {
  if (stats.empty()) throw Error("pmi_histogram: no observed pairs");
  return make_histogram(observed_pmi_values(stats), bins);
}

// ---------------------------------------------------------------------------
// GloVe biases

BiasDiagnostic glove_bias_diagnostic(const EmbeddingModel& model,
                                     const CoocStats& stats) {
  if (model.kernel.kind != KernelKind::kBiasedDot) {
    throw Error("glove_bias_diagnostic: model kernel is not biased-dot");
  }
  if (model.num_contexts() != stats.vocab_size()) {
    throw Error("glove_bias_diagnostic: model and stats vocabularies differ");
  }
  BiasDiagnostic diag;
  const double half_log_n = 0.5 * std::log(stats.total());
  std::vector<double> bc, rc, bt, rt;
  for (TokenId w = 0; w < stats.vocab_size(); ++w) {
    const double ni = stats.context_marginal(w);
    const double nj = stats.term_marginal(w);
    if (!(ni > 0.0) || !(nj > 0.0)) continue;
    BiasPoint p{w, model.context_bias(w), model.term_bias(w),
                std::log(ni) - half_log_n, std::log(nj) - half_log_n};
    bc.push_back(p.context_bias);
    rc.push_back(p.context_reference);
    bt.push_back(p.term_bias);
    rt.push_back(p.term_reference);
    diag.points.push_back(p);
  }
  if (diag.points.empty()) throw Error("glove_bias_diagnostic: no observed words");
  diag.context = pearson(bc, rc);
  diag.term = pearson(bt, rt);
  return diag;
}

// ---------------------------------------------------------------------------
// TSV output

namespace {

std::ofstream open_tsv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out << std::setprecision(17);
  return out;
}

}  // namespace

void write_histogram_tsv(const Histogram& h, const std::filesystem::path& path) {
  auto out = open_tsv(path);
  out << "# sample_size=" << h.sample_size << " mean=" << h.mean
      << " stdev=" << h.stdev << " skewness=" << h.skewness
      << " excess_kurtosis=" << h.excess_kurtosis << '\n';
  out << "lo\thi\tcount\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    out << h.edges[b] << '\t' << h.edges[b + 1] << '\t' << h.counts[b] << '\n';
  }
}

void write_pmi_tsv(const CoocStats& stats, std::span<const std::string> tokens,
                   const std::filesystem::path& path) {
  auto out = open_tsv(path);
  out << "context\tterm\tcount\tpmi\n";
  for (const auto& e : stats.entries()) {
    out << tokens[e.context] << '\t' << tokens[e.term] << '\t' << e.count << '\t'
        << pmi(stats, e.context, e.term) << '\n';
  }
}

void write_bias_tsv(const BiasDiagnostic& diag, std::span<const std::string> tokens,
                    const std::filesystem::path& path) {
  auto out = open_tsv(path);
  out << "# context_r=" << diag.context.r << " term_r=" << diag.term.r
      << (diag.context.degenerate || diag.term.degenerate
              ? " degenerate: constant input"
              : "")
      << '\n';
  out << "token\tcontext_bias\tterm_bias\tln_Ni_over_sqrtN\tln_Nj_over_sqrtN\n";
  for (const auto& p : diag.points) {
    out << tokens[p.id] << '\t' << p.context_bias << '\t' << p.term_bias << '\t'
        << p.context_reference << '\t' << p.term_reference << '\n';
  }
}

}  // namespace lre
