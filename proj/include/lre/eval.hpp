#pragma once

// How closely a trained model realizes its family's fixed point, plus the
// PMI histogram and GloVe bias diagnostics.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lre/corpus.hpp"
#include "lre/model.hpp"
#include "lre/objective.hpp"

namespace lre {

struct Correlation {
  double r = 0.0;
  bool degenerate = false;  // one side is constant; r reported as 0
};

Correlation pearson(std::span<const double> x, std::span<const double> y);
double rmse(std::span<const double> x, std::span<const double> y);

struct FixedPointReport {
  Family family = Family::kSvdMse;
  std::string measured;  // which model quantity was compared
  std::string target;    // which corpus statistic it was compared with
  double pearson_r = 0.0;
  double rmse = 0.0;
  std::size_t pair_count = 0;
  double count_floor = 0.0;
  double min_count = 0.0;  // smallest Nij among included pairs
  // A second, ungated comparison (e.g. <i|j> vs PMI - ln k for SGNS).
  std::optional<std::string> secondary_measured;
  std::optional<std::string> secondary_target;
  std::optional<double> secondary_r;
  std::optional<double> secondary_rmse;
};

/// Compares the family's bilinear quantity with its target on pairs with
/// Nij >= count_floor:
///   svd-mse       <i|j>            vs the SVD target (PMI by default)
///   sgns/fasttext <i|j>            vs ln(Nij / Nij-)   (+ PMI - ln k)
///   glove         <i|j>            vs PMI              (+ psi vs ln Nij)
///   lds           psi              vs ln Nij - C       (+ <i|j> vs PMI)
///   swivel        <i|j>            vs PMI
/// Throws when no pair qualifies.
FixedPointReport fixed_point_report(const EmbeddingModel& model,
                                    const CoocStats& stats,
                                    const ObjectiveSpec& objective,
                                    double count_floor = 5.0);

void write_summary(std::ostream& out, const FixedPointReport& report);

struct Histogram {
  std::vector<double> edges;          // bins + 1 edges
  std::vector<std::size_t> counts;    // bins
  std::size_t sample_size = 0;
  double mean = 0.0;
  double stdev = 0.0;                 // population
  double skewness = 0.0;              // 0 when stdev = 0
  double excess_kurtosis = 0.0;       // 0 when stdev = 0
};

Histogram make_histogram(std::span<const double> values, int bins);
/// Histogram of PMI(i, j) over all pairs with Nij > 0.
Histogram pmi_histogram(const CoocStats& stats, int bins);
std::vector<double> observed_pmi_values(const CoocStats& stats);

struct BiasPoint {
  TokenId id;
  double context_bias;
  double term_bias;
  double context_reference;  // ln(Ni / sqrt N)
  double term_reference;     // ln(Nj / sqrt N)
};

struct BiasDiagnostic {
  std::vector<BiasPoint> points;
  Correlation context;
  Correlation term;
};

/// Learned biases against ln(N_word / sqrt N). Requires a biased-dot model.
BiasDiagnostic glove_bias_diagnostic(const EmbeddingModel& model,
                                     const CoocStats& stats);

void write_histogram_tsv(const Histogram& h, const std::filesystem::path& path);
/// One row per observed pair: context, term, count, pmi.
void write_pmi_tsv(const CoocStats& stats, std::span<const std::string> tokens,
                   const std::filesystem::path& path);
/// One row per vocabulary entry.
void write_bias_tsv(const BiasDiagnostic& diag, std::span<const std::string> tokens,
                    const std::filesystem::path& path);

}  // namespace lre
