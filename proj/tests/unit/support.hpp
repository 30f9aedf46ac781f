#pragma once

// Shared fixtures for the unit tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lre/corpus.hpp"

namespace lre::test {

inline std::vector<std::string> words(const std::string& text) { return tokenize(text); }

/// Stats from a text with min_count 1 and no vocabulary cap.
inline CoocStats stats_of(const std::string& text, int width = 1,
                          Weighting weighting = Weighting::kFlat) {
  const auto toks = tokenize(text);
  const Vocabulary v = build_vocabulary(toks, 1, 0);
  WindowConfig cfg;
  cfg.width = width;
  cfg.weighting = weighting;
  cfg.max_vocab = 0;
  return extract_cooccurrences(toks, v, cfg);
}

/// Dense random counts on a v x v grid; about `fill` of the cells are
/// nonzero, and every row and column has at least one entry.
inline CoocStats random_stats(std::size_t v, std::uint64_t seed, double fill = 0.6,
                              double max_count = 50.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<CoocEntry> e;
  for (TokenId i = 0; i < v; ++i) {
    for (TokenId j = 0; j < v; ++j) {
      if (i == j || u(rng) < fill) {
        e.push_back({i, j, 1.0 + std::floor(u(rng) * max_count)});
      }
    }
  }
  return CoocStats::from_entries(v, std::move(e));
}

/// Dense stats whose PMI matrix is u_i . v_j plus row and column terms, so
/// its rank is at most planted_dim + 2. Every count is at least min_count.
inline CoocStats planted_stats(std::size_t v, int planted_dim, std::uint64_t seed,
                               double min_count = 5.0, double spread = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, spread);
  std::uniform_real_distribution<double> freq(0.0, 2.0);
  std::vector<std::vector<double>> u(v), w(v);
  std::vector<double> a(v);
  for (std::size_t i = 0; i < v; ++i) {
    for (int k = 0; k < planted_dim; ++k) {
      u[i].push_back(g(rng));
      w[i].push_back(g(rng));
    }
    a[i] = freq(rng);
  }
  std::vector<double> logc(v * v);
  double lo = INFINITY;
  for (std::size_t i = 0; i < v; ++i) {
    for (std::size_t j = 0; j < v; ++j) {
      double x = a[i] + a[j];
      for (int k = 0; k < planted_dim; ++k) x += u[i][k] * w[j][k];
      logc[i * v + j] = x;
      lo = std::min(lo, x);
    }
  }
  std::vector<CoocEntry> e;
  for (std::size_t i = 0; i < v; ++i) {
    for (std::size_t j = 0; j < v; ++j) {
      e.push_back({static_cast<TokenId>(i), static_cast<TokenId>(j),
                   min_count * std::exp(logc[i * v + j] - lo)});
    }
  }
  return CoocStats::from_entries(v, std::move(e));
}

}  // namespace lre::test
