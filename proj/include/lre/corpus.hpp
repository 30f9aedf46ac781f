#pragma once

// Vocabulary construction, sliding-window cooccurrence counting, and the
// binary cooccurrence file format.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lre {

using TokenId = std::uint32_t;

/// Token <-> id map shared by the context and term roles. Ids are dense and
/// ordered by descending frequency (ties lexicographic) when built from text.
class Vocabulary {
 public:
  Vocabulary() = default;
  /// Keeps the given order; ids are positions. Rejects duplicate tokens.
  Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> freq);

  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view token) const;
  std::uint64_t freq(TokenId id) const;
  std::uint64_t total_tokens() const { return total_tokens_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && freq_ == other.freq_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> freq_;
  std::unordered_map<std::string, TokenId> ids_;
  std::uint64_t total_tokens_ = 0;
};

enum class Weighting { kFlat, kHarmonic };

struct WindowConfig {
  int width = 5;
  Weighting weighting = Weighting::kFlat;
  std::uint64_t min_count = 1;
  // 0 keeps every token that passes min_count.
  std::size_t max_vocab = 10000;
  // Subsampling threshold t in (0, 1]; disabled when empty.
  std::optional<double> undersample_t;
  std::uint64_t seed = 1;
};

struct CoocEntry {
  TokenId context;
  TokenId term;
  double count;

  bool operator==(const CoocEntry&) const = default;
};

/// Sparse context x term counts with marginals. Immutable once built.
class CoocStats {
 public:
  struct ColumnEntry {
    TokenId context;
    double count;
  };

  CoocStats() = default;

  /// Sorts entries, sums duplicate pairs, and drops zero counts. Throws on
  /// negative or non-finite counts and on ids >= vocab_size.
  static CoocStats from_entries(std::size_t vocab_size,
                                std::vector<CoocEntry> entries);

  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t nonzero_count() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  double count(TokenId context, TokenId term) const;
  double context_marginal(TokenId context) const;
  double term_marginal(TokenId term) const;
  double total() const { return total_; }

  /// All nonzero entries sorted by (context, term).
  std::span<const CoocEntry> entries() const { return entries_; }
  std::span<const CoocEntry> row(TokenId context) const;
  /// Nonzero entries of one term, sorted by context.
  std::span<const ColumnEntry> column(TokenId term) const;

  const std::vector<double>& context_marginals() const { return ctx_marg_; }
  const std::vector<double>& term_marginals() const { return term_marg_; }

  bool operator==(const CoocStats& other) const;

 private:
  void finalize();

  std::size_t vocab_size_ = 0;
  std::vector<CoocEntry> entries_;
  std::vector<std::size_t> row_ptr_;
  std::vector<ColumnEntry> col_entries_;
  std::vector<std::size_t> col_ptr_;
  std::vector<double> ctx_marg_;
  std::vector<double> term_marg_;
  double total_ = 0.0;
};

/// Lowercases and splits on whitespace.
std::vector<std::string> tokenize(std::string_view text);
std::vector<std::string> read_tokens(std::istream& in);
std::vector<std::string> read_corpus(const std::filesystem::path& path);

/// Drops tokens with frequency < min_count, then keeps the max_size most
/// frequent (0 = no cap). Throws "empty corpus" on an empty stream.
Vocabulary build_vocabulary(std::span<const std::string> tokens,
                            std::uint64_t min_count, std::size_t max_size = 0);

/// Maps tokens to ids; out-of-vocabulary positions become -1.
std::vector<std::int64_t> encode(std::span<const std::string> tokens,
                                 const Vocabulary& vocab);

/// Keep probability for a token of relative frequency f under threshold t.
double undersample_keep_probability(double relative_freq, double t);

/// Counts every (context q, focal p) pair with 1 <= |p - q| <= width. OOV and
/// undersampled tokens keep their positions but contribute no pairs.
CoocStats extract_cooccurrences(std::span<const std::string> tokens,
                                const Vocabulary& vocab,
                                const WindowConfig& cfg, int threads = 1);
CoocStats extract_cooccurrences(std::span<const std::int64_t> ids,
                                const Vocabulary& vocab,
                                const WindowConfig& cfg, int threads = 1);

/// Elementwise sum. Vocabulary sizes must match.
CoocStats merge(const CoocStats& a, const CoocStats& b);

void save_cooc(const CoocStats& stats, std::ostream& out);
void save_cooc(const CoocStats& stats, const std::filesystem::path& path);
CoocStats load_cooc(std::istream& in);
CoocStats load_cooc(const std::filesystem::path& path);

/// One "token freq" line per id.
void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path);
Vocabulary load_vocabulary(const std::filesystem::path& path);

}  // namespace lre
