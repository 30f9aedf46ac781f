#pragma once

// Learnable parameters and the kernel functions psi(<i|, |j>).

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lre/corpus.hpp"

namespace lre {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class KernelKind {
  kDot,           // <i|j>
  kBiasedDot,     // <i|j> + b_i + b_j
  kQuadraticLds,  // ||<i| + |j>^T||^2
  kSubwordDot,    // <i| . sum over n-grams g of word j of |g>
};

struct KernelSpec {
  KernelKind kind = KernelKind::kDot;
  int n_min = 3;
  int n_max = 6;

  static KernelSpec dot() { return {}; }
  static KernelSpec biased_dot() { return {KernelKind::kBiasedDot}; }
  static KernelSpec quadratic_lds() { return {KernelKind::kQuadraticLds}; }
  static KernelSpec subword_dot(int n_min = 3, int n_max = 6) {
    return {KernelKind::kSubwordDot, n_min, n_max};
  }

  bool operator==(const KernelSpec&) const = default;
};

std::string to_string(KernelKind kind);
KernelKind parse_kernel_kind(std::string_view name);

/// Character n-grams of "<word>" for n in [n_min, n_max], plus the whole
/// marked word. Characters are UTF-8 code points. Sorted, no duplicates.
std::vector<std::string> ngrams(std::string_view word, int n_min, int n_max);

/// N-gram vectors for a subword-composed term vocabulary.
class SubwordTable {
 public:
  SubwordTable() = default;
  /// word_grams[j] lists the n-gram strings composing term j.
  SubwordTable(const std::vector<std::vector<std::string>>& word_grams,
               int dim, int n_min, int n_max);
  static SubwordTable for_words(std::span<const std::string> words, int dim,
                                int n_min, int n_max);

  int n_min() const { return n_min_; }
  int n_max() const { return n_max_; }
  std::size_t gram_count() const { return grams_.size(); }
  const std::string& gram(std::uint32_t g) const { return grams_.at(g); }
  std::optional<std::uint32_t> find(std::string_view gram) const;
  std::span<const std::uint32_t> grams_of(TokenId term) const;
  std::size_t term_count() const { return word_grams_.size(); }

  /// d x |grams|; column g is |g>.
  Eigen::MatrixXd& vectors() { return vectors_; }
  const Eigen::MatrixXd& vectors() const { return vectors_; }

  /// Sum of the n-gram vectors of an in-vocabulary term.
  Eigen::VectorXd compose(TokenId term) const;
  /// Sum of the known n-gram vectors of an arbitrary word (zero if none).
  Eigen::VectorXd compose(std::string_view word) const;

 private:
  int n_min_ = 3;
  int n_max_ = 6;
  std::vector<std::string> grams_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<std::vector<std::uint32_t>> word_grams_;
  Eigen::MatrixXd vectors_;
};

struct EmbeddingModel {
  KernelSpec kernel;
  RowMatrix covectors;        // |V_C| x d; row i is <i|
  // d x |V_T|; column j is |j>. For kSubwordDot this caches the composed
  // vectors and is refreshed by refresh_composed().
  Eigen::MatrixXd vectors;
  Eigen::VectorXd context_bias;  // kBiasedDot only
  Eigen::VectorXd term_bias;     // kBiasedDot only
  std::optional<double> lds_constant;
  std::optional<SubwordTable> subwords;

  int dim() const { return static_cast<int>(covectors.cols()); }
  std::size_t num_contexts() const { return static_cast<std::size_t>(covectors.rows()); }
  std::size_t num_terms() const { return static_cast<std::size_t>(vectors.cols()); }

  /// |j>, composed from n-grams for kSubwordDot.
  Eigen::VectorXd term_vector(TokenId j) const;
  void refresh_composed();

  /// Throws when shapes, optional parts, or finiteness are inconsistent.
  void validate() const;
};

/// Parameters i.i.d. uniform on [-0.5/d, 0.5/d); biases and C start at 0.
/// term_tokens is required for kSubwordDot.
EmbeddingModel init_model(std::size_t num_contexts, std::size_t num_terms,
                          int dim, const KernelSpec& kernel, std::uint64_t seed,
                          std::span<const std::string> term_tokens = {});

double psi(const EmbeddingModel& model, TokenId i, TokenId j);
/// <i|j> without biases or LDS norm terms.
double bilinear(const EmbeddingModel& model, TokenId i, TokenId j);

/// Explicit feature map of the quadratic kernel:
///   i~ = [sqrt2 <i|, <i|<i|^T, 1],  j~ = [sqrt2 |j>, 1, <j|j>]
/// so that <i~|j~> = ||<i| + |j>^T||^2.
std::pair<Eigen::VectorXd, Eigen::VectorXd> lds_feature_map(
    const EmbeddingModel& model, TokenId i, TokenId j);

// ---------------------------------------------------------------------------
// Text export: word2vec format ("|V| d" header, then "token v1 ... vd").

struct ModelFiles {
  std::filesystem::path vectors;
  std::filesystem::path covectors;
  std::filesystem::path biases;
  std::filesystem::path ngrams;
  std::filesystem::path meta;

  explicit ModelFiles(const std::filesystem::path& prefix);
};

/// Writes the word2vec-format files plus a key=value meta file carrying the
/// kernel description and any extra header entries.
void export_model(const EmbeddingModel& model,
                  std::span<const std::string> tokens,
                  const std::filesystem::path& prefix,
                  const std::map<std::string, std::string>& header = {});

struct ImportedModel {
  EmbeddingModel model;
  std::vector<std::string> tokens;
  std::map<std::string, std::string> header;
};

ImportedModel import_model(const std::filesystem::path& prefix);

}  // namespace lre
