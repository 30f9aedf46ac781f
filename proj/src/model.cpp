#include "lre/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "lre/error.hpp"

namespace lre {

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::kDot: return "dot";
    case KernelKind::kBiasedDot: return "biased-dot";
    case KernelKind::kQuadraticLds: return "quadratic-lds";
    case KernelKind::kSubwordDot: return "subword-dot";
  }
  return "?";
}

KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "dot") return KernelKind::kDot;
  if (name == "biased-dot") return KernelKind::kBiasedDot;
  if (name == "quadratic-lds") return KernelKind::kQuadraticLds;
  if (name == "subword-dot") return KernelKind::kSubwordDot;
  throw Error("unknown kernel '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// n-grams

std::vector<std::string> ngrams(std::string_view word, int n_min, int n_max) {
  if (word.empty()) throw Error("ngrams: empty word");
  if (n_min < 1 || n_min > n_max) throw Error("ngrams: invalid n range");
  const std::string marked = "<" + std::string(word) + ">";
  // Byte offsets of code point starts, plus the end.
  std::vector<std::size_t> starts;
  for (std::size_t b = 0; b < marked.size(); ++b) {
    if ((static_cast<unsigned char>(marked[b]) & 0xC0) != 0x80) starts.push_back(b);
  }
  const std::size_t chars = starts.size();
  starts.push_back(marked.size());

  std::vector<std::string> out;
  for (int n = n_min; n <= n_max; ++n) {
    const auto len = static_cast<std::size_t>(n);
    for (std::size_t s = 0; s + len <= chars; ++s) {
      out.push_back(marked.substr(starts[s], starts[s + len] - starts[s]));
    }
  }
  out.push_back(marked);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// SubwordTable

SubwordTable::SubwordTable(const std::vector<std::vector<std::string>>& word_grams,
                           int dim, int n_min, int n_max)
    : n_min_(n_min), n_max_(n_max) {
  word_grams_.reserve(word_grams.size());
  for (const auto& grams : word_grams) {
    std::vector<std::uint32_t> ids;
    for (const auto& g : grams) {
      auto [it, inserted] =
          index_.emplace(g, static_cast<std::uint32_t>(grams_.size()));
      if (inserted) grams_.push_back(g);
      ids.push_back(it->second);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
      throw Error("subword table: repeated n-gram within a word");
    }
    word_grams_.push_back(std::move(ids));
  }
  vectors_ = Eigen::MatrixXd::Zero(dim, static_cast<Eigen::Index>(grams_.size()));
}

SubwordTable SubwordTable::for_words(std::span<const std::string> words,
                                     int dim, int n_min, int n_max) {
  std::vector<std::vector<std::string>> sets;
  sets.reserve(words.size());
  for (const auto& w : words) sets.push_back(ngrams(w, n_min, n_max));
  return SubwordTable(sets, dim, n_min, n_max);
}

std::optional<std::uint32_t> SubwordTable::find(std::string_view gram) const {
  auto it = index_.find(std::string(gram));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const std::uint32_t> SubwordTable::grams_of(TokenId term) const {
  if (term >= word_grams_.size()) throw Error("subword table: term out of range");
  return word_grams_[term];
}

Eigen::VectorXd SubwordTable::compose(TokenId term) const {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(vectors_.rows());
  for (auto g : grams_of(term)) sum += vectors_.col(g);
  return sum;
}

Eigen::VectorXd SubwordTable::compose(std::string_view word) const {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(vectors_.rows());
  std::vector<std::uint32_t> ids;
  for (const auto& g : ngrams(word, n_min_, n_max_)) {
    if (auto id = find(g)) ids.push_back(*id);
  }
  // Same summation order as compose(TokenId).
  std::sort(ids.begin(), ids.end());
  for (auto g : ids) sum += vectors_.col(g);
  return sum;
}

// ---------------------------------------------------------------------------
// EmbeddingModel

Eigen::VectorXd EmbeddingModel::term_vector(TokenId j) const {
  if (j >= num_terms()) throw Error("term id out of range");
  if (kernel.kind == KernelKind::kSubwordDot) return subwords->compose(j);
  return vectors.col(j);
}

void EmbeddingModel::refresh_composed() {
  if (kernel.kind != KernelKind::kSubwordDot) return;
  for (TokenId j = 0; j < num_terms(); ++j) vectors.col(j) = subwords->compose(j);
}

void EmbeddingModel::validate() const {
  if (dim() < 1) throw Error("model: dimension must be >= 1");
  if (vectors.rows() != covectors.cols()) {
    throw Error("model: vector and covector dimensions differ");
  }
  const bool biased = kernel.kind == KernelKind::kBiasedDot;
  if (biased != (context_bias.size() > 0 || term_bias.size() > 0)) {
    throw Error("model: biases present iff kernel is biased-dot");
  }
  if (biased && (static_cast<std::size_t>(context_bias.size()) != num_contexts() ||
                 static_cast<std::size_t>(term_bias.size()) != num_terms())) {
    throw Error("model: bias sizes do not match vocabulary");
  }
  if ((kernel.kind == KernelKind::kQuadraticLds) != lds_constant.has_value()) {
    throw Error("model: LDS constant present iff kernel is quadratic-lds");
  }
  const bool sub = kernel.kind == KernelKind::kSubwordDot;
  if (sub != subwords.has_value()) {
    throw Error("model: subword table present iff kernel is subword-dot");
  }
  if (sub) {
    if (kernel.n_min > kernel.n_max) throw Error("model: n_min > n_max");
    if (subwords->term_count() != num_terms() ||
        subwords->vectors().rows() != dim()) {
      throw Error("model: subword table shape mismatch");
    }
    if (!subwords->vectors().allFinite()) throw Error("model: non-finite n-gram vector");
  }
  if (!covectors.allFinite() || !vectors.allFinite() ||
      !context_bias.allFinite() || !term_bias.allFinite() ||
      (lds_constant && !std::isfinite(*lds_constant))) {
    throw Error("model: non-finite parameter");
  }
}

EmbeddingModel init_model(std::size_t num_contexts, std::size_t num_terms,
                          int dim, const KernelSpec& kernel, std::uint64_t seed,
                          std::span<const std::string> term_tokens) {
  if (dim < 1) throw Error("init_model: dimension must be >= 1");
  std::mt19937_64 rng(seed);
  const double scale = 1.0 / dim;
  auto draw = [&] {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return (u - 0.5) * scale;
  };

  EmbeddingModel m;
  m.kernel = kernel;
  const auto d = static_cast<Eigen::Index>(dim);
  m.covectors.resize(static_cast<Eigen::Index>(num_contexts), d);
  for (Eigen::Index i = 0; i < m.covectors.rows(); ++i) {
    for (Eigen::Index k = 0; k < d; ++k) m.covectors(i, k) = draw();
  }
  m.vectors.resize(d, static_cast<Eigen::Index>(num_terms));
  if (kernel.kind == KernelKind::kSubwordDot) {
    if (term_tokens.size() != num_terms) {
      throw Error("init_model: subword kernel needs one token per term");
    }
    m.subwords = SubwordTable::for_words(term_tokens, dim, kernel.n_min, kernel.n_max);
    auto& gv = m.subwords->vectors();
    for (Eigen::Index g = 0; g < gv.cols(); ++g) {
      for (Eigen::Index k = 0; k < d; ++k) gv(k, g) = draw();
    }
    m.refresh_composed();
  } else {
    for (Eigen::Index j = 0; j < m.vectors.cols(); ++j) {
      for (Eigen::Index k = 0; k < d; ++k) m.vectors(k, j) = draw();
    }
  }
  if (kernel.kind == KernelKind::kBiasedDot) {
    m.context_bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_contexts));
    m.term_bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_terms));
  }
  if (kernel.kind == KernelKind::kQuadraticLds) m.lds_constant = 0.0;
  return m;
}

namespace {

void check_ids(const EmbeddingModel& m, TokenId i, TokenId j) {
  if (i >= m.num_contexts()) throw Error("context id out of range");
  if (j >= m.num_terms()) throw Error("term id out of range");
}

}  // namespace

double bilinear(const EmbeddingModel& m, TokenId i, TokenId j) {
  check_ids(m, i, j);
  if (m.kernel.kind == KernelKind::kSubwordDot) {
    return m.covectors.row(i).dot(m.subwords->compose(j));
  }
  return m.covectors.row(i).dot(m.vectors.col(j));
}

double psi(const EmbeddingModel& m, TokenId i, TokenId j) {
  check_ids(m, i, j);
  switch (m.kernel.kind) {
    case KernelKind::kDot:
    case KernelKind::kSubwordDot:
      return bilinear(m, i, j);
    case KernelKind::kBiasedDot:
      return bilinear(m, i, j) + m.context_bias(i) + m.term_bias(j);
    case KernelKind::kQuadraticLds:
      return (m.covectors.row(i).transpose() + m.vectors.col(j)).squaredNorm();
  }
  throw Error("unknown kernel");
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> lds_feature_map(
    const EmbeddingModel& m, TokenId i, TokenId j) {
  if (m.kernel.kind != KernelKind::kQuadraticLds) {
    throw Error("lds_feature_map: kernel is not quadratic-lds");
  }
  check_ids(m, i, j);
  const Eigen::Index d = m.dim();
  const double root2 = std::sqrt(2.0);
  Eigen::VectorXd ti(d + 2), tj(d + 2);
  ti.head(d) = root2 * m.covectors.row(i).transpose();
  ti(d) = m.covectors.row(i).squaredNorm();
  ti(d + 1) = 1.0;
  tj.head(d) = root2 * m.vectors.col(j);
  tj(d) = 1.0;
  tj(d + 1) = m.vectors.col(j).squaredNorm();
  return {std::move(ti), std::move(tj)};
}

// ---------------------------------------------------------------------------
// Export / import

ModelFiles::ModelFiles(const std::filesystem::path& prefix)
    : vectors(prefix.string() + ".vectors.txt"),
      covectors(prefix.string() + ".covectors.txt"),
      biases(prefix.string() + ".biases.txt"),
      ngrams(prefix.string() + ".ngrams.txt"),
      meta(prefix.string() + ".meta") {}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error("malformed number '" + std::string(s) + "' in " + where);
  }
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  return out;
}

// Rows are tokens, columns are the row's values.
template <typename RowFn>
void write_table(const std::filesystem::path& path,
                 std::span<const std::string> labels, Eigen::Index width,
                 RowFn row) {
  auto out = open_out(path);
  out << labels.size() << ' ' << width << '\n';
  for (std::size_t r = 0; r < labels.size(); ++r) {
    out << labels[r];
    const Eigen::VectorXd values = row(r);
    for (Eigen::Index k = 0; k < values.size(); ++k) {
      out << ' ' << format_double(values(k));
    }
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

struct Table {
  std::vector<std::string> labels;
  Eigen::MatrixXd values;  // rows x width
};

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::size_t rows = 0;
  Eigen::Index width = 0;
  std::string line;
  if (!std::getline(in, line)) throw Error("empty file " + path.string());
  {
    std::istringstream hs(line);
    if (!(hs >> rows >> width) || width < 0) {
      throw Error("malformed header in " + path.string());
    }
  }
  Table t;
  t.values.resize(static_cast<Eigen::Index>(rows), width);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) {
      throw Error("missing row " + std::to_string(r) + " in " + path.string());
    }
    std::istringstream ls(line);
    std::string label, field;
    ls >> label;
    t.labels.push_back(label);
    for (Eigen::Index k = 0; k < width; ++k) {
      if (!(ls >> field)) {
        throw Error("short row " + std::to_string(r) + " in " + path.string());
      }
      t.values(static_cast<Eigen::Index>(r), k) = parse_double(field, path.string());
    }
  }
  return t;
}

}  // namespace

void export_model(const EmbeddingModel& model,
                  std::span<const std::string> tokens,
                  const std::filesystem::path& prefix,
                  const std::map<std::string, std::string>& header) {
  model.validate();
  if (tokens.size() != model.num_contexts() || tokens.size() != model.num_terms()) {
    throw Error("export_model: token count does not match model");
  }
  const ModelFiles files(prefix);
  const Eigen::Index d = model.dim();

  write_table(files.vectors, tokens, d, [&](std::size_t j) {
    return model.term_vector(static_cast<TokenId>(j));
  });
  write_table(files.covectors, tokens, d, [&](std::size_t i) {
    return Eigen::VectorXd(model.covectors.row(static_cast<Eigen::Index>(i)).transpose());
  });
  if (model.kernel.kind == KernelKind::kBiasedDot) {
    write_table(files.biases, tokens, 2, [&](std::size_t r) {
      const auto k = static_cast<Eigen::Index>(r);
      Eigen::VectorXd b(2);
      b << model.context_bias(k), model.term_bias(k);
      return b;
    });
  }
  if (model.kernel.kind == KernelKind::kSubwordDot) {
    const auto& table = *model.subwords;
    std::vector<std::string> grams;
    for (std::uint32_t g = 0; g < table.gram_count(); ++g) grams.push_back(table.gram(g));
    write_table(files.ngrams, grams, d, [&](std::size_t g) {
      return Eigen::VectorXd(table.vectors().col(static_cast<Eigen::Index>(g)));
    });
  }

  std::map<std::string, std::string> meta = header;
  meta["kernel"] = to_string(model.kernel.kind);
  meta["dim"] = std::to_string(d);
  meta["vocab_size"] = std::to_string(tokens.size());
  if (model.lds_constant) meta["lds_constant"] = format_double(*model.lds_constant);
  if (model.kernel.kind == KernelKind::kSubwordDot) {
    meta["n_min"] = std::to_string(model.kernel.n_min);
    meta["n_max"] = std::to_string(model.kernel.n_max);
  }
  auto out = open_out(files.meta);
  for (const auto& [k, v] : meta) out << k << '=' << v << '\n';
  if (!out) throw Error("failed writing " + files.meta.string());
}

ImportedModel import_model(const std::filesystem::path& prefix) {
  const ModelFiles files(prefix);
  ImportedModel result;
  {
    std::ifstream in(files.meta);
    if (!in) throw Error("cannot open " + files.meta.string());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) throw Error("malformed meta line: " + line);
      result.header[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  auto meta = [&](const std::string& key) -> const std::string& {
    auto it = result.header.find(key);
    if (it == result.header.end()) throw Error("meta file missing '" + key + "'");
    return it->second;
  };

  EmbeddingModel& m = result.model;
  m.kernel.kind = parse_kernel_kind(meta("kernel"));
  const Table cov = read_table(files.covectors);
  m.covectors = cov.values;
  result.tokens = cov.labels;
  const Table vec = read_table(files.vectors);
  if (vec.labels != cov.labels) {
    throw Error("vector and covector files list different tokens");
  }
  m.vectors = vec.values.transpose();

  if (m.kernel.kind == KernelKind::kBiasedDot) {
    const Table b = read_table(files.biases);
    if (b.labels != cov.labels || b.values.cols() != 2) {
      throw Error("bias file does not match vocabulary");
    }
    m.context_bias = b.values.col(0);
    m.term_bias = b.values.col(1);
  }
  if (m.kernel.kind == KernelKind::kQuadraticLds) {
    m.lds_constant = parse_double(meta("lds_constant"), files.meta.string());
  }
  if (m.kernel.kind == KernelKind::kSubwordDot) {
    m.kernel.n_min = std::stoi(meta("n_min"));
    m.kernel.n_max = std::stoi(meta("n_max"));
    SubwordTable table = SubwordTable::for_words(result.tokens, m.dim(),
                                                 m.kernel.n_min, m.kernel.n_max);
    const Table ng = read_table(files.ngrams);
    if (ng.labels.size() != table.gram_count()) {
      throw Error("n-gram file does not match vocabulary");
    }
    for (std::size_t r = 0; r < ng.labels.size(); ++r) {
      auto g = table.find(ng.labels[r]);
      if (!g) throw Error("unknown n-gram '" + ng.labels[r] + "'");
      table.vectors().col(*g) = ng.values.row(static_cast<Eigen::Index>(r)).transpose();
    }
    m.subwords = std::move(table);
    m.refresh_composed();
  }
  m.validate();
  return result;
}

}  // namespace lre
