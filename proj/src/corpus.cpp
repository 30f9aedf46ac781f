#include "lre/corpus.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "lre/error.hpp"

namespace lre {

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> tokens,
                       std::vector<std::uint64_t> freq)
    : tokens_(std::move(tokens)), freq_(std::move(freq)) {
  if (tokens_.size() != freq_.size()) {
    throw Error("vocabulary: token and frequency counts differ");
  }
  ids_.reserve(tokens_.size());
  for (std::size_t id = 0; id < tokens_.size(); ++id) {
    if (!ids_.emplace(tokens_[id], static_cast<TokenId>(id)).second) {
      throw Error("vocabulary: duplicate token '" + tokens_[id] + "'");
    }
    total_tokens_ += freq_[id];
  }
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) throw Error("vocabulary: id out of range");
  return tokens_[id];
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t Vocabulary::freq(TokenId id) const {
  if (id >= freq_.size()) throw Error("vocabulary: id out of range");
  return freq_[id];
}

// ---------------------------------------------------------------------------
// CoocStats

CoocStats CoocStats::from_entries(std::size_t vocab_size,
                                  std::vector<CoocEntry> entries) {
  for (const auto& e : entries) {
    if (e.context >= vocab_size || e.term >= vocab_size) {
      throw Error("cooccurrence id out of range");
    }
    if (!std::isfinite(e.count)) throw Error("non-finite cooccurrence count");
    if (e.count < 0.0) throw Error("negative cooccurrence count");
  }
  std::sort(entries.begin(), entries.end(),
            [](const CoocEntry& a, const CoocEntry& b) {
              return a.context != b.context ? a.context < b.context
                                            : a.term < b.term;
            });
  // Sum duplicates in sorted order, then drop zeros.
  std::vector<CoocEntry> merged;
  merged.reserve(entries.size());
  for (const auto& e : entries) {
    if (!merged.empty() && merged.back().context == e.context &&
        merged.back().term == e.term) {
      merged.back().count += e.count;
    } else {
      merged.push_back(e);
    }
  }
  std::erase_if(merged, [](const CoocEntry& e) { return e.count == 0.0; });

  CoocStats stats;
  stats.vocab_size_ = vocab_size;
  stats.entries_ = std::move(merged);
  stats.finalize();
  return stats;
}

void CoocStats::finalize() {
  const std::size_t n = vocab_size_;
  row_ptr_.assign(n + 1, 0);
  col_ptr_.assign(n + 1, 0);
  ctx_marg_.assign(n, 0.0);
  term_marg_.assign(n, 0.0);
  total_ = 0.0;
  for (const auto& e : entries_) {
    ++row_ptr_[e.context + 1];
    ++col_ptr_[e.term + 1];
    ctx_marg_[e.context] += e.count;
    term_marg_[e.term] += e.count;
    total_ += e.count;
  }
  for (std::size_t k = 0; k < n; ++k) {
    row_ptr_[k + 1] += row_ptr_[k];
    col_ptr_[k + 1] += col_ptr_[k];
  }
  col_entries_.resize(entries_.size());
  std::vector<std::size_t> fill(col_ptr_.begin(), col_ptr_.end() - 1);
  // Entries are row-major sorted, so each column comes out sorted by context.
  for (const auto& e : entries_) {
    col_entries_[fill[e.term]++] = {e.context, e.count};
  }
}

double CoocStats::count(TokenId context, TokenId term) const {
  auto r = row(context);
  auto it = std::lower_bound(
      r.begin(), r.end(), term,
      [](const CoocEntry& e, TokenId t) { return e.term < t; });
  return (it != r.end() && it->term == term) ? it->count : 0.0;
}

double CoocStats::context_marginal(TokenId context) const {
  if (context >= vocab_size_) throw Error("context id out of range");
  return ctx_marg_[context];
}

double CoocStats::term_marginal(TokenId term) const {
  if (term >= vocab_size_) throw Error("term id out of range");
  return term_marg_[term];
}

std::span<const CoocEntry> CoocStats::row(TokenId context) const {
  if (context >= vocab_size_) throw Error("context id out of range");
  return std::span<const CoocEntry>(entries_).subspan(
      row_ptr_[context], row_ptr_[context + 1] - row_ptr_[context]);
}

std::span<const CoocStats::ColumnEntry> CoocStats::column(TokenId term) const {
  if (term >= vocab_size_) throw Error("term id out of range");
  return std::span<const ColumnEntry>(col_entries_)
      .subspan(col_ptr_[term], col_ptr_[term + 1] - col_ptr_[term]);
}

bool CoocStats::operator==(const CoocStats& other) const {
  return vocab_size_ == other.vocab_size_ && entries_ == other.entries_ &&
         ctx_marg_ == other.ctx_marg_ && term_marg_ == other.term_marg_ &&
         total_ == other.total_;
}

CoocStats merge(const CoocStats& a, const CoocStats& b) {
  if (a.vocab_size() != b.vocab_size()) {
    throw Error("merge: vocabulary sizes differ");
  }
  std::vector<CoocEntry> all(a.entries().begin(), a.entries().end());
  all.insert(all.end(), b.entries().begin(), b.entries().end());
  return CoocStats::from_entries(a.vocab_size(), std::move(all));
}

// ---------------------------------------------------------------------------
// Tokenization and vocabulary

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> read_tokens(std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return tokenize(text);
}

std::vector<std::string> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("no such corpus: " + path.string());
  return read_tokens(in);
}

Vocabulary build_vocabulary(std::span<const std::string> tokens,
                            std::uint64_t min_count, std::size_t max_size) {
  if (tokens.empty()) throw Error("empty corpus");
  std::unordered_map<std::string_view, std::uint64_t> counts;
  for (const auto& t : tokens) ++counts[t];

  std::vector<std::pair<std::string_view, std::uint64_t>> kept;
  kept.reserve(counts.size());
  for (const auto& [tok, n] : counts) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (max_size > 0 && kept.size() > max_size) kept.resize(max_size);

  std::vector<std::string> toks;
  std::vector<std::uint64_t> freq;
  toks.reserve(kept.size());
  freq.reserve(kept.size());
  for (const auto& [tok, n] : kept) {
    toks.emplace_back(tok);
    freq.push_back(n);
  }
  return Vocabulary(std::move(toks), std::move(freq));
}

std::vector<std::int64_t> encode(std::span<const std::string> tokens,
                                 const Vocabulary& vocab) {
  std::vector<std::int64_t> ids(tokens.size());
  for (std::size_t p = 0; p < tokens.size(); ++p) {
    auto id = vocab.find(tokens[p]);
    ids[p] = id ? static_cast<std::int64_t>(*id) : -1;
  }
  return ids;
}

double undersample_keep_probability(double relative_freq, double t) {
  if (relative_freq <= 0.0) return 1.0;
  const double ratio = t / relative_freq;
  return std::min(1.0, std::sqrt(ratio) + ratio);
}

// ---------------------------------------------------------------------------
// Cooccurrence extraction

namespace {

void check_window(const WindowConfig& cfg) {
  if (cfg.width < 1) throw Error("invalid window");
  if (cfg.undersample_t && !(*cfg.undersample_t > 0.0 && *cfg.undersample_t <= 1.0)) {
    throw Error("invalid undersampling threshold");
  }
}

// Masks undersampled positions in place (they stay in the sequence).
void apply_undersampling(std::vector<std::int64_t>& ids, const Vocabulary& vocab,
                         double t, std::uint64_t seed) {
  std::vector<double> keep(vocab.size());
  const double total = static_cast<double>(vocab.total_tokens());
  for (TokenId id = 0; id < vocab.size(); ++id) {
    keep[id] = undersample_keep_probability(
        static_cast<double>(vocab.freq(id)) / total, t);
  }
  std::mt19937_64 rng(seed);
  for (auto& id : ids) {
    if (id < 0) continue;
    // 53-bit uniform in [0, 1); independent of the standard library's
    // distribution implementations.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (u >= keep[static_cast<std::size_t>(id)]) id = -1;
  }
}

// Accumulates the pairs whose focal position lies in [begin, end).
class PairAccumulator {
 public:
  explicit PairAccumulator(std::size_t vocab_size)
      : n_(vocab_size), dense_(n_ * n_ <= kDenseLimit) {
    if (dense_) grid_.assign(n_ * n_, 0.0);
  }

  void add(TokenId context, TokenId term, double w) {
    const std::uint64_t key = static_cast<std::uint64_t>(context) * n_ + term;
    if (dense_) {
      grid_[key] += w;
    } else {
      sparse_[key] += w;
    }
  }

  std::vector<CoocEntry> entries() const {
    std::vector<CoocEntry> out;
    if (dense_) {
      for (std::uint64_t key = 0; key < grid_.size(); ++key) {
        if (grid_[key] != 0.0) out.push_back(unpack(key, grid_[key]));
      }
    } else {
      out.reserve(sparse_.size());
      for (const auto& [key, w] : sparse_) out.push_back(unpack(key, w));
    }
    return out;
  }

 private:
  static constexpr std::size_t kDenseLimit = std::size_t{1} << 23;

  CoocEntry unpack(std::uint64_t key, double w) const {
    return {static_cast<TokenId>(key / n_), static_cast<TokenId>(key % n_), w};
  }

  std::size_t n_;
  bool dense_;
  std::vector<double> grid_;
  std::unordered_map<std::uint64_t, double> sparse_;
};

std::vector<CoocEntry> count_range(std::span<const std::int64_t> ids,
                                   std::size_t begin, std::size_t end,
                                   std::size_t vocab_size,
                                   const WindowConfig& cfg) {
  PairAccumulator acc(vocab_size);
  const std::size_t width = static_cast<std::size_t>(cfg.width);
  const bool harmonic = cfg.weighting == Weighting::kHarmonic;
  for (std::size_t p = begin; p < end; ++p) {
    if (ids[p] < 0) continue;
    const auto term = static_cast<TokenId>(ids[p]);
    const std::size_t lo = p >= width ? p - width : 0;
    const std::size_t hi = std::min(ids.size() - 1, p + width);
    for (std::size_t q = lo; q <= hi; ++q) {
      if (q == p || ids[q] < 0) continue;
      const std::size_t dist = q > p ? q - p : p - q;
      const double w = harmonic ? 1.0 / static_cast<double>(dist) : 1.0;
      acc.add(static_cast<TokenId>(ids[q]), term, w);
    }
  }
  return acc.entries();
}

}  // namespace

CoocStats extract_cooccurrences(std::span<const std::string> tokens,
                                const Vocabulary& vocab,
                                const WindowConfig& cfg, int threads) {
  check_window(cfg);
  auto ids = encode(tokens, vocab);
  return extract_cooccurrences(ids, vocab, cfg, threads);
}

CoocStats extract_cooccurrences(std::span<const std::int64_t> ids_in,
                                const Vocabulary& vocab,
                                const WindowConfig& cfg, int threads) {
  check_window(cfg);
  std::vector<std::int64_t> ids(ids_in.begin(), ids_in.end());
  for (auto id : ids) {
    if (id >= static_cast<std::int64_t>(vocab.size())) {
      throw Error("token id out of vocabulary range");
    }
  }
  if (cfg.undersample_t) {
    apply_undersampling(ids, vocab, *cfg.undersample_t, cfg.seed);
  }

  const std::size_t n = ids.size();
  const std::size_t shards =
      std::max<std::size_t>(1, std::min<std::size_t>(threads, n / 4096 + 1));
  if (shards == 1) {
    return CoocStats::from_entries(vocab.size(),
                                   count_range(ids, 0, n, vocab.size(), cfg));
  }

  std::vector<std::vector<CoocEntry>> parts(shards);
  std::vector<std::thread> pool;
  for (std::size_t s = 0; s < shards; ++s) {
    pool.emplace_back([&, s] {
      const std::size_t b = n * s / shards;
      const std::size_t e = n * (s + 1) / shards;
      parts[s] = count_range(ids, b, e, vocab.size(), cfg);
    });
  }
  for (auto& t : pool) t.join();
  CoocStats out = CoocStats::from_entries(vocab.size(), std::move(parts[0]));
  for (std::size_t s = 1; s < shards; ++s) {
    out = merge(out, CoocStats::from_entries(vocab.size(), std::move(parts[s])));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary format: "LRE1", u32 vocab size, then (u32 i, u32 j, f64 count)
// records, all little-endian.

namespace {

constexpr std::array<char, 4> kMagic = {'L', 'R', 'E', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b;
  for (int k = 0; k < 4; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xFF);
  out.write(b.data(), 4);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  std::array<char, 8> b;
  for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((bits >> (8 * k)) & 0xFF);
  out.write(b.data(), 8);
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(p[k]) << (8 * k);
  return v;
}

double get_f64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(p[k]) << (8 * k);
  return std::bit_cast<double>(v);
}

}  // namespace

void save_cooc(const CoocStats& stats, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, static_cast<std::uint32_t>(stats.vocab_size()));
  for (const auto& e : stats.entries()) {
    put_u32(out, e.context);
    put_u32(out, e.term);
    put_f64(out, e.count);
  }
  if (!out) throw Error("failed writing cooccurrence file");
}

void save_cooc(const CoocStats& stats, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  save_cooc(stats, out);
}

CoocStats load_cooc(std::istream& in) {
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 8 || std::memcmp(p, kMagic.data(), 4) != 0) {
    throw Error("not a cooccurrence file (bad header)");
  }
  const std::uint32_t vocab_size = get_u32(p + 4);
  constexpr std::size_t kRecord = 16;
  const std::size_t body = bytes.size() - 8;
  const std::size_t records = body / kRecord;
  if (body % kRecord != 0) {
    throw Error("truncated record " + std::to_string(records));
  }

  std::vector<CoocEntry> entries;
  entries.reserve(records);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(records);
  for (std::size_t k = 0; k < records; ++k) {
    const unsigned char* r = p + 8 + k * kRecord;
    CoocEntry e{get_u32(r), get_u32(r + 4), get_f64(r + 8)};
    const std::string where = " at record " + std::to_string(k);
    if (e.context >= vocab_size || e.term >= vocab_size) {
      throw Error("id out of range" + where);
    }
    if (std::isnan(e.count) || std::isinf(e.count)) {
      throw Error("non-finite count" + where);
    }
    if (e.count < 0.0) throw Error("negative count" + where);
    if (e.count == 0.0) throw Error("zero count" + where);
    const std::uint64_t key =
        (static_cast<std::uint64_t>(e.context) << 32) | e.term;
    if (!seen.insert(key).second) throw Error("duplicate pair" + where);
    entries.push_back(e);
  }
  return CoocStats::from_entries(vocab_size, std::move(entries));
}

CoocStats load_cooc(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open cooccurrence file: " + path.string());
  return load_cooc(in);
}

void save_vocabulary(const Vocabulary& vocab,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  for (TokenId id = 0; id < vocab.size(); ++id) {
    out << vocab.token(id) << ' ' << vocab.freq(id) << '\n';
  }
  if (!out) throw Error("failed writing vocabulary: " + path.string());
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open vocabulary: " + path.string());
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> freq;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    std::uint64_t n = 0;
    if (!(ls >> tok >> n)) {
      throw Error("malformed vocabulary line " + std::to_string(lineno));
    }
    tokens.push_back(std::move(tok));
    freq.push_back(n);
  }
  return Vocabulary(std::move(tokens), std::move(freq));
}

}  // namespace lre
