#include "lre/cli.hpp"

#include <CLI11.hpp>

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <vector>

#include "lre/association.hpp"
#include "lre/corpus.hpp"
#include "lre/error.hpp"
#include "lre/eval.hpp"
#include "lre/model.hpp"
#include "lre/objective.hpp"
#include "lre/svd.hpp"
#include "lre/trainer.hpp"

namespace lre::cli {

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config file: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

namespace {

struct OptionDef {
  std::string name;
  std::string fallback;
  std::string help;
  bool required = false;
};

const std::vector<OptionDef>& count_options() {
  static const std::vector<OptionDef> defs = {
      {"corpus", "", "Whitespace-tokenized text file", true},
      {"out", "", "Output cooccurrence file (vocabulary goes to <out>.vocab)", true},
      {"window", "5", "Window half-width w >= 1"},
      {"weighting", "flat", "flat or harmonic (1/distance)"},
      {"min-count", "1", "Drop words rarer than this"},
      {"max-vocab", "10000", "Keep at most this many words (0 = all)"},
      {"undersample", "none", "Subsampling threshold t, or none"},
      {"seed", "1", "Seed for undersampling"},
      {"threads", "1", "Counting threads"},
  };
  return defs;
}

const std::vector<OptionDef>& train_options() {
  static const std::vector<OptionDef> defs = {
      {"stats", "", "Cooccurrence file written by `lre count`", true},
      {"out", "", "Output prefix for the model files", true},
      {"family", "", "svd, svd-mse, sgns, fasttext, glove, lds, swivel", true},
      {"dim", "32", "Embedding dimension"},
      {"epochs", "20", "Training epochs"},
      {"eta", "0.05", "Initial learning rate"},
      {"eta-min", "0.0001", "Learning rate reached at the last epoch"},
      {"seed", "1", "Initialization and shuffling seed"},
      {"pair-policy", "", "nonzero-only or all-pairs (default depends on family)"},
      {"kernel", "", "dot, biased-dot, quadratic-lds, subword-dot (default depends on family)"},
      {"n-min", "3", "Shortest character n-gram (subword kernel)"},
      {"n-max", "6", "Longest character n-gram (subword kernel)"},
      {"threads", "1", "Training threads (only 1 is reproducible)"},
      {"k", "5", "Negative samples per positive"},
      {"x-max", "100", "GloVe/LDS weight cap"},
      {"beta", "0.75", "GloVe/LDS weight exponent"},
      {"smoothing", "0.75", "Negative-sampling unigram exponent"},
      {"svd-target", "", "pmi, ppmi, clipped:A, smoothed (default depends on family)"},
      {"convergence-tol", "0", "Stop when relative loss change drops below this"},
      {"max-restarts", "5", "Learning-rate halvings allowed after divergence"},
      {"enforce-descent", "false", "Halve the learning rate whenever the loss rises"},
      {"normalize-multiplier", "true", "Scale gradients by the mean multiplier"},
      {"newton-cap", "true", "Cap each pair step at the curvature bound"},
      {"count-floor", "5", "Minimum Nij for the fixed-point report"},
      {"rank", "", "Rank for --family svd: an integer or full (default: dim)"},
      {"sigma-split", "vectors", "Where --family svd puts the singular values: vectors or symmetric"},
      {"checkpoint-every", "0", "Write <out>.checkpoint every this many epochs (0 = never)"},
  };
  return defs;
}

const std::vector<OptionDef>& eval_options() {
  static const std::vector<OptionDef> defs = {
      {"model", "", "Model prefix written by `lre train`", true},
      {"stats", "", "Cooccurrence file written by `lre count`", true},
      {"family", "", "Objective family (default: from the model)"},
      {"k", "", "Negative samples per positive (default: from the model)"},
      {"smoothing", "", "Negative-sampling exponent (default: from the model)"},
      {"x-max", "", "GloVe/LDS weight cap (default: from the model)"},
      {"beta", "", "GloVe/LDS weight exponent (default: from the model)"},
      {"svd-target", "", "SVD target association (default: from the model)"},
      {"count-floor", "5", "Minimum Nij for the fixed-point report"},
      {"diagnostics", "", "Write <prefix>.pmi.tsv (and <prefix>.bias.tsv for biased models)"},
      {"bins", "50", "Histogram bins for the PMI summary"},
  };
  return defs;
}

class UsageError : public Error {
 public:
  using Error::Error;
};

std::string env_name(const std::string& key) {
  std::string s = "LRE_";
  for (char c : key) s += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

class Settings {
 public:
  std::map<std::string, std::string> values;

  const std::string& str(const std::string& key) const { return values.at(key); }
  bool has(const std::string& key) const { return !values.at(key).empty(); }

  template <class T>
  T number(const std::string& key) const {
    const std::string& s = str(key);
    T v{};
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
      throw UsageError("invalid value for --" + key + ": '" + s + "'");
    }
    return v;
  }

  bool boolean(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw UsageError("invalid value for --" + key + ": '" + s + "'");
  }

  std::string serialize() const {
    std::ostringstream os;
    for (const auto& [k, v] : values) os << k << '=' << v << '\n';
    return os.str();
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + path);
    out << serialize();
  }
};

Settings resolve(const std::vector<OptionDef>& defs,
                 const std::map<std::string, std::optional<std::string>>& flags,
                 const std::string& config_path, const EnvLookup& env) {
  std::map<std::string, std::string> file;
  if (!config_path.empty()) {
    file = read_config_file(config_path);
    for (const auto& [k, v] : file) {
      const bool known = std::any_of(defs.begin(), defs.end(),
                                     [&](const OptionDef& d) { return d.name == k; });
      if (!known) throw UsageError("unknown key '" + k + "' in " + config_path);
    }
  }
  Settings s;
  for (const auto& d : defs) {
    std::string v = d.fallback;
    if (auto it = file.find(d.name); it != file.end()) v = it->second;
    if (auto e = env(env_name(d.name))) v = *e;
    if (auto it = flags.find(d.name); it != flags.end() && it->second) v = *it->second;
    if (d.required && v.empty()) throw UsageError("missing required option --" + d.name);
    s.values[d.name] = v;
  }
  return s;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::map<std::string, std::string> config_header(const Settings& s) {
  std::map<std::string, std::string> h;
  for (const auto& [k, v] : s.values) h["config." + k] = v;
  return h;
}

struct LoadedStats {
  CoocStats stats;
  Vocabulary vocab;
};

LoadedStats load_stats(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error("no such stats file: " + path);
  LoadedStats l{load_cooc(path), load_vocabulary(path + ".vocab")};
  if (l.vocab.size() != l.stats.vocab_size()) {
    throw Error("vocabulary file does not match " + path);
  }
  return l;
}

// ---------------------------------------------------------------------------

int cmd_count(Settings& s, std::ostream& out) {
  WindowConfig wc;
  wc.width = s.number<int>("window");
  if (wc.width < 1) throw UsageError("invalid window: " + s.str("window"));
  const auto& weighting = s.str("weighting");
  if (weighting == "flat") {
    wc.weighting = Weighting::kFlat;
  } else if (weighting == "harmonic") {
    wc.weighting = Weighting::kHarmonic;
  } else {
    throw UsageError("invalid value for --weighting: '" + weighting + "'");
  }
  wc.min_count = s.number<std::uint64_t>("min-count");
  wc.max_vocab = s.number<std::size_t>("max-vocab");
  if (s.str("undersample") != "none") wc.undersample_t = s.number<double>("undersample");
  wc.seed = s.number<std::uint64_t>("seed");
  const int threads = s.number<int>("threads");
  if (threads < 1) throw UsageError("threads must be >= 1");

  const auto tokens = read_corpus(s.str("corpus"));
  const Vocabulary vocab = build_vocabulary(tokens, wc.min_count, wc.max_vocab);
  const CoocStats stats = extract_cooccurrences(tokens, vocab, wc, threads);

  const std::string& path = s.str("out");
  save_cooc(stats, path);
  save_vocabulary(vocab, path + ".vocab");
  s.write(path + ".config");
  out << "vocab_size=" << vocab.size() << '\n'
      << "total=" << fmt(stats.total()) << '\n'
      << "nonzero_pairs=" << stats.nonzero_count() << '\n';
  return kExitOk;
}

SigmaSplit parse_split(const std::string& v) {
  if (v == "vectors") return SigmaSplit::kIntoVectors;
  if (v == "symmetric") return SigmaSplit::kSymmetric;
  throw UsageError("invalid value for --sigma-split: '" + v + "'");
}

int cmd_factorize(Settings& s, const LoadedStats& data, std::ostream& out) {
  if (!s.has("svd-target")) s.values["svd-target"] = "ppmi";
  if (!s.has("rank")) s.values["rank"] = s.str("dim");
  const AssociationSpec target = parse_association(s.str("svd-target"));
  const int rank = s.str("rank") == "full" ? static_cast<int>(data.stats.vocab_size())
                                           : s.number<int>("rank");
  const SigmaSplit split = parse_split(s.str("sigma-split"));
  const double floor = s.number<double>("count-floor");

  const DenseAssocMatrix m = build_assoc_matrix(data.stats, target);
  SvdOptions opt;
  opt.seed = s.number<std::uint64_t>("seed");
  const SvdResult svd = truncated_svd(m, rank, opt);
  const EmbeddingModel model = svd_to_model(svd, split);

  const std::string& prefix = s.str("out");
  auto header = config_header(s);
  header["family"] = to_string(Family::kSvdMse);
  header["svd_target"] = to_string(target);
  export_model(model, data.vocab.tokens(), prefix, header);
  s.write(prefix + ".config");

  const double residual = (m.entries - svd.reconstruct()).norm();
  {
    std::ofstream rep(prefix + ".report", std::ios::trunc);
    if (!rep) throw Error("cannot open for writing: " + prefix + ".report");
    rep << "family=svd\nrank=" << rank << "\nfrobenius_residual=" << fmt(residual)
        << "\nsubspace_iterations=" << svd.iterations << "\nsingular_values=";
    for (Eigen::Index k = 0; k < svd.s.size(); ++k) rep << (k ? "," : "") << fmt(svd.s(k));
    rep << '\n';
  }
  out << "family=svd\nrank=" << rank << "\nfrobenius_residual=" << fmt(residual) << '\n';
  ObjectiveSpec spec;
  spec.family = Family::kSvdMse;
  spec.svd_target = target;
  try {
    write_summary(out, fixed_point_report(model, data.stats, spec, floor));
  } catch (const Error& e) {
    out << "fixed_point=unavailable (" << e.what() << ")\n";
  }
  return kExitOk;
}

int cmd_train(Settings& s, std::ostream& out, std::ostream& err) {
  const LoadedStats data = load_stats(s.str("stats"));
  if (s.str("family") == "svd") return cmd_factorize(s, data, out);

  TrainConfig cfg;
  cfg.objective.family = parse_family(s.str("family"));
  const Family fam = cfg.objective.family;
  const bool needs_all = fam == Family::kSgns || fam == Family::kFastTextSgns ||
                         fam == Family::kSwivel;
  if (!s.has("pair-policy")) s.values["pair-policy"] = needs_all ? "all-pairs" : "nonzero-only";
  cfg.pair_policy = parse_pair_policy(s.str("pair-policy"));
  if (!s.has("kernel")) s.values["kernel"] = to_string(TrainConfig::default_kernel(fam).kind);
  if (!s.has("svd-target")) {
    s.values["svd-target"] = cfg.pair_policy == PairPolicy::kAllPairs ? "ppmi" : "pmi";
  }
  if (s.has("rank")) throw UsageError("--rank applies to --family svd only");

  cfg.kernel.kind = parse_kernel_kind(s.str("kernel"));
  cfg.kernel.n_min = s.number<int>("n-min");
  cfg.kernel.n_max = s.number<int>("n-max");
  cfg.dim = s.number<int>("dim");
  cfg.epochs = s.number<int>("epochs");
  cfg.eta = s.number<double>("eta");
  cfg.eta_min = s.number<double>("eta-min");
  cfg.seed = s.number<std::uint64_t>("seed");
  cfg.threads = s.number<int>("threads");
  cfg.objective.k = s.number<int>("k");
  cfg.objective.x_max = s.number<double>("x-max");
  cfg.objective.beta = s.number<double>("beta");
  cfg.objective.smoothing_exponent = s.number<double>("smoothing");
  cfg.objective.svd_target = parse_association(s.str("svd-target"));
  cfg.convergence_tol = s.number<double>("convergence-tol");
  cfg.max_restarts = s.number<int>("max-restarts");
  cfg.enforce_descent = s.boolean("enforce-descent");
  cfg.normalize_multiplier = s.boolean("normalize-multiplier");
  cfg.newton_cap = s.boolean("newton-cap");
  cfg.report_count_floor = s.number<double>("count-floor");
  parse_split(s.str("sigma-split"));
  const int every = s.number<int>("checkpoint-every");
  if (every < 0) throw UsageError("checkpoint-every must be >= 0");
  cfg.validate();

  const std::string& prefix = s.str("out");
  const std::string config_hash = hex(fnv1a(s.serialize()));
  const auto& tokens = data.vocab.tokens();
  if (every > 0) {
    cfg.on_epoch = [&](int epoch, double loss, const EmbeddingModel& m) {
      if ((epoch + 1) % every != 0) return;
      export_model(m, tokens, prefix + ".checkpoint",
                   {{"epoch", std::to_string(epoch)},
                    {"loss", fmt(loss)},
                    {"config_hash", config_hash}});
    };
  }

  TrainResult result;
  try {
    result = train(data.stats, cfg, tokens);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  const TrainReport& r = result.report;

  auto header = config_header(s);
  header["family"] = to_string(fam);
  header["config_hash"] = config_hash;
  export_model(result.model, tokens, prefix, header);
  s.write(prefix + ".config");
  {
    std::ofstream rep(prefix + ".report", std::ios::trunc);
    if (!rep) throw Error("cannot open for writing: " + prefix + ".report");
    rep << "family=" << to_string(fam) << '\n'
        << "initial_loss=" << fmt(r.initial_loss) << '\n'
        << "epochs_run=" << r.epoch_loss.size() << '\n'
        << "restarts=" << r.restarts << '\n'
        << "converged=" << (r.converged ? "true" : "false") << '\n'
        << "multiplier_scale=" << fmt(r.multiplier_scale) << '\n';
    if (r.fixed_point) write_summary(rep, *r.fixed_point);
    rep << "epoch\tloss\tgradient_norm\teta\n";
    for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) {
      rep << e << '\t' << fmt(r.epoch_loss[e]) << '\t' << fmt(r.gradient_norm[e]) << '\t'
          << fmt(r.epoch_eta[e]) << '\n';
    }
  }

  out << "family=" << to_string(fam) << '\n'
      << "epochs_run=" << r.epoch_loss.size() << '\n'
      << "initial_loss=" << fmt(r.initial_loss) << '\n'
      << "final_loss="
      << fmt(r.epoch_loss.empty() ? r.initial_loss : r.epoch_loss.back()) << '\n';
  if (r.fixed_point) write_summary(out, *r.fixed_point);
  err << "wall_seconds=" << std::fixed << std::setprecision(2) << r.wall_seconds << '\n';
  return kExitOk;
}

/// Reorders an imported model into the stats vocabulary order.
EmbeddingModel align_model(const ImportedModel& imp, const Vocabulary& vocab) {
  std::map<std::string, std::size_t> pos;
  for (std::size_t r = 0; r < imp.tokens.size(); ++r) pos[imp.tokens[r]] = r;
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    if (!pos.count(vocab.token(static_cast<TokenId>(j)))) {
      throw UsageError("vocabulary mismatch: '" + vocab.token(static_cast<TokenId>(j)) +
                       "' is missing from the model");
    }
  }
  for (const auto& t : imp.tokens) {
    if (!vocab.find(t)) {
      throw UsageError("vocabulary mismatch: '" + t + "' is missing from the stats");
    }
  }
  if (imp.tokens == vocab.tokens()) return imp.model;
  if (imp.model.kernel.kind == KernelKind::kSubwordDot) {
    throw UsageError("vocabulary mismatch: subword model lists tokens in a different order");
  }
  EmbeddingModel m = imp.model;
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    const auto src = static_cast<Eigen::Index>(pos[vocab.token(static_cast<TokenId>(j))]);
    const auto dst = static_cast<Eigen::Index>(j);
    m.covectors.row(dst) = imp.model.covectors.row(src);
    m.vectors.col(dst) = imp.model.vectors.col(src);
    if (m.kernel.kind == KernelKind::kBiasedDot) {
      m.context_bias(dst) = imp.model.context_bias(src);
      m.term_bias(dst) = imp.model.term_bias(src);
    }
  }
  return m;
}

int cmd_eval(Settings& s, std::ostream& out) {
  const LoadedStats data = load_stats(s.str("stats"));
  const ImportedModel imp = import_model(s.str("model"));
  const EmbeddingModel model = align_model(imp, data.vocab);

  auto from_model = [&](const std::string& key, const std::string& fallback) {
    if (s.has(key)) return;
    auto it = imp.header.find("config." + key);
    s.values[key] = it != imp.header.end() && !it->second.empty() ? it->second : fallback;
  };
  if (!s.has("family")) {
    auto it = imp.header.find("family");
    if (it == imp.header.end()) throw UsageError("model does not name its family; pass --family");
    s.values["family"] = it->second;
  }
  from_model("k", "5");
  from_model("smoothing", "0.75");
  from_model("x-max", "100");
  from_model("beta", "0.75");
  if (!s.has("svd-target")) {
    auto it = imp.header.find("svd_target");
    if (it != imp.header.end()) s.values["svd-target"] = it->second;
  }
  from_model("svd-target", "pmi");

  ObjectiveSpec spec;
  spec.family = parse_family(s.str("family") == "svd" ? "svd-mse" : s.str("family"));
  spec.k = s.number<int>("k");
  spec.smoothing_exponent = s.number<double>("smoothing");
  spec.x_max = s.number<double>("x-max");
  spec.beta = s.number<double>("beta");
  spec.svd_target = parse_association(s.str("svd-target"));
  spec.validate();
  const double floor = s.number<double>("count-floor");
  const int bins = s.number<int>("bins");

  write_summary(out, fixed_point_report(model, data.stats, spec, floor));

  if (s.has("diagnostics")) {
    const std::string& p = s.str("diagnostics");
    write_pmi_tsv(data.stats, data.vocab.tokens(), p + ".pmi.tsv");
    const Histogram h = pmi_histogram(data.stats, bins);
    out << std::setprecision(6) << "pmi_pairs=" << h.sample_size << '\n'
        << "pmi_mean=" << h.mean << '\n'
        << "pmi_stdev=" << h.stdev << '\n'
        << "pmi_skewness=" << h.skewness << '\n'
        << "pmi_excess_kurtosis=" << h.excess_kurtosis << '\n';
    if (model.kernel.kind == KernelKind::kBiasedDot) {
      const BiasDiagnostic b = glove_bias_diagnostic(model, data.stats);
      write_bias_tsv(b, data.vocab.tokens(), p + ".bias.tsv");
      out << std::fixed << std::setprecision(4) << "bias_context_r=" << b.context.r << '\n'
          << "bias_term_r=" << b.term.r << '\n';
    }
    s.write(p + ".config");
  }
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
        const EnvLookup& env) {
  CLI::App app{"Low rank word embeddings from cooccurrence statistics", "lre"};
  app.require_subcommand(1);

  struct Command {
    Command(std::string n, std::string d, const std::vector<OptionDef>* o)
        : name(std::move(n)), description(std::move(d)), defs(o) {}
    std::string name;
    std::string description;
    const std::vector<OptionDef>* defs;
    CLI::App* app = nullptr;
    std::map<std::string, std::string> raw;
    std::map<std::string, CLI::Option*> opts;
    std::string config;
  };
  std::vector<Command> commands = {
      {"count", "Count windowed cooccurrences in a corpus", &count_options()},
      {"train", "Train an embedding family on cooccurrence statistics", &train_options()},
      {"factorize", "Closed-form truncated SVD (same as train --family svd)",
       &train_options()},
      {"eval", "Fixed-point report and diagnostics for a trained model", &eval_options()},
  };
  for (auto& c : commands) {
    c.app = app.add_subcommand(c.name, c.description);
    c.app->add_option("--config", c.config, "key=value settings file");
    for (const auto& d : *c.defs) {
      std::string help = d.help;
      if (!d.fallback.empty()) help += " [" + d.fallback + "]";
      if (d.required) help += " (required)";
      c.opts[d.name] = c.app->add_option("--" + d.name, c.raw[d.name], help);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (auto& c : commands) {
      if (!c.app->parsed()) continue;
      std::map<std::string, std::optional<std::string>> flags;
      for (const auto& [name, opt] : c.opts) {
        if (opt->count() > 0) flags[name] = c.raw[name];
      }
      if (c.name == "factorize") {
        if (flags.count("family") && flags["family"] != "svd") {
          throw UsageError("factorize always uses --family svd");
        }
        flags["family"] = "svd";
      }
      Settings s = resolve(*c.defs, flags, c.config, env);
      if (c.name == "count") return cmd_count(s, out);
      if (c.name == "eval") return cmd_eval(s, out);
      return cmd_train(s, out, err);
    }
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace lre::cli
