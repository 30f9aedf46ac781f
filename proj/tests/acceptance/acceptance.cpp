// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "lre/cli.hpp"
#include "lre/corpus.hpp"
#include "lre/error.hpp"
#include "lre/eval.hpp"
#include "lre/model.hpp"
#include "lre/objective.hpp"
#include "lre/svd.hpp"
#include "lre/trainer.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace lre;

namespace {

const Family kFamilies[] = {Family::kSvdMse, Family::kSgns,  Family::kFastTextSgns,
                            Family::kGlove,  Family::kLds,   Family::kSwivel};

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(const std::string& id, const std::string& name, const Outcome& o, double secs) {
  std::printf("%s  %-4s %-34s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id.c_str(), name.c_str(),
              o.detail.c_str(), secs);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

void criterion(const std::string& id, const std::string& name,
               const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(id, name, o,
         std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

std::string fmt(const char* f, double v) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

CoocStats grid(double a, double b, double c, double d) {
  return CoocStats::from_entries(2, {{0, 0, a}, {0, 1, b}, {1, 0, c}, {1, 1, d}});
}

ObjectiveSpec objective_for(Family f) {
  ObjectiveSpec o;
  o.family = f;
  if (f == Family::kSvdMse) o.svd_target = AssociationSpec::smoothed();
  return o;
}

PairPolicy policy_for(Family f) {
  return f == Family::kSgns || f == Family::kFastTextSgns || f == Family::kSwivel
             ? PairPolicy::kAllPairs
             : PairPolicy::kNonzeroOnly;
}

// ---------------------------------------------------------------------------

Outcome fixed_points() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> lg(-1.0, 5.0);
  std::uniform_real_distribution<double> cd(-3.0, 3.0);
  auto count = [&] { return std::floor(std::pow(10.0, lg(rng))) + 1.0; };
  double worst = 0.0;
  for (Family f : kFamilies) {
    for (int draw = 0; draw < 1000; ++draw) {
      const double a = draw % 5 == 0 ? 0.0 : count();
      const auto s = grid(a, count(), count(), count());
      auto spec = objective_for(f);
      spec.k = 1 + static_cast<int>(rng() % 15);
      spec.smoothing_exponent = draw % 2 ? 1.0 : 0.75;
      const double c = cd(rng);
      const auto fp = fixed_point(spec, s, 0, 0, c);
      worst = std::max(worst, std::abs(char_grad(spec, fp.psi, s, 0, 0, c).value));
    }
  }
  return {worst < 1e-9, fmt("max |g| = %.3g over 6 x 1000 draws", worst)};
}

Outcome sgns_identity() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int draw = 0; draw < 10000; ++draw) {
    const double a = std::max(1e6 * u(rng), 1e-300);
    const double b = std::max(1e6 * u(rng), 1e-300);
    worst = std::max(worst, std::abs((a + b) * sigmoid(std::log(a / b)) - a) / a);
  }
  return {worst <= 1e-12, fmt("max relative error %.3g", worst)};
}

Outcome gradient_checks() {
  // Per-pair derivative of each loss.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lg(-1.0, 3.0);
  std::uniform_real_distribution<double> pd(-3.0, 3.0);
  auto count = [&] { return std::floor(std::pow(10.0, lg(rng))) + 1.0; };
  double pair_worst = 0.0;
  constexpr double eps = 1e-5;
  for (Family f : kFamilies) {
    for (int draw = 0; draw < 500; ++draw) {
      const auto s = grid(draw % 4 == 0 ? 0.0 : count(), count(), count(), count());
      const Objective obj(objective_for(f), s);
      const double nij = s.count(0, 0);
      const double c = pd(rng);
      const double psi = pd(rng);
      const double fd =
          (obj.loss(psi + eps, 0, 0, nij, c) - obj.loss(psi - eps, 0, 0, nij, c)) / (2.0 * eps);
      const double g = obj.char_grad(psi, 0, 0, nij, c).value;
      pair_worst = std::max(pair_worst, std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-6}));
    }
  }
  // Assembled parameter gradients for every kernel and objective.
  const std::vector<std::string> words = {"cat", "cart", "at", "tar", "rat"};
  const KernelSpec kernels[] = {KernelSpec::dot(), KernelSpec::biased_dot(),
                                KernelSpec::quadratic_lds(), KernelSpec::subword_dot(2, 3)};
  double full_worst = 0.0;
  int combos = 0;
  for (Family f : kFamilies) {
    for (const auto& kernel : kernels) {
      for (PairPolicy p : {PairPolicy::kNonzeroOnly, PairPolicy::kAllPairs}) {
        if (policy_for(f) == PairPolicy::kAllPairs && p == PairPolicy::kNonzeroOnly) continue;
        const auto s = lre::test::random_stats(5, 40 + static_cast<std::uint64_t>(combos), 0.5, 30.0);
        auto spec = objective_for(f);
        spec.x_max = 20.0;
        const Objective obj(spec, s);
        const auto m = lre::test::randomized_model(5, 3, kernel, 50 + combos, words);
        full_worst = std::max(full_worst, lre::test::worst_gradient_error(m, obj, p));
        ++combos;
      }
    }
  }
  const bool pass = pair_worst < 1e-4 && full_worst < 1e-4;
  return {pass, fmt("per-pair %.3g, ", pair_worst) +
                    fmt("assembled %.3g over ", full_worst) + std::to_string(combos) + " combos"};
}

Outcome lds_identity() {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  auto m = init_model(1, 1, 8, KernelSpec::quadratic_lds(), 1);
  for (int draw = 0; draw < 1000; ++draw) {
    for (int k = 0; k < 8; ++k) {
      m.covectors(0, k) = g(rng);
      m.vectors(k, 0) = g(rng);
    }
    const auto [it, jt] = lds_feature_map(m, 0, 0);
    const double direct = (m.covectors.row(0).transpose() + m.vectors.col(0)).squaredNorm();
    worst = std::max(worst, std::abs(it.dot(jt) - direct) / std::max(1.0, direct));
  }
  return {worst < 1e-12, fmt("max relative error %.3g", worst)};
}

Outcome svd_exactness() {
  const auto s = lre::test::random_stats(50, 5, 0.5, 80.0);
  const auto m = build_assoc_matrix(s, AssociationSpec::ppmi());
  const auto svd = truncated_svd(m, 50);
  const double frob = (m.entries - svd.reconstruct()).norm();
  ObjectiveSpec o;
  o.svd_target = AssociationSpec::ppmi();
  const auto rep = fixed_point_report(svd_to_model(svd), s, o, 5.0);
  const bool pass = frob < 1e-8 && std::abs(rep.pearson_r - 1.0) < 5e-5 && rep.rmse < 1e-8;
  return {pass, fmt("frobenius %.3g, ", frob) + fmt("r = %.6f, ", rep.pearson_r) +
                    fmt("rmse %.3g", rep.rmse)};
}

Outcome planted_recovery() {
  // PMI has rank <= 8 + 2; every count is >= 5 so the clipped matrix equals it.
  const auto s = lre::test::planted_stats(100, 8, 6);
  std::string detail;
  bool pass = true;
  for (Family f : {Family::kSvdMse, Family::kGlove, Family::kSwivel}) {
    TrainConfig cfg;
    cfg.objective.family = f;
    cfg.kernel = TrainConfig::default_kernel(f);
    cfg.pair_policy = policy_for(f);
    cfg.dim = 16;
    cfg.epochs = 150;
    cfg.eta = 0.05;
    cfg.eta_min = 0.005;
    const auto r = train(s, cfg);
    const double pr = r.report.fixed_point ? r.report.fixed_point->pearson_r : 0.0;
    pass = pass && pr > 0.99;
    detail += to_string(f) + fmt(" r=%.4f ", pr);
    if (r.report.fixed_point && r.report.fixed_point->secondary_r) {
      detail += fmt("(psi vs ln Nij %.4f) ", *r.report.fixed_point->secondary_r);
    }
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// Desk-scale corpus.

struct Desk {
  std::vector<std::string> tokens;
  Vocabulary vocab;
  CoocStats stats;
  std::optional<TrainResult> glove;
  std::optional<TrainResult> fasttext;
};

TrainConfig desk_config(Family f) {
  TrainConfig cfg;
  cfg.objective.family = f;
  cfg.kernel = TrainConfig::default_kernel(f);
  cfg.pair_policy = policy_for(f);
  cfg.dim = 32;
  cfg.seed = 1;
  cfg.eta = 0.05;
  cfg.eta_min = 0.0001;
  cfg.epochs = 40;
  // The PMI - ln k reading of the SGNS fixed point holds for unsmoothed
  // negative sampling.
  cfg.objective.smoothing_exponent = 1.0;
  switch (f) {
    case Family::kSgns:
    case Family::kSwivel:
      cfg.eta = 0.2;
      cfg.epochs = 30;
      break;
    case Family::kFastTextSgns:
      cfg.eta = 0.2;
      cfg.epochs = 20;
      break;
    default:
      break;
  }
  return cfg;
}

Outcome desk_pmi(Desk& desk) {
  std::string detail;
  bool pass = true;
  const auto t0 = std::chrono::steady_clock::now();
  for (Family f : kFamilies) {
    const TrainConfig cfg = desk_config(f);
    auto r = train(desk.stats, cfg, desk.vocab.tokens());
    const auto& fp = r.report.fixed_point;
    const double pr = fp ? fp->pearson_r : 0.0;
    pass = pass && pr > 0.9;
    detail += to_string(f) + fmt(" %.3f", pr);
    if (f == Family::kSgns) {
      const double sr = fp && fp->secondary_r ? *fp->secondary_r : 0.0;
      pass = pass && sr > 0.9;
      detail += fmt(" (PMI-ln k %.3f)", sr);
    }
    detail += fmt(" [%.0fs]; ", r.report.wall_seconds);
    std::fprintf(stderr, "  %s: r=%.4f after %zu epochs, %.1fs\n", to_string(f).c_str(), pr,
                 r.report.epoch_loss.size(), r.report.wall_seconds);
    if (f == Family::kGlove) desk.glove = std::move(r);
    if (f == Family::kFastTextSgns) desk.fasttext = std::move(r);
  }
  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  pass = pass && total < 15 * 60;
  return {pass, detail + fmt("total %.0fs", total)};
}

Outcome glove_bias(const Desk& desk) {
  if (!desk.glove) return {false, "no trained GloVe model"};
  const auto d = glove_bias_diagnostic(desk.glove->model, desk.stats);
  return {d.context.r > 0.8 && d.term.r > 0.8,
          fmt("context r = %.4f, ", d.context.r) + fmt("term r = %.4f", d.term.r)};
}

Outcome pmi_skew(const Desk& desk, const fs::path& work) {
  const auto h = pmi_histogram(desk.stats, 60);
  write_histogram_tsv(h, work / "pmi_histogram.tsv");
  return {std::abs(h.skewness) < 1.0,
          fmt("skewness %.4f over ", h.skewness) + std::to_string(h.sample_size) + " pairs"};
}

Outcome subword_contract(const Desk& desk) {
  if (!desk.fasttext) return {false, "no trained FastText model"};
  const auto& m = desk.fasttext->model;
  const auto& t = *m.subwords;
  std::size_t mismatched = 0;
  for (TokenId j = 0; j < m.num_terms(); ++j) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(m.dim());
    for (auto g : t.grams_of(j)) sum += t.vectors().col(g);
    if (sum != m.term_vector(j) || sum != m.vectors.col(j)) ++mismatched;
  }
  // A word outside the vocabulary, composed from n-grams alone.
  std::string held;
  for (const char* w : {"reconstructionists", "peacemakings", "overtaxation", "unamericanly"}) {
    if (!desk.vocab.find(w)) {
      held = w;
      break;
    }
  }
  Eigen::VectorXd expect = Eigen::VectorXd::Zero(m.dim());
  std::size_t known = 0;
  for (const auto& g : ngrams(held, t.n_min(), t.n_max())) {
    if (auto id = t.find(g)) {
      expect += t.vectors().col(*id);
      ++known;
    }
  }
  const Eigen::VectorXd got = t.compose(std::string_view(held));
  const bool pass = mismatched == 0 && known > 0 && got.isApprox(expect, 1e-14) && got.norm() > 0.0;
  return {pass, std::to_string(m.num_terms() - mismatched) + "/" + std::to_string(m.num_terms()) +
                    " words exact; '" + held + "' from " + std::to_string(known) + " n-grams"};
}

// Runs a command sequence twice with identical settings and compares every
// output file and the printed output byte for byte.
Outcome determinism(const fs::path& work, const std::string& corpus) {
  const fs::path dir = work / "determinism";
  auto in = [&](const std::string& f) { return (dir / f).string(); };
  std::vector<std::vector<std::string>> cmds = {
      {"count", "--corpus", corpus, "--out", in("stats"), "--window", "5", "--max-vocab",
       "2000", "--undersample", "1e-3", "--seed", "3"},
      {"count", "--corpus", corpus, "--out", in("small"), "--window", "3", "--max-vocab", "300"},
      {"factorize", "--stats", in("small"), "--out", in("svd"), "--dim", "16"},
  };
  for (const char* fam : {"svd-mse", "sgns", "fasttext", "glove", "lds", "swivel"}) {
    cmds.push_back({"train", "--stats", in("small"), "--out", in(fam), "--family", fam, "--dim",
                    "8", "--epochs", "3", "--seed", "7", "--threads", "1"});
    cmds.push_back({"eval", "--model", in(fam), "--stats", in("small"), "--diagnostics",
                    in(std::string(fam) + "_diag")});
  }

  auto run_all = [&] {
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::map<std::string, std::string> outputs;
    for (auto args : cmds) {
      args.insert(args.begin(), "lre");
      std::vector<const char*> argv;
      for (const auto& a : args) argv.push_back(a.c_str());
      std::ostringstream out, err;
      const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err,
                                [](const std::string&) { return std::nullopt; });
      if (code != 0) throw Error("command failed: " + args[1] + ": " + err.str());
      outputs["stdout " + args[1] + " " + args[5]] += out.str();
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
      std::ifstream f(entry.path(), std::ios::binary);
      outputs[entry.path().filename().string()] =
          std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    }
    return outputs;
  };
  const auto first = run_all();
  const auto second = run_all();
  std::vector<std::string> differing;
  for (const auto& [name, bytes] : first) {
    auto it = second.find(name);
    if (it == second.end() || it->second != bytes) differing.push_back(name);
  }
  if (second.size() != first.size()) differing.push_back("(file set)");
  std::string detail = std::to_string(first.size()) + " outputs from " +
                       std::to_string(cmds.size()) + " commands compared";
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty(), detail};
}

}  // namespace

int main() {
  const fs::path work = LRE_ACCEPTANCE_WORKDIR;
  const std::string corpus = LRE_ACCEPTANCE_CORPUS;
  fs::create_directories(work);

  criterion("1", "zero-gradient fixed points", fixed_points);
  criterion("2", "sgns identity", sgns_identity);
  criterion("3", "finite-difference gradients", gradient_checks);
  criterion("4", "lds kernel identity", lds_identity);
  criterion("5", "full-rank svd exactness", svd_exactness);
  criterion("6", "planted-factor recovery (d=16)", planted_recovery);

  Desk desk;
  bool have_corpus = false;
  try {
    desk.tokens = read_corpus(corpus);
    desk.vocab = build_vocabulary(desk.tokens, 1, 2000);
    WindowConfig wc;
    wc.width = 5;
    wc.max_vocab = 2000;
    desk.stats = extract_cooccurrences(desk.tokens, desk.vocab, wc);
    have_corpus = desk.tokens.size() >= 1000000;
    std::fprintf(stderr, "corpus: %zu tokens, vocab %zu, N = %.6g, %zu nonzero pairs\n",
                 desk.tokens.size(), desk.vocab.size(), desk.stats.total(),
                 desk.stats.nonzero_count());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "corpus unavailable: %s\n", e.what());
  }
  if (have_corpus) {
    criterion("7", "desk-scale PMI approximation", [&] { return desk_pmi(desk); });
    criterion("8", "glove bias diagnostic", [&] { return glove_bias(desk); });
    criterion("9", "pmi histogram skewness", [&] { return pmi_skew(desk, work); });
    criterion("10", "fasttext subword contract", [&] { return subword_contract(desk); });
  } else {
    for (const char* id : {"7", "8", "9", "10"}) {
      report(id, "desk-scale corpus", {false, "needs a >= 1M-token corpus at " + corpus}, 0.0);
    }
  }
  criterion("11", "determinism at threads=1", [&] { return determinism(work, corpus); });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
