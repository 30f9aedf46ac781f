#include "lre/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <thread>

#include "lre/error.hpp"

namespace lre {

std::string to_string(PairPolicy policy) {
  return policy == PairPolicy::kAllPairs ? "all-pairs" : "nonzero-only";
}

PairPolicy parse_pair_policy(std::string_view name) {
  if (name == "all-pairs" || name == "all_pairs") return PairPolicy::kAllPairs;
  if (name == "nonzero-only" || name == "nonzero_only") return PairPolicy::kNonzeroOnly;
  throw Error("unknown pair policy: " + std::string(name));
}

void TrainConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw Error("eta must be positive");
  if (!(eta_min >= 0.0) || !std::isfinite(eta_min)) {
    throw Error("eta_min must be non-negative");
  }
  if (epochs < 0) throw Error("epochs must be >= 0");
  if (dim < 1) throw Error("dim must be >= 1");
  if (threads < 1) throw Error("threads must be >= 1");
  if (max_restarts < 0) throw Error("max_restarts must be >= 0");
  if (!(convergence_tol >= 0.0)) throw Error("convergence_tol must be >= 0");
  if (!(report_count_floor >= 0.0)) throw Error("report_count_floor must be >= 0");
  objective.validate();
  if (kernel.kind == KernelKind::kSubwordDot &&
      (kernel.n_min < 1 || kernel.n_min > kernel.n_max)) {
    throw Error("subword n-gram range must satisfy 1 <= n_min <= n_max");
  }
  if (pair_policy == PairPolicy::kNonzeroOnly) {
    switch (objective.family) {
      case Family::kSgns: throw Error("SGNS requires all_pairs");
      case Family::kFastTextSgns: throw Error("FastText requires all_pairs");
      case Family::kSwivel: throw Error("Swivel requires all_pairs");
      default: break;
    }
  }
  if (pair_policy == PairPolicy::kAllPairs && objective.family == Family::kSvdMse) {
    const auto k = objective.svd_target.kind;
    if (k != AssociationKind::kClippedPmi && k != AssociationKind::kSmoothedPmi) {
      throw Error("svd-mse with all_pairs requires a clipped or smoothed target");
    }
  }
}

KernelSpec TrainConfig::default_kernel(Family family) {
  switch (family) {
    case Family::kGlove: return KernelSpec::biased_dot();
    case Family::kLds: return KernelSpec::quadratic_lds();
    case Family::kFastTextSgns: return KernelSpec::subword_dot();
    default: return KernelSpec::dot();
  }
}

double ModelGradient::norm() const {
  return std::sqrt(covectors.squaredNorm() + vectors.squaredNorm() +
                   ngrams.squaredNorm() + context_bias.squaredNorm() +
                   term_bias.squaredNorm() + lds_constant * lds_constant);
}

namespace {

void check_shapes(const EmbeddingModel& m, const CoocStats& s) {
  if (m.num_contexts() != s.vocab_size() || m.num_terms() != s.vocab_size()) {
    throw Error("model and co-occurrence vocabularies differ");
  }
}

/// Calls f(i, j, nij) for every pair in the set, column by column.
template <class F>
void for_each_pair(const CoocStats& s, PairPolicy policy, F&& f) {
  const std::size_t v = s.vocab_size();
  if (policy == PairPolicy::kNonzeroOnly) {
    for (TokenId j = 0; j < v; ++j) {
      for (const auto& ce : s.column(j)) f(ce.context, j, ce.count);
    }
    return;
  }
  std::vector<double> col(v, 0.0);
  for (TokenId j = 0; j < v; ++j) {
    const auto entries = s.column(j);
    for (const auto& ce : entries) col[ce.context] = ce.count;
    for (TokenId i = 0; i < v; ++i) f(i, j, col[i]);
    for (const auto& ce : entries) col[ce.context] = 0.0;
  }
}

/// Term vectors as the kernel sees them (composed for the subword kernel).
Eigen::MatrixXd term_matrix(const EmbeddingModel& m) {
  if (m.kernel.kind != KernelKind::kSubwordDot) return m.vectors;
  Eigen::MatrixXd t(m.dim(), static_cast<Eigen::Index>(m.num_terms()));
  for (TokenId j = 0; j < m.num_terms(); ++j) t.col(j) = m.subwords->compose(j);
  return t;
}

double kernel_value(const EmbeddingModel& m, const Eigen::MatrixXd& terms,
                    TokenId i, TokenId j) {
  if (m.kernel.kind == KernelKind::kQuadraticLds) {
    return (m.covectors.row(i).transpose() + terms.col(j)).squaredNorm();
  }
  double v = m.covectors.row(i).dot(terms.col(j));
  if (m.kernel.kind == KernelKind::kBiasedDot) v += m.context_bias(i) + m.term_bias(j);
  return v;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c) {
  return splitmix(splitmix(splitmix(splitmix(seed) ^ a) ^ b) ^ c);
}

// Rejection sampling keeps shuffles identical across standard libraries.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

template <class T>
void fisher_yates(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t k = v.size(); k > 1; --k) {
    std::swap(v[k - 1], v[uniform_below(rng, k)]);
  }
}

struct SweepSettings {
  double step;  // eta / multiplier scale
  bool newton_cap;
  PairPolicy policy;
};

/// One pass over the given term columns.
void sweep_terms(EmbeddingModel& m, const Objective& obj, const SweepSettings& st,
                 std::span<const TokenId> terms, std::span<const TokenId> ctx_perm,
                 std::uint64_t seed, std::atomic<double>* lds_c) {
  const CoocStats& stats = obj.stats();
  const KernelKind kind = m.kernel.kind;
  const Eigen::Index d = m.dim();
  const std::size_t nc = m.num_contexts();
  std::mt19937_64 rng(seed);

  double* const W = m.covectors.data();
  double* const V = m.vectors.data();
  double* const bc = m.context_bias.data();
  double* const bt = m.term_bias.data();

  std::vector<double> col_count;
  if (st.policy == PairPolicy::kAllPairs) col_count.assign(nc, 0.0);
  std::vector<CoocStats::ColumnEntry> entries;
  Eigen::VectorXd gram_delta(d);
  std::vector<double> s(static_cast<std::size_t>(d));

  for (const TokenId j : terms) {
    double* const vj = V + static_cast<std::ptrdiff_t>(j) * d;
    double grams = 0.0;
    if (kind == KernelKind::kSubwordDot) {
      Eigen::Map<Eigen::VectorXd>(vj, d) = m.subwords->compose(j);
      grams = static_cast<double>(m.subwords->grams_of(j).size());
      gram_delta.setZero();
    }

    auto update = [&](TokenId i, double nij) {
      double* const wi = W + static_cast<std::ptrdiff_t>(i) * d;
      const double c = lds_c ? lds_c->load(std::memory_order_relaxed) : 0.0;
      double psi = 0.0;
      double sens = 0.0;  // || d psi / d theta ||^2 over the touched parameters
      if (kind == KernelKind::kQuadraticLds) {
        for (Eigen::Index k = 0; k < d; ++k) {
          s[k] = wi[k] + vj[k];
          psi += s[k] * s[k];
        }
        sens = 8.0 * psi + 1.0;
      } else {
        double ww = 0.0, vv = 0.0;
        for (Eigen::Index k = 0; k < d; ++k) {
          psi += wi[k] * vj[k];
          ww += wi[k] * wi[k];
          vv += vj[k] * vj[k];
        }
        if (kind == KernelKind::kBiasedDot) {
          psi += bc[i] + bt[j];
          sens = ww + vv + 2.0;
        } else if (kind == KernelKind::kSubwordDot) {
          sens = vv + grams * ww;
        } else {
          sens = ww + vv;
        }
      }
      const CharGrad cg = obj.char_grad(psi, i, j, nij, c);
      if (cg.value == 0.0) return;
      double step = st.step;
      if (st.newton_cap) {
        const double curv = obj.curvature_bound(i, j, nij) * sens;
        if (curv * step > 1.0) step = 1.0 / curv;
      }
      const double a = step * cg.value;
      switch (kind) {
        case KernelKind::kDot:
        case KernelKind::kBiasedDot:
          for (Eigen::Index k = 0; k < d; ++k) {
            const double w = wi[k];
            wi[k] -= a * vj[k];
            vj[k] -= a * w;
          }
          if (kind == KernelKind::kBiasedDot) {
            bc[i] -= a;
            bt[j] -= a;
          }
          break;
        case KernelKind::kQuadraticLds:
          for (Eigen::Index k = 0; k < d; ++k) {
            wi[k] -= 2.0 * a * s[k];
            vj[k] -= 2.0 * a * s[k];
          }
          if (lds_c) lds_c->fetch_sub(a, std::memory_order_relaxed);
          break;
        case KernelKind::kSubwordDot:
          for (Eigen::Index k = 0; k < d; ++k) {
            const double w = wi[k];
            wi[k] -= a * vj[k];
            gram_delta[k] -= a * w;
            vj[k] -= grams * a * w;
          }
          break;
      }
    };

    const auto column = stats.column(j);
    if (st.policy == PairPolicy::kAllPairs) {
      for (const auto& ce : column) col_count[ce.context] = ce.count;
      const std::size_t offset = uniform_below(rng, nc);
      for (std::size_t t = 0; t < nc; ++t) {
        std::size_t pos = t + offset;
        if (pos >= nc) pos -= nc;
        const TokenId i = ctx_perm[pos];
        update(i, col_count[i]);
      }
      for (const auto& ce : column) col_count[ce.context] = 0.0;
    } else {
      entries.assign(column.begin(), column.end());
      fisher_yates(entries, rng);
      for (const auto& ce : entries) update(ce.context, ce.count);
    }

    if (kind == KernelKind::kSubwordDot) {
      auto& gv = m.subwords->vectors();
      for (auto g : m.subwords->grams_of(j)) gv.col(g) += gram_delta;
    }
  }
}

void run_epoch(EmbeddingModel& m, const Objective& obj, const TrainConfig& cfg,
               double step, std::uint64_t epoch_seed) {
  const std::size_t nt = m.num_terms();
  const std::size_t nc = m.num_contexts();

  std::mt19937_64 rng(epoch_seed);
  std::vector<TokenId> terms(nt);
  for (std::size_t j = 0; j < nt; ++j) terms[j] = static_cast<TokenId>(j);
  fisher_yates(terms, rng);
  std::vector<TokenId> ctx_perm;
  if (cfg.pair_policy == PairPolicy::kAllPairs) {
    ctx_perm.resize(nc);
    for (std::size_t i = 0; i < nc; ++i) ctx_perm[i] = static_cast<TokenId>(i);
    fisher_yates(ctx_perm, rng);
  }

  std::atomic<double> c{m.lds_constant.value_or(0.0)};
  // C belongs to the LDS loss; other objectives leave it fixed.
  std::atomic<double>* cp =
      m.lds_constant && obj.spec().family == Family::kLds ? &c : nullptr;
  const SweepSettings st{step, cfg.newton_cap, cfg.pair_policy};

  const auto workers = static_cast<std::size_t>(
      std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), std::max<std::size_t>(nt, 1)));
  if (workers <= 1) {
    sweep_terms(m, obj, st, terms, ctx_perm, derive_seed(epoch_seed, 1, 0, 0), cp);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t lo = nt * w / workers, hi = nt * (w + 1) / workers;
      pool.emplace_back([&, w, lo, hi] {
        try {
          sweep_terms(m, obj, st, std::span<const TokenId>(terms).subspan(lo, hi - lo),
                      ctx_perm, derive_seed(epoch_seed, 1, w, 0), cp);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  if (m.lds_constant) m.lds_constant = c.load();
  m.refresh_composed();
}

bool model_finite(const EmbeddingModel& m) {
  return m.covectors.allFinite() && m.vectors.allFinite() &&
         m.context_bias.allFinite() && m.term_bias.allFinite() &&
         (!m.lds_constant || std::isfinite(*m.lds_constant)) &&
         (!m.subwords || m.subwords->vectors().allFinite());
}

std::string format_loss(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

double total_loss(const EmbeddingModel& model, const Objective& objective,
                  PairPolicy policy) {
  check_shapes(model, objective.stats());
  const Eigen::MatrixXd terms = term_matrix(model);
  const double c = model.lds_constant.value_or(0.0);
  double sum = 0.0;
  for_each_pair(objective.stats(), policy, [&](TokenId i, TokenId j, double nij) {
    sum += objective.loss(kernel_value(model, terms, i, j), i, j, nij, c);
  });
  return sum;
}

LossAndGradient assemble_gradient(const EmbeddingModel& model,
                                  const Objective& objective, PairPolicy policy) {
  check_shapes(model, objective.stats());
  const Eigen::MatrixXd terms = term_matrix(model);
  const double c = model.lds_constant.value_or(0.0);
  const KernelKind kind = model.kernel.kind;
  const Eigen::Index d = model.dim();

  LossAndGradient out;
  auto& g = out.gradient;
  g.covectors = Eigen::MatrixXd::Zero(model.covectors.rows(), d);
  Eigen::MatrixXd gterms = Eigen::MatrixXd::Zero(d, terms.cols());
  if (kind == KernelKind::kBiasedDot) {
    g.context_bias = Eigen::VectorXd::Zero(model.context_bias.size());
    g.term_bias = Eigen::VectorXd::Zero(model.term_bias.size());
  }

  for_each_pair(objective.stats(), policy, [&](TokenId i, TokenId j, double nij) {
    const double p = kernel_value(model, terms, i, j);
    out.loss += objective.loss(p, i, j, nij, c);
    const double gv = objective.char_grad(p, i, j, nij, c).value;
    if (gv == 0.0) return;
    if (kind == KernelKind::kQuadraticLds) {
      const Eigen::VectorXd s = model.covectors.row(i).transpose() + terms.col(j);
      g.covectors.row(i) += 2.0 * gv * s.transpose();
      gterms.col(j) += 2.0 * gv * s;
      if (objective.spec().family == Family::kLds) g.lds_constant += gv;
      return;
    }
    g.covectors.row(i) += gv * terms.col(j).transpose();
    gterms.col(j) += gv * model.covectors.row(i).transpose();
    if (kind == KernelKind::kBiasedDot) {
      g.context_bias(i) += gv;
      g.term_bias(j) += gv;
    }
  });

  if (kind == KernelKind::kSubwordDot) {
    g.ngrams = Eigen::MatrixXd::Zero(d, model.subwords->vectors().cols());
    for (TokenId j = 0; j < model.num_terms(); ++j) {
      for (auto gram : model.subwords->grams_of(j)) g.ngrams.col(gram) += gterms.col(j);
    }
  } else {
    g.vectors = std::move(gterms);
  }
  return out;
}

PairDelta kernel_backward(const EmbeddingModel& model, double g, double eta,
                          TokenId i, TokenId j) {
  if (i >= model.num_contexts()) throw Error("context id out of range");
  const Eigen::VectorXd w = model.covectors.row(i).transpose();
  const Eigen::VectorXd v = model.term_vector(j);
  const double a = eta * g;
  PairDelta delta;
  switch (model.kernel.kind) {
    case KernelKind::kDot:
    case KernelKind::kSubwordDot:
      delta.covector = -a * v;
      delta.vector = -a * w;
      break;
    case KernelKind::kBiasedDot:
      delta.covector = -a * v;
      delta.vector = -a * w;
      delta.context_bias = -a;
      delta.term_bias = -a;
      break;
    case KernelKind::kQuadraticLds:
      delta.covector = -2.0 * a * (w + v);
      delta.vector = delta.covector;
      break;
  }
  return delta;
}

void apply_delta(EmbeddingModel& model, const PairDelta& delta, TokenId i,
                 TokenId j) {
  model.covectors.row(i) += delta.covector.transpose();
  switch (model.kernel.kind) {
    case KernelKind::kSubwordDot: {
      auto& gv = model.subwords->vectors();
      for (auto g : model.subwords->grams_of(j)) gv.col(g) += delta.vector;
      model.refresh_composed();
      break;
    }
    case KernelKind::kBiasedDot:
      model.vectors.col(j) += delta.vector;
      model.context_bias(i) += delta.context_bias;
      model.term_bias(j) += delta.term_bias;
      break;
    case KernelKind::kQuadraticLds:
      model.vectors.col(j) += delta.vector;
      *model.lds_constant += delta.lds_constant;
      break;
    case KernelKind::kDot:
      model.vectors.col(j) += delta.vector;
      break;
  }
}

CharGrad apply_pair_update(EmbeddingModel& model, const Objective& objective,
                           double eta, TokenId i, TokenId j) {
  const double c = model.lds_constant.value_or(0.0);
  const CharGrad cg = objective.char_grad(psi(model, i, j), i, j,
                                          objective.stats().count(i, j), c);
  PairDelta delta = kernel_backward(model, cg.value, eta, i, j);
  if (model.lds_constant && objective.spec().family == Family::kLds) {
    delta.lds_constant = -eta * cg.value;
  }
  apply_delta(model, delta, i, j);
  return cg;
}

double mean_multiplier(const Objective& objective, PairPolicy policy) {
  double sum = 0.0;
  std::size_t n = 0;
  for_each_pair(objective.stats(), policy, [&](TokenId i, TokenId j, double nij) {
    const double m = objective.char_grad(0.0, i, j, nij).multiplier;
    if (m > 0.0) {
      sum += m;
      ++n;
    }
  });
  return n == 0 ? 1.0 : sum / static_cast<double>(n);
}

TrainReport train_model(EmbeddingModel& model, const CoocStats& stats,
                        const TrainConfig& config) {
  config.validate();
  model.validate();
  check_shapes(model, stats);
  if (model.dim() != config.dim) throw Error("model dimension differs from config");
  const auto start = std::chrono::steady_clock::now();

  const Objective obj(config.objective, stats);
  TrainReport report;
  report.multiplier_scale =
      config.normalize_multiplier ? mean_multiplier(obj, config.pair_policy) : 1.0;
  report.initial_loss = total_loss(model, obj, config.pair_policy);
  if (!std::isfinite(report.initial_loss)) throw Error("initial loss is not finite");

  const double eta_min = std::min(config.eta_min, config.eta);
  double eta_factor = 1.0;
  double prev = report.initial_loss;
  constexpr int kMaxDescentHalvings = 40;

  for (int e = 0; e < config.epochs; ++e) {
    const double frac = config.epochs > 1 ? static_cast<double>(e) / (config.epochs - 1) : 0.0;
    const double base_eta = config.eta + (eta_min - config.eta) * frac;
    const EmbeddingModel snapshot = model;
    int descent_halvings = 0;
    bool stalled = false;
    for (int attempt = 0;; ++attempt) {
      const double eta = base_eta * eta_factor;
      run_epoch(model, obj, config, eta / report.multiplier_scale,
                derive_seed(config.seed, static_cast<std::uint64_t>(e),
                            static_cast<std::uint64_t>(attempt), 7));
      LossAndGradient lg;
      const bool finite = model_finite(model);
      if (finite) lg = assemble_gradient(model, obj, config.pair_policy);
      if (!finite || !std::isfinite(lg.loss)) {
        model = snapshot;
        if (report.restarts >= config.max_restarts) {
          throw DivergenceError("diverged at epoch " + std::to_string(e) +
                                    " (last finite loss " + format_loss(prev) + ")",
                                e, prev);
        }
        ++report.restarts;
        eta_factor *= 0.5;
        continue;
      }
      if (config.enforce_descent && lg.loss > prev) {
        model = snapshot;
        if (++descent_halvings > kMaxDescentHalvings) {
          stalled = true;
          break;
        }
        eta_factor *= 0.5;
        continue;
      }
      report.epoch_loss.push_back(lg.loss);
      report.gradient_norm.push_back(lg.gradient.norm());
      report.epoch_eta.push_back(eta);
      break;
    }
    if (stalled) {
      report.converged = true;
      break;
    }
    const double cur = report.epoch_loss.back();
    if (config.on_epoch) config.on_epoch(e, cur, model);
    if (config.convergence_tol > 0.0 && prev != 0.0 &&
        std::abs(cur - prev) / std::abs(prev) < config.convergence_tol) {
      report.converged = true;
      prev = cur;
      break;
    }
    prev = cur;
  }

  try {
    report.fixed_point =
        fixed_point_report(model, stats, config.objective, config.report_count_floor);
  } catch (const Error&) {
    report.fixed_point.reset();
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

TrainResult train(const CoocStats& stats, const TrainConfig& config,
                  std::span<const std::string> term_tokens) {
  config.validate();
  TrainResult r{init_model(stats.vocab_size(), stats.vocab_size(), config.dim,
                           config.kernel, config.seed, term_tokens),
                {}};
  r.report = train_model(r.model, stats, config);
  return r;
}

}  // namespace lre
