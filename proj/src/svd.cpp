#include "lre/svd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "lre/error.hpp"

namespace lre {

DenseAssocMatrix build_assoc_matrix(const CoocStats& stats, const AssociationSpec& spec) {
  if (spec.kind != AssociationKind::kClippedPmi &&
      spec.kind != AssociationKind::kSmoothedPmi) {
    throw Error("unbounded association; choose a clipped variant");
  }
  const auto v = static_cast<Eigen::Index>(stats.vocab_size());
  const double n = stats.total();
  DenseAssocMatrix out{Eigen::MatrixXd(v, v), spec};
  auto& m = out.entries;

  if (spec.kind == AssociationKind::kClippedPmi) {
    if (!std::isfinite(spec.alpha)) throw Error("clip floor must be finite");
    m.setConstant(spec.alpha);
  } else {
    for (Eigen::Index j = 0; j < v; ++j) {
      const double nj = stats.term_marginal(static_cast<TokenId>(j));
      for (Eigen::Index i = 0; i < v; ++i) {
        const double ni = stats.context_marginal(static_cast<TokenId>(i));
        if (!(ni > 0.0) || !(nj > 0.0)) throw Error("undefined marginal");
        m(i, j) = std::log(n / (ni * nj));
      }
    }
  }
  for (const auto& e : stats.entries()) {
    // Counts below 1 make smoothed PMI fall back to Nij = 1 as well.
    if (spec.kind == AssociationKind::kClippedPmi) {
      m(e.context, e.term) = std::max(pmi(stats, e.context, e.term), spec.alpha);
    } else if (e.count > 1.0) {
      m(e.context, e.term) = pmi(stats, e.context, e.term);
    }
  }
  return out;
}

Eigen::MatrixXd SvdResult::reconstruct() const {
  return u * s.asDiagonal() * vt;
}

namespace {

void fix_signs(SvdResult& r) {
  for (Eigen::Index k = 0; k < r.u.cols(); ++k) {
    Eigen::Index arg = 0;
    r.u.col(k).cwiseAbs().maxCoeff(&arg);
    if (r.u(arg, k) < 0.0) {
      r.u.col(k) *= -1.0;
      r.vt.row(k) *= -1.0;
    }
  }
}

/// Replaces zero columns of q by unit vectors orthogonal to the others.
void complete_basis(Eigen::MatrixXd& q, const std::vector<bool>& missing) {
  for (Eigen::Index k = 0; k < q.cols(); ++k) {
    if (!missing[k]) continue;
    for (Eigen::Index e = 0; e < q.rows(); ++e) {
      Eigen::VectorXd c = Eigen::VectorXd::Unit(q.rows(), e);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index o = 0; o < q.cols(); ++o) {
          if (o == k || (missing[o] && o > k)) continue;
          c -= q.col(o).dot(c) * q.col(o);
        }
      }
      const double nrm = c.norm();
      if (nrm > 0.5) {
        q.col(k) = c / nrm;
        break;
      }
    }
  }
}

/// One-sided Jacobi for a tall matrix (rows >= cols).
SvdResult jacobi_tall(const Eigen::MatrixXd& a) {
  const Eigen::Index m = a.rows(), n = a.cols();
  Eigen::MatrixXd u = a;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  constexpr double kEps = 1e-15;
  constexpr int kMaxSweeps = 100;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double alpha = u.col(p).squaredNorm();
        const double beta = u.col(q).squaredNorm();
        const double gamma = u.col(p).dot(u.col(q));
        if (gamma == 0.0 || std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        for (Eigen::Index r = 0; r < m; ++r) {
          const double up = u(r, p), uq = u(r, q);
          u(r, p) = c * up - s * uq;
          u(r, q) = s * up + c * uq;
        }
        for (Eigen::Index r = 0; r < n; ++r) {
          const double vp = v(r, p), vq = v(r, q);
          v(r, p) = c * vp - s * vq;
          v(r, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  Eigen::VectorXd sigma(n);
  for (Eigen::Index k = 0; k < n; ++k) sigma(k) = u.col(k).norm();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return sigma(x) > sigma(y); });

  SvdResult r;
  r.u.resize(m, n);
  r.s.resize(n);
  r.vt.resize(n, n);
  const double floor = sigma.size() > 0 ? sigma.maxCoeff() * 1e-13 : 0.0;
  std::vector<bool> missing(static_cast<std::size_t>(n), false);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    r.s(k) = sigma(src);
    r.vt.row(k) = v.col(src).transpose();
    if (sigma(src) > floor && sigma(src) > 0.0) {
      r.u.col(k) = u.col(src) / sigma(src);
    } else {
      r.s(k) = 0.0;
      r.u.col(k).setZero();
      missing[static_cast<std::size_t>(k)] = true;
    }
  }
  complete_basis(r.u, missing);
  return r;
}

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

}  // namespace

SvdResult jacobi_svd(const Eigen::MatrixXd& a) {
  if (a.size() == 0) throw Error("svd: empty matrix");
  if (!a.allFinite()) throw Error("svd: non-finite entry");
  SvdResult r;
  if (a.rows() >= a.cols()) {
    r = jacobi_tall(a);
  } else {
    SvdResult t = jacobi_tall(a.transpose());
    r.u = t.vt.transpose();
    r.s = std::move(t.s);
    r.vt = t.u.transpose();
  }
  fix_signs(r);
  return r;
}

SvdResult truncated_svd(const Eigen::MatrixXd& a, int rank, const SvdOptions& opt) {
  const Eigen::Index min_dim = std::min(a.rows(), a.cols());
  if (rank < 1 || rank > min_dim) {
    throw Error("svd rank must be in [1, " + std::to_string(min_dim) + "]");
  }
  if (!a.allFinite()) throw Error("svd: non-finite entry");

  auto truncate = [rank](SvdResult& r) {
    r.u = r.u.leftCols(rank).eval();
    r.s = r.s.head(rank).eval();
    r.vt = r.vt.topRows(rank).eval();
  };

  if (min_dim <= opt.direct_max_dim) {
    SvdResult r = jacobi_svd(a);
    truncate(r);
    return r;
  }

  const Eigen::Index l = std::min<Eigen::Index>(rank + std::max(opt.oversample, 0), min_dim);
  std::mt19937_64 rng(opt.seed);
  Eigen::MatrixXd omega(a.cols(), l);
  for (Eigen::Index c = 0; c < l; ++c) {
    for (Eigen::Index r = 0; r < a.cols(); ++r) {
      omega(r, c) = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
    }
  }
  Eigen::MatrixXd q = orthonormalize(a * omega);
  Eigen::VectorXd prev = Eigen::VectorXd::Constant(rank, -1.0);
  SvdResult small;
  int it = 0;
  for (;;) {
    small = jacobi_svd(q.transpose() * a);
    const Eigen::VectorXd cur = small.s.head(rank);
    const double scale = std::max(cur(0), std::numeric_limits<double>::min());
    const double change = (cur - prev).cwiseAbs().maxCoeff() / scale;
    if ((it >= opt.min_power_iterations && change < opt.tolerance) ||
        it >= opt.max_power_iterations) {
      break;
    }
    prev = cur;
    const Eigen::MatrixXd z = orthonormalize(a.transpose() * q);
    q = orthonormalize(a * z);
    ++it;
  }

  SvdResult r;
  r.u = q * small.u;
  r.s = small.s;
  r.vt = small.vt;
  r.iterations = it;
  truncate(r);
  fix_signs(r);
  return r;
}

EmbeddingModel svd_to_model(const SvdResult& svd, SigmaSplit split) {
  if (svd.u.cols() != svd.s.size() || svd.vt.rows() != svd.s.size()) {
    throw Error("svd_to_model: inconsistent shapes");
  }
  EmbeddingModel m;
  m.kernel = KernelSpec::dot();
  if (split == SigmaSplit::kIntoVectors) {
    m.covectors = svd.u;
    m.vectors = svd.s.asDiagonal() * svd.vt;
  } else {
    const Eigen::VectorXd root = svd.s.cwiseSqrt();
    m.covectors = svd.u * root.asDiagonal();
    m.vectors = root.asDiagonal() * svd.vt;
  }
  return m;
}

}  // namespace lre
