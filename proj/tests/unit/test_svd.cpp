#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>
#include <random>

#include "lre/error.hpp"
#include "lre/svd.hpp"
#include "support.hpp"

using namespace lre;
using lre::test::random_stats;
using lre::test::stats_of;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a(m, n);
  for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = g(rng);
  return a;
}

void check_orthonormal(const SvdResult& r) {
  const auto k = r.rank();
  CHECK((r.u.transpose() * r.u - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((r.vt * r.vt.transpose() - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-8);
  for (int i = 0; i + 1 < k; ++i) CHECK(r.s(i) >= r.s(i + 1));
  CHECK(r.s.minCoeff() >= 0.0);
}

}  // namespace

TEST_CASE("association matrix examples") {
  const auto s = stats_of("a b a b a");
  const auto m = build_assoc_matrix(s, AssociationSpec::ppmi());
  Eigen::Matrix2d expect;
  expect << 0, std::log(2.0), std::log(2.0), 0;
  CHECK((m.entries - expect).cwiseAbs().maxCoeff() < 1e-15);

  std::vector<CoocEntry> e;
  for (TokenId i = 0; i < 6; ++i) {
    for (TokenId j = 0; j < 6; ++j) e.push_back({i, j, 3.0});
  }
  const auto indep = CoocStats::from_entries(6, std::move(e));
  CHECK(build_assoc_matrix(indep, AssociationSpec::ppmi()).entries.cwiseAbs().maxCoeff() < 1e-15);

  CHECK_THROWS_WITH_AS(build_assoc_matrix(s, AssociationSpec::pmi()),
                       "unbounded association; choose a clipped variant", Error);
  CHECK_THROWS_AS(build_assoc_matrix(s, AssociationSpec::log_count()), Error);

  const auto sm = build_assoc_matrix(s, AssociationSpec::smoothed());
  CHECK(sm.entries(0, 0) == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("full rank reconstruction") {
  const auto m = build_assoc_matrix(stats_of("a b a b a"), AssociationSpec::ppmi());
  const auto r = truncated_svd(m, 2);
  CHECK((m.entries - r.reconstruct()).norm() < 1e-10);
  const auto model = svd_to_model(r);
  for (TokenId i = 0; i < 2; ++i) {
    for (TokenId j = 0; j < 2; ++j) CHECK(std::abs(psi(model, i, j) - m.entries(i, j)) < 1e-10);
  }
  CHECK_THROWS_AS(truncated_svd(m, 3), Error);
  CHECK_THROWS_AS(truncated_svd(m, 0), Error);
}

TEST_CASE("planted rank one") {
  for (Eigen::Index n : {5, 40, 120}) {
    const Eigen::MatrixXd x = random_matrix(n, 1, 1);
    const Eigen::MatrixXd y = random_matrix(n, 1, 2);
    const Eigen::MatrixXd a = x * y.transpose();
    const auto r = truncated_svd(a, 1);
    CHECK((a - r.reconstruct()).norm() < 1e-8);
    const auto model = svd_to_model(r, SigmaSplit::kSymmetric);
    for (TokenId i = 0; i < n; i += 7) {
      for (TokenId j = 0; j < n; j += 5) CHECK(std::abs(psi(model, i, j) - a(i, j)) < 1e-8);
    }
  }
}

TEST_CASE("rank-1 residual against an eigen-decomposition oracle") {
  Eigen::Matrix3d a;
  a << 4, 1, -2, 0.5, 3, 1, -1, 2, 5;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(a.transpose() * a);
  Eigen::Vector3d ev = eig.eigenvalues();  // ascending sigma^2
  const double oracle = std::sqrt(ev(0) + ev(1));
  const auto r = truncated_svd(Eigen::MatrixXd(a), 1);
  CHECK((Eigen::MatrixXd(a) - r.reconstruct()).norm() == doctest::Approx(oracle).epsilon(1e-10));
  CHECK(r.s(0) == doctest::Approx(std::sqrt(ev(2))).epsilon(1e-12));
}

TEST_CASE("orthonormality and sign convention") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (auto [m, n] : {std::pair<int, int>{30, 20}, {20, 30}, {150, 130}}) {
      const Eigen::MatrixXd a = random_matrix(m, n, seed);
      const auto r = truncated_svd(a, 10);
      check_orthonormal(r);
      for (int k = 0; k < 10; ++k) {
        Eigen::Index arg = 0;
        r.u.col(k).cwiseAbs().maxCoeff(&arg);
        CHECK(r.u(arg, k) > 0.0);
      }
    }
  }
}

TEST_CASE("randomized path agrees with the direct solver") {
  // Decaying spectrum so that subspace iteration converges quickly.
  const Eigen::Index n = 100;
  Eigen::HouseholderQR<Eigen::MatrixXd> q1(random_matrix(n, n, 3)), q2(random_matrix(n, n, 4));
  const Eigen::MatrixXd u = q1.householderQ();
  const Eigen::MatrixXd v = q2.householderQ();
  Eigen::VectorXd s(n);
  for (Eigen::Index k = 0; k < n; ++k) s(k) = std::pow(0.8, static_cast<double>(k));
  const Eigen::MatrixXd a = u * s.asDiagonal() * v.transpose();
  const auto fast = truncated_svd(a, 8);
  SvdOptions direct;
  direct.direct_max_dim = 1000;
  const auto ref = truncated_svd(a, 8, direct);
  CHECK(fast.iterations >= 4);
  CHECK((fast.s - ref.s).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((fast.reconstruct() - ref.reconstruct()).norm() < 1e-8);
  for (int k = 0; k < 8; ++k) CHECK(fast.s(k) == doctest::Approx(s(k)).epsilon(1e-10));
}

TEST_CASE("property: error is non-increasing in the rank") {
  const auto m = build_assoc_matrix(random_stats(30, 5, 0.4), AssociationSpec::ppmi());
  double prev = INFINITY;
  for (int k = 1; k <= 30; ++k) {
    const double err = (m.entries - truncated_svd(m, k).reconstruct()).norm();
    CHECK(err <= prev + 1e-12);
    prev = err;
  }
  CHECK(prev < 1e-10);
}

TEST_CASE("rank-deficient input completes the basis") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(6, 4);
  a(0, 0) = 2.0;
  a(1, 1) = 1.0;
  const auto r = jacobi_svd(a);
  check_orthonormal(r);
  CHECK(r.s(2) == 0.0);
  CHECK((a - r.reconstruct()).norm() < 1e-14);
}

TEST_CASE("export and reload keeps the dot products") {
  const auto m = build_assoc_matrix(random_stats(8, 2), AssociationSpec::ppmi());
  const auto model = svd_to_model(truncated_svd(m, 8));
  const auto dir = std::filesystem::temp_directory_path() / "lre_test_svd";
  std::filesystem::create_directories(dir);
  std::vector<std::string> tokens;
  for (int k = 0; k < 8; ++k) tokens.push_back("t" + std::to_string(k));
  export_model(model, tokens, dir / "m");
  const auto back = import_model(dir / "m");
  for (TokenId i = 0; i < 8; ++i) {
    for (TokenId j = 0; j < 8; ++j) CHECK(psi(back.model, i, j) == psi(model, i, j));
  }
  std::filesystem::remove_all(dir);
}
