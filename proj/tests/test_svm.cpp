// Kernel matrices, the bordered least-squares solve, weight vectors, and the
// overlap-based membership probability.
//
// Oracles: hand-assembled matrices, closed-form solutions of tiny systems,
// and brute-force dot products computed inline, independent of the library
// paths under test.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <vector>

#include "marginforge/core_data.hpp"
#include "marginforge/rng.hpp"
#include "marginforge/svm.hpp"

using namespace mf;

namespace {

Eigen::VectorXd vec1(double a) {
  Eigen::VectorXd v(1);
  v << a;
  return v;
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

std::vector<Eigen::VectorXd> random_points(Index n, Index m, RngStream& rng) {
  std::vector<Eigen::VectorXd> pts;
  for (Index i = 0; i < n; ++i) {
    Eigen::VectorXd x(m);
    for (Index j = 0; j < m; ++j) x[j] = rng.normal();
    pts.push_back(std::move(x));
  }
  return pts;
}

// The two-point symmetric instance used throughout: x = +-1, labels +-1.
struct TinyInstance {
  std::vector<Eigen::VectorXd> points{vec1(1.0), vec1(-1.0)};
  Eigen::VectorXd y = vec2(1.0, -1.0);
};

}  // namespace

TEST_CASE("linear kernel of the +-1 pair is the hand Gram matrix") {
  TinyInstance t;
  const Eigen::MatrixXd K = kernel_matrix(t.points);
  REQUIRE(K.rows() == 2);
  CHECK(K(0, 0) == doctest::Approx(1.0));
  CHECK(K(0, 1) == doctest::Approx(-1.0));
  CHECK(K(1, 0) == doctest::Approx(-1.0));
  CHECK(K(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("duplicated points give a rank-one kernel matrix") {
  std::vector<Eigen::VectorXd> pts{vec2(1.0, 2.0), vec2(1.0, 2.0),
                                   vec2(1.0, 2.0)};
  const Eigen::MatrixXd K = kernel_matrix(pts);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(K);
  int positive = 0;
  for (Index i = 0; i < eig.eigenvalues().size(); ++i) {
    if (eig.eigenvalues()[i] > 1e-9) ++positive;
    CHECK(eig.eigenvalues()[i] >= -1e-9);
  }
  CHECK(positive == 1);
}

TEST_CASE("kernel matrices match brute-force kernel values and stay PSD") {
  RngStream rng(42);
  for (int rep = 0; rep < 10; ++rep) {
    const auto pts = random_points(6, 3, rng);
    for (const KernelSpec spec :
         {KernelSpec{KernelKind::kLinear, 2, 1.0},
          KernelSpec{KernelKind::kPolynomial, 3, 1.0},
          KernelSpec{KernelKind::kRbf, 2, 0.7}}) {
      const Eigen::MatrixXd K = kernel_matrix(pts, spec);
      CHECK((K - K.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
      for (Index i = 0; i < 6; ++i) {
        for (Index j = 0; j < 6; ++j) {
          double want = 0.0;
          const double dot = pts[i].dot(pts[j]);
          switch (spec.kind) {
            case KernelKind::kLinear:
              want = dot;
              break;
            case KernelKind::kPolynomial:
              want = std::pow(1.0 + dot, spec.order);
              break;
            case KernelKind::kRbf:
              want = std::exp(-(pts[i] - pts[j]).squaredNorm() /
                              (2.0 * spec.width * spec.width));
              break;
          }
          CHECK(K(i, j) == doctest::Approx(want).epsilon(1e-12));
        }
      }
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(K);
      CHECK(eig.eigenvalues().minCoeff() >= -1e-9);
    }
  }
}

TEST_CASE("bordered system assembly matches the hand matrix at gamma 1") {
  TinyInstance t;
  const Eigen::MatrixXd F = assemble_F(kernel_matrix(t.points), 1.0);
  Eigen::MatrixXd want(3, 3);
  want << 0, 1, 1, 1, 2, -1, 1, -1, 2;
  CHECK((F - want).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("huge gamma leaves the kernel block untouched") {
  RngStream rng(7);
  const auto pts = random_points(4, 2, rng);
  const Eigen::MatrixXd K = kernel_matrix(pts);
  const Eigen::MatrixXd F = assemble_F(K, 1e15);
  CHECK((F.bottomRightCorner(4, 4) - K).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(F(0, 0) == 0.0);
  for (Index i = 1; i <= 4; ++i) {
    CHECK(F(0, i) == 1.0);
    CHECK(F(i, 0) == 1.0);
  }
}

TEST_CASE("assembled systems are symmetric for random inputs") {
  RngStream rng(19);
  for (int rep = 0; rep < 5; ++rep) {
    const auto pts = random_points(5, 3, rng);
    const Eigen::MatrixXd F = assemble_F(kernel_matrix(pts), 2.5);
    CHECK((F - F.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK_THROWS_AS(assemble_F(Eigen::MatrixXd::Identity(2, 2), 0.0),
                  std::invalid_argument);
}

TEST_CASE("hard-margin limit of the +-1 pair: b 0, alpha (+-1/2), w (1)") {
  TinyInstance t;
  const Eigen::MatrixXd F = assemble_F(kernel_matrix(t.points), 1e9);
  const SvmSolution sol = solve_lssvm(F, t.y, 1e9);
  CHECK(sol.b == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(sol.alpha[0] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(sol.alpha[1] == doctest::Approx(-0.5).epsilon(1e-8));
  CHECK(sol.solution_norm ==
        doctest::Approx(std::sqrt(0.5)).epsilon(1e-8));

  const WeightVector w = weight_vector(sol, t.points);
  CHECK(w.w[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(w.norm == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(w.margin == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(w.margin * w.norm == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("negating the labels negates bias and multipliers") {
  RngStream rng(5);
  const auto pts = random_points(6, 2, rng);
  Eigen::VectorXd y(6);
  y << 1, 1, -1, 1, -1, -1;
  const Eigen::MatrixXd F = assemble_F(kernel_matrix(pts), 100.0);
  const SvmSolution plus = solve_lssvm(F, y, 100.0);
  const SvmSolution minus = solve_lssvm(F, -y, 100.0);
  CHECK(minus.b == doctest::Approx(-plus.b).epsilon(1e-9));
  for (Index i = 0; i < 6; ++i) {
    CHECK(minus.alpha[i] == doctest::Approx(-plus.alpha[i]).epsilon(1e-9));
  }
}

TEST_CASE("permuting the training points permutes the multipliers") {
  RngStream rng(31);
  const auto pts = random_points(5, 3, rng);
  Eigen::VectorXd y(5);
  y << 1, -1, 1, -1, 1;
  const std::vector<Index> perm{3, 0, 4, 1, 2};
  std::vector<Eigen::VectorXd> pts_p;
  Eigen::VectorXd y_p(5);
  for (Index i = 0; i < 5; ++i) {
    pts_p.push_back(pts[static_cast<size_t>(perm[i])]);
    y_p[i] = y[perm[i]];
  }
  const SvmSolution a =
      solve_lssvm(assemble_F(kernel_matrix(pts), 50.0), y, 50.0);
  const SvmSolution b =
      solve_lssvm(assemble_F(kernel_matrix(pts_p), 50.0), y_p, 50.0);
  CHECK(b.b == doctest::Approx(a.b).epsilon(1e-9));
  for (Index i = 0; i < 5; ++i) {
    CHECK(b.alpha[i] == doctest::Approx(a.alpha[perm[i]]).epsilon(1e-8));
  }
}

TEST_CASE("solver residual stays at refinement level on 1000 random systems") {
  // Moderate slack penalties with arbitrary labels, plus the hard-margin
  // penalty on exactly fittable geometry (its intended regime: there the
  // multipliers stay bounded, since alpha = gamma * residual and the optimum
  // has zero residuals).
  RngStream rng(99);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.uniform_int(31));  // 2..32
    Eigen::VectorXd y(n);
    std::vector<Eigen::VectorXd> pts;
    double gamma = 0.0;
    if (rep % 3 == 0) {
      // Hard margin on two parallel clusters: exact interpolation exists.
      gamma = 1e6;
      for (Index i = 0; i < n; ++i) {
        const bool one = i < n / 2;
        Eigen::VectorXd x(2);
        x << rng.uniform(), one ? 1.0 : 0.0;
        pts.push_back(std::move(x));
        y[i] = one ? -1.0 : 1.0;
      }
    } else {
      gamma = rep % 3 == 1 ? 1.0 : 1e3;
      pts = random_points(n, 1 + static_cast<Index>(rng.uniform_int(4)), rng);
      bool saw[2] = {false, false};
      for (Index i = 0; i < n; ++i) {
        const bool one = rng.bernoulli(0.5);
        y[i] = one ? 1.0 : -1.0;
        saw[one] = true;
      }
      if (!saw[0] || !saw[1]) y[0] = -y[0];
    }
    const Eigen::MatrixXd F = assemble_F(kernel_matrix(pts), gamma);
    const SvmSolution sol = solve_lssvm(F, y, gamma);
    Eigen::VectorXd ba(n + 1);
    ba[0] = sol.b;
    ba.tail(n) = sol.alpha;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    rhs.tail(n) = y;
    worst = std::max(worst, (F * ba - rhs).norm());
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("weight vector is the multiplier-weighted point sum") {
  SvmSolution sol;
  sol.b = 0.0;
  sol.alpha = vec2(0.5, -0.5);
  const std::vector<Eigen::VectorXd> pts{vec1(1.0), vec1(-1.0)};
  const WeightVector w = weight_vector(sol, pts);
  CHECK(w.w[0] == doctest::Approx(1.0));
  CHECK(w.margin == doctest::Approx(1.0));

  SvmSolution zero;
  zero.b = 0.3;
  zero.alpha = vec2(0.0, 0.0);
  CHECK_THROWS(weight_vector(zero, pts));

  SvmSolution scaled;
  scaled.alpha = 3.0 * sol.alpha;
  const WeightVector w3 = weight_vector(scaled, pts);
  CHECK(w3.norm == doctest::Approx(3.0 * w.norm).epsilon(1e-12));
}

TEST_CASE("feature-space weight norm agrees with the input-space norm for a linear kernel") {
  RngStream rng(3);
  const auto pts = random_points(6, 2, rng);
  Eigen::VectorXd y(6);
  y << 1, -1, -1, 1, 1, -1;
  const Eigen::MatrixXd K = kernel_matrix(pts);
  const SvmSolution sol = solve_lssvm(assemble_F(K, 10.0), y, 10.0);
  const WeightVector w = weight_vector(sol, pts);
  CHECK(weight_norm_kernel(sol, K) == doctest::Approx(w.norm).epsilon(1e-9));
}

TEST_CASE("overlap of the +-1 solution with the unit query is 1/sqrt(1.5)") {
  SvmSolution sol;
  sol.b = 0.0;
  sol.alpha = vec2(0.5, -0.5);
  const std::vector<Eigen::VectorXd> pts{vec1(1.0), vec1(-1.0)};
  // numerator 0.5*1 - 0.5*(-1) = 1; N_u = 0.5; N_x = 1 + 2*1 = 3.
  CHECK(tilde_inner(sol, pts, vec1(1.0)) ==
        doctest::Approx(0.8164965809277261).epsilon(1e-12));
  CHECK(tilde_inner(sol, pts, vec1(-1.0)) ==
        doctest::Approx(-0.8164965809277261).epsilon(1e-12));
}

TEST_CASE("zero bias and an orthogonal query give zero overlap") {
  SvmSolution sol;
  sol.b = 0.0;
  sol.alpha = vec2(0.5, -0.5);
  const std::vector<Eigen::VectorXd> pts{vec2(1.0, 0.0), vec2(-1.0, 0.0)};
  CHECK(tilde_inner(sol, pts, vec2(0.0, 2.0)) ==
        doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("overlap stays within [-1, 1] on random instances") {
  RngStream rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.uniform_int(6));
    const auto pts = random_points(n, 3, rng);
    Eigen::VectorXd y(n);
    for (Index i = 0; i < n; ++i) y[i] = i % 2 == 0 ? 1.0 : -1.0;
    const SvmSolution sol =
        solve_lssvm(assemble_F(kernel_matrix(pts), 10.0), y, 10.0);
    for (int q = 0; q < 5; ++q) {
      Eigen::VectorXd x(3);
      for (Index j = 0; j < 3; ++j) x[j] = 3.0 * rng.normal();
      const double inner = tilde_inner(sol, pts, x);
      CHECK(inner <= 1.0);
      CHECK(inner >= -1.0);
    }
  }
}

TEST_CASE("a query at the origin is well-formed: its lifted vector keeps the bias slot") {
  SvmSolution sol;
  sol.b = 0.25;
  sol.alpha = vec2(0.5, -0.5);
  const std::vector<Eigen::VectorXd> pts{vec2(1.0, 0.0), vec2(-1.0, 0.0)};
  // At x = 0 the lifted query is (1, 0, ..., 0): overlap = b / sqrt(N_u).
  const double nu = 0.25 * 0.25 + 0.25 + 0.25;
  CHECK(tilde_inner(sol, pts, vec2(0.0, 0.0)) ==
        doctest::Approx(0.25 / std::sqrt(nu)).epsilon(1e-12));

  SvmSolution degenerate;
  degenerate.b = 0.0;
  degenerate.alpha = vec2(0.0, 0.0);
  CHECK_THROWS_AS(tilde_inner(degenerate, pts, vec2(1.0, 1.0)),
                  std::runtime_error);
}

TEST_CASE("clip activation saturates exactly at the overlap endpoints") {
  const Activation clip{ActivationKind::kLinearClip, 1.0};
  CHECK(membership_probability(-1.0, clip) == 1.0);
  CHECK(membership_probability(1.0, clip) == 0.0);
  CHECK(membership_probability(0.0, clip) == 0.5);
  CHECK(membership_probability(0.5, clip) == doctest::Approx(0.25));
}

TEST_CASE("sigmoid activation is 1/2 at the sign boundary and monotone") {
  const Activation sig{ActivationKind::kSigmoid, 1.0};
  CHECK(membership_probability(0.0, sig) == doctest::Approx(0.5));
  double prev = membership_probability(-1.0, sig);
  for (double inner = -0.8; inner <= 1.0; inner += 0.2) {
    const double p = membership_probability(inner, sig);
    CHECK(p < prev);
    prev = p;
  }
  const Activation steep{ActivationKind::kSigmoid, 25.0};
  CHECK(membership_probability(-1.0, steep) > 0.999999);
  CHECK(membership_probability(1.0, steep) < 1e-6);
}

TEST_CASE("overlap sign agrees with the linear decision function on a grid") {
  ManifoldSpec spec;
  spec.samples_per_class = 8;
  spec.seed = 23;
  const LabeledDataset ds = generate_manifold(spec);
  const FittedSvm fit = fit_lssvm(ds);
  const WeightVector w = weight_vector(fit.solution, fit.points);
  RngStream rng(77);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::VectorXd x = vec2(3.0 * rng.normal(), 3.0 * rng.normal());
    const double decision = w.w.dot(x) + fit.solution.b;
    if (std::abs(decision) < 1e-9) continue;
    const double inner = tilde_inner(fit.solution, fit.points, x);
    const double p = membership_probability(inner, Activation{});
    // Positive decision -> overlap positive -> ancilla probability below 1/2.
    CHECK((decision > 0) == (inner > 0));
    CHECK((decision > 0) == (p < 0.5));
  }
}

TEST_CASE("fitting excludes soft points and maps classes to signed labels") {
  LabeledDataset ds;
  ds.dim = 1;
  ds.points.push_back({vec1(1.0), vec2(1.0, 0.0)});
  ds.points.push_back({vec1(-1.0), vec2(0.0, 1.0)});
  ds.points.push_back({vec1(0.0), vec2(0.5, 0.5)});  // no hard class
  const FittedSvm fit = fit_lssvm(ds, KernelSpec{}, 1e9);
  REQUIRE(fit.points.size() == 2);
  CHECK(fit.y[0] == 1.0);
  CHECK(fit.y[1] == -1.0);
  CHECK(fit.solution.alpha[0] == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("duplicating a point of an exactly fittable instance never raises the margin") {
  // The parallel-segment geometry admits an exact interpolation (all residuals
  // zero), so duplicating any point leaves the optimum intact; the margin may
  // only move by solver tolerance.
  ManifoldSpec spec;
  spec.samples_per_class = 6;
  spec.seed = 41;
  const LabeledDataset base = generate_manifold(spec);
  const FittedSvm fit0 = fit_lssvm(base, KernelSpec{}, 1e6);
  const double margin0 =
      weight_vector(fit0.solution, fit0.points).margin;
  for (std::size_t dup = 0; dup < base.points.size(); dup += 3) {
    LabeledDataset ds = base;
    ds.points.push_back(base.points[dup]);
    const FittedSvm fit = fit_lssvm(ds, KernelSpec{}, 1e6);
    const double margin = weight_vector(fit.solution, fit.points).margin;
    CHECK(margin <= margin0 + 1e-6);
  }
}
