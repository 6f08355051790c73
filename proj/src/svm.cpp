#include "marginforge/svm.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace mf {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

double kernel_value(const KernelSpec& kernel, const Eigen::VectorXd& a,
                    const Eigen::VectorXd& b) {
  switch (kernel.kind) {
    case KernelKind::kLinear:
      return a.dot(b);
    case KernelKind::kPolynomial:
      require(kernel.order >= 1, "kernel: polynomial order must be >= 1");
      return std::pow(1.0 + a.dot(b), kernel.order);
    case KernelKind::kRbf:
      require(kernel.width > 0.0, "kernel: rbf width must be positive");
      return std::exp(-(a - b).squaredNorm() /
                      (2.0 * kernel.width * kernel.width));
  }
  throw std::logic_error("kernel_value: unreachable");
}

Eigen::MatrixXd kernel_matrix(const std::vector<Eigen::VectorXd>& points,
                              const KernelSpec& kernel) {
  const Index n = static_cast<Index>(points.size());
  require(n >= 1, "kernel_matrix: need at least one point");
  for (const auto& p : points) {
    require(p.size() == points.front().size(),
            "kernel_matrix: inconsistent point dimensions");
  }
  Eigen::MatrixXd K(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      K(i, j) = K(j, i) = kernel_value(kernel, points[i], points[j]);
    }
  }
  return K;
}

Eigen::MatrixXd assemble_F(const Eigen::MatrixXd& K, double gamma) {
  require(K.rows() == K.cols(), "assemble_F: K must be square");
  require(gamma > 0.0, "assemble_F: gamma must be positive");
  const Index n = K.rows();
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(n + 1, n + 1);
  F.block(0, 1, 1, n).setOnes();
  F.block(1, 0, n, 1).setOnes();
  F.block(1, 1, n, n) =
      K + Eigen::MatrixXd::Identity(n, n) / gamma;
  return F;
}

SvmSolution solve_lssvm(const Eigen::MatrixXd& F, const Eigen::VectorXd& y,
                        double gamma) {
  const Index n = F.rows() - 1;
  require(F.rows() == F.cols() && n >= 1, "solve_lssvm: bad system size");
  require(y.size() == n, "solve_lssvm: label count must match system");

  Eigen::VectorXd rhs(n + 1);
  rhs[0] = 0.0;
  rhs.tail(n) = y;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(F);
  if (!qr.isInvertible()) {
    throw std::invalid_argument("solve_lssvm: singular system");
  }
  Eigen::VectorXd sol = qr.solve(rhs);
  // Iterative refinement: the bordered system is ill-conditioned in the
  // hard-margin regime and a raw factorization can sit just above tolerance.
  // Each step contracts the error until the floating-point floor; stop on
  // stagnation.
  double residual = (F * sol - rhs).norm();
  for (int step = 0; step < 4 && residual > kSolveResidualTol; ++step) {
    const Eigen::VectorXd refined = sol + qr.solve(rhs - F * sol);
    const double next = (F * refined - rhs).norm();
    if (!(next < residual)) break;
    sol = refined;
    residual = next;
  }
  if (!(residual <= kSolveResidualTol)) {
    throw std::runtime_error("solve_lssvm: residual " +
                             std::to_string(residual) + " above tolerance");
  }

  SvmSolution out;
  out.b = sol[0];
  out.alpha = sol.tail(n);
  out.gamma = gamma;
  out.solution_norm = sol.norm();
  return out;
}

WeightVector weight_vector(const SvmSolution& sol,
                           const std::vector<Eigen::VectorXd>& points) {
  require(static_cast<Index>(points.size()) == sol.alpha.size(),
          "weight_vector: point/alpha count mismatch");
  require(!points.empty(), "weight_vector: no points");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(points.front().size());
  for (Index i = 0; i < sol.alpha.size(); ++i) {
    w += sol.alpha[i] * points[static_cast<std::size_t>(i)];
  }
  WeightVector out;
  out.w = std::move(w);
  out.norm = out.w.norm();
  if (out.norm == 0.0) {
    throw std::runtime_error("weight_vector: degenerate fit, |w| = 0");
  }
  out.margin = 1.0 / out.norm;
  return out;
}

double weight_norm_kernel(const SvmSolution& sol, const Eigen::MatrixXd& K) {
  require(K.rows() == sol.alpha.size() && K.cols() == sol.alpha.size(),
          "weight_norm_kernel: K size mismatch");
  const double sq = sol.alpha.dot(K * sol.alpha);
  if (sq <= 0.0) {
    throw std::runtime_error("weight_norm_kernel: degenerate fit, |w| = 0");
  }
  return std::sqrt(sq);
}

double tilde_inner(const SvmSolution& sol,
                   const std::vector<Eigen::VectorXd>& points,
                   const Eigen::VectorXd& x) {
  require(static_cast<Index>(points.size()) == sol.alpha.size(),
          "tilde_inner: point/alpha count mismatch");
  // The augmented vectors (b, a_1 x_1, ...) and (1, x, ..., x) both carry a
  // bias slot, so a zero raw point (the origin) stays perfectly well-formed;
  // only an all-zero solution state is degenerate (checked below).
  double dot = sol.b;
  double nu = sol.b * sol.b;
  for (Index i = 0; i < sol.alpha.size(); ++i) {
    const auto& xi = points[static_cast<std::size_t>(i)];
    dot += sol.alpha[i] * xi.dot(x);
    nu += sol.alpha[i] * sol.alpha[i] * xi.squaredNorm();
  }
  const double nx =
      1.0 + static_cast<double>(points.size()) * x.squaredNorm();
  if (nu == 0.0) {
    throw std::runtime_error("tilde_inner: degenerate solution state");
  }
  const double inner = dot / std::sqrt(nu * nx);
  return std::clamp(inner, -1.0, 1.0);
}

double membership_probability(double inner, const Activation& act) {
  require(inner >= -1.0 - 1e-12 && inner <= 1.0 + 1e-12,
          "membership_probability: inner product outside [-1, 1]");
  const double p = 0.5 * (1.0 - inner);
  switch (act.kind) {
    case ActivationKind::kLinearClip:
      return std::clamp(p, 0.0, 1.0);
    case ActivationKind::kSigmoid:
      require(act.scale > 0.0, "membership_probability: scale must be > 0");
      return 1.0 / (1.0 + std::exp(-act.scale * (2.0 * p - 1.0)));
  }
  throw std::logic_error("membership_probability: unreachable");
}

FittedSvm fit_lssvm(const LabeledDataset& ds, const KernelSpec& kernel,
                    double gamma, double tau) {
  FittedSvm fit;
  std::vector<double> labels;
  for (const auto& pt : ds.points) {
    if (auto cls = hard_membership(pt.c, tau)) {
      fit.points.push_back(pt.x);
      labels.push_back(hard_label_sign(*cls));
    }
  }
  require(!fit.points.empty(), "fit_lssvm: no hard-labeled points");
  fit.y = Eigen::Map<const Eigen::VectorXd>(labels.data(),
                                            static_cast<Index>(labels.size()));
  fit.K = kernel_matrix(fit.points, kernel);
  fit.F = assemble_F(fit.K, gamma);
  fit.solution = solve_lssvm(fit.F, fit.y, gamma);
  return fit;
}

}  // namespace mf
