#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "marginforge/core_data.hpp"

namespace mf {

enum class KernelKind { kLinear, kPolynomial, kRbf };

struct KernelSpec {
  KernelKind kind = KernelKind::kLinear;
  int order = 2;       // polynomial: (1 + x.y)^order, order >= 1
  double width = 1.0;  // rbf: exp(-|x-y|^2 / (2 width^2)), width > 0
};

double kernel_value(const KernelSpec& kernel, const Eigen::VectorXd& a,
                    const Eigen::VectorXd& b);

// Gram matrix K_{lk} = k(x_l, x_k) for the given points (rows).
Eigen::MatrixXd kernel_matrix(const std::vector<Eigen::VectorXd>& points,
                              const KernelSpec& kernel = {});

// Bordered least-squares system
//   [ 0   1^T        ] [b    ]   [0]
//   [ 1   K + I/gamma] [alpha] = [y]
// Large gamma emulates a hard margin; the default keeps the slack term at
// 1e-6 of the identity.
inline constexpr double kDefaultGamma = 1e6;

Eigen::MatrixXd assemble_F(const Eigen::MatrixXd& K, double gamma);

struct SvmSolution {
  double b = 0.0;
  Eigen::VectorXd alpha;
  double gamma = kDefaultGamma;
  double solution_norm = 0.0;  // ||(b, alpha)||_2
};

// Exact dense solve of F (b, alpha)^T = (0, y)^T. One step of iterative
// refinement keeps the residual at or below kSolveResidualTol even for the
// ill-conditioned hard-margin regime; a residual above it throws.
inline constexpr double kSolveResidualTol = 1e-8;

SvmSolution solve_lssvm(const Eigen::MatrixXd& F, const Eigen::VectorXd& y,
                        double gamma = kDefaultGamma);

struct WeightVector {
  Eigen::VectorXd w;
  double norm = 0.0;
  double margin = 0.0;  // 1 / norm
};

// w = sum_i alpha_i x_i (linear kernel). Throws on an all-zero fit.
WeightVector weight_vector(const SvmSolution& sol,
                           const std::vector<Eigen::VectorXd>& points);

// |w| for a general kernel: sqrt(alpha^T K alpha).
double weight_norm_kernel(const SvmSolution& sol, const Eigen::MatrixXd& K);

// Normalized overlap of the solution state with the query state,
//   <u|x> = (b + sum_k alpha_k (x_k . x)) / sqrt(N_u N_x),
//   N_u = b^2 + sum_k alpha_k^2 |x_k|^2,   N_x = 1 + n |x|^2.
// Always in [-1, 1]. The augmented vectors carry a bias slot, so points at
// the origin are fine; only an all-zero solution state (N_u = 0) is
// degenerate and throws.
double tilde_inner(const SvmSolution& sol,
                   const std::vector<Eigen::VectorXd>& points,
                   const Eigen::VectorXd& x);

// Membership activation applied to P = (1 - inner) / 2, the ancilla-one
// probability of the overlap test. Monotone decreasing in the inner product;
// the sign boundary inner = 0 maps to activation(1/2).
enum class ActivationKind { kLinearClip, kSigmoid };

struct Activation {
  ActivationKind kind = ActivationKind::kLinearClip;
  double scale = 1.0;  // sigmoid steepness
};

double membership_probability(double inner, const Activation& act);

// Convenience fit over a dataset's hard-labeled points (below-threshold
// memberships are treated as unlabeled and excluded).
struct FittedSvm {
  std::vector<Eigen::VectorXd> points;
  Eigen::VectorXd y;  // signed labels, class 0 -> +1, class 1 -> -1
  Eigen::MatrixXd K;
  Eigen::MatrixXd F;
  SvmSolution solution;
};

FittedSvm fit_lssvm(const LabeledDataset& ds, const KernelSpec& kernel = {},
                    double gamma = kDefaultGamma,
                    double tau = kDefaultHardTau);

}  // namespace mf
