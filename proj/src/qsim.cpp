#include "marginforge/qsim.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mf {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(Index n) { return n >= 1 && (n & (n - 1)) == 0; }

int log2_exact(Index n) {
  int q = 0;
  while ((Index{1} << q) < n) ++q;
  return q;
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

QState::QState(Eigen::VectorXcd amplitudes) : amps_(std::move(amplitudes)) {
  require(is_pow2(amps_.size()),
          "state dimension must be a power of two, got " +
              std::to_string(amps_.size()));
  const double norm = amps_.norm();
  require(std::abs(norm - 1.0) <= kStateNormTol,
          "state norm deviates from 1 by more than the tolerance: norm = " +
              std::to_string(norm));
  qubits_ = log2_exact(amps_.size());
}

PreparedState prepare_amplitude_state(const Eigen::VectorXcd& v) {
  require(v.size() > 0, "cannot prepare a state from an empty vector");
  const double norm = v.norm();
  require(norm > 0.0, "cannot prepare a state from the zero vector");
  Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(next_pow2(v.size()));
  amps.head(v.size()) = v / norm;
  return PreparedState{QState(std::move(amps)), norm};
}

PreparedState prepare_amplitude_state(const Eigen::VectorXd& v) {
  return prepare_amplitude_state(Eigen::VectorXcd(v.cast<Complex>()));
}

DensityState::DensityState(Eigen::MatrixXcd rho) : rho_(std::move(rho)) {
  require(rho_.rows() == rho_.cols(), "density matrix must be square");
  require(rho_.rows() >= 1, "density matrix must be nonempty");
  const double scale = std::max(1.0, rho_.cwiseAbs().maxCoeff());
  require((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() <= kDensityTol * scale,
          "density matrix must be Hermitian");
  require(std::abs(rho_.trace() - Complex(1.0, 0.0)) <= kDensityTol * scale,
          "density matrix must have unit trace");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho_,
                                                     Eigen::EigenvaluesOnly);
  require(es.eigenvalues().minCoeff() >= -kDensityTol * scale,
          "density matrix must be positive semidefinite");
}

DensityState DensityState::from_pure(const QState& psi) {
  const Eigen::VectorXcd& a = psi.amplitudes();
  return DensityState(a * a.adjoint());
}

double swap_test_probability(const QState& u, const QState& x) {
  require(u.dim() == x.dim(),
          "interference test requires states of equal dimension");
  // Joint register (|0>|u> + |1>|x>)/sqrt(2); a Hadamard on the ancilla turns
  // the |1> block into (u - x)/2, whose squared norm is the read-1 chance.
  const Index d = u.dim();
  Eigen::VectorXcd joint(2 * d);
  joint.head(d) = (u.amplitudes() + x.amplitudes()) / 2.0;
  joint.tail(d) = (u.amplitudes() - x.amplitudes()) / 2.0;
  return joint.tail(d).squaredNorm();
}

DensityState density_exponentiation_step(const DensityState& rho,
                                         const DensityState& sigma,
                                         double dt) {
  require(rho.dim() == sigma.dim(),
          "density-exponentiation factors must share a dimension");
  const double c = std::cos(dt);
  const double s = std::sin(dt);
  const Eigen::MatrixXcd& r = rho.matrix();
  const Eigen::MatrixXcd& g = sigma.matrix();
  const Eigen::MatrixXcd commutator = r * g - g * r;
  Eigen::MatrixXcd out =
      c * c * g - Complex(0.0, 1.0) * c * s * commutator + s * s * r;
  return DensityState(std::move(out));
}

HhlResult hhl_solve(const Eigen::MatrixXd& F, const Eigen::VectorXd& y,
                    double kappa_eff, int eig_bits) {
  require(F.rows() == F.cols(), "matrix must be square");
  require(F.rows() == y.size(), "right-hand side length must match matrix");
  const double scale = std::max(1.0, F.cwiseAbs().maxCoeff());
  require((F - F.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
          "matrix must be symmetric");
  require(kappa_eff > 1.0, "condition cutoff must exceed 1");
  require(eig_bits >= 1 && eig_bits <= 52,
          "phase register must hold between 1 and 52 fractional bits");
  const double y_norm = y.norm();
  require(y_norm > 0.0, "right-hand side must be nonzero");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(F);
  require(es.info() == Eigen::Success, "eigendecomposition failed");
  const Eigen::VectorXd& lambda = es.eigenvalues();
  require(lambda.cwiseAbs().maxCoeff() <= 1.0 + 1e-9,
          "spectral radius exceeds 1; rescale the matrix first");

  const double grid = std::ldexp(1.0, eig_bits);  // 2^eig_bits
  const Eigen::VectorXd beta = es.eigenvectors().transpose() * y;

  Eigen::VectorXd solution = Eigen::VectorXd::Zero(F.rows());
  double p1 = 0.0;
  for (Index j = 0; j < lambda.size(); ++j) {
    const double rounded = std::round(lambda[j] * grid) / grid;
    if (std::abs(rounded) < 1.0 / kappa_eff) continue;  // filtered out
    const double amp = beta[j] / (rounded * kappa_eff);
    p1 += (amp / y_norm) * (amp / y_norm);
    solution += (beta[j] / rounded) * es.eigenvectors().col(j);
  }
  const double sol_norm = solution.norm();
  require(sol_norm > 0.0,
          "every spectral component fell below the condition cutoff");

  PreparedState prepared = prepare_amplitude_state(solution);
  return HhlResult{std::move(prepared.state), F.rows(), p1,
                   kappa_eff * y_norm * std::sqrt(p1)};
}

Eigen::MatrixXd hermitian_embed(const Eigen::MatrixXd& A) {
  const Index m = A.rows();
  const Index n = A.cols();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m + n, m + n);
  M.topRightCorner(n, m) = A.transpose();
  M.bottomLeftCorner(m, n) = A;
  return M;
}

namespace {

void validate_walk_context(const WalkContext& ctx) {
  const Eigen::MatrixXd& M = ctx.M;
  require(M.rows() == M.cols(), "walk matrix must be square");
  require(M.rows() >= 1, "walk matrix must be nonempty");
  require(ctx.n_bar == M.rows(), "recorded dimension must match the matrix");
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  require((M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
          "walk matrix must be symmetric");
  require(M.diagonal().cwiseAbs().maxCoeff() <= 1e-14 * scale,
          "walk matrix must have a zero diagonal");
  require(ctx.d >= 1, "sparsity bound must be positive");
  require(ctx.s > 0.0, "entry rescaling must be positive");
  for (Index j = 0; j < M.rows(); ++j) {
    Index nonzeros = 0;
    for (Index k = 0; k < M.cols(); ++k) {
      if (M(j, k) != 0.0) ++nonzeros;
    }
    require(nonzeros <= ctx.d, "row " + std::to_string(j) + " has " +
                                   std::to_string(nonzeros) +
                                   " nonzeros, more than the sparsity bound " +
                                   std::to_string(ctx.d));
  }
  require(ctx.s * M.cwiseAbs().maxCoeff() <= 1.0 / ctx.d + 1e-12,
          "rescaled entries exceed 1/d; lower s or raise d");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ctx.s * M,
                                                    Eigen::EigenvaluesOnly);
  require(es.eigenvalues().cwiseAbs().maxCoeff() < 1.0,
          "eigenvalues of the rescaled matrix must lie strictly inside "
          "(-1, 1)");
}

}  // namespace

WalkContext make_walk_context(const Eigen::MatrixXd& M, int d, double s) {
  WalkContext ctx{M, M.rows(), d, s};
  validate_walk_context(ctx);
  return ctx;
}

WalkContext make_walk_context(const Eigen::MatrixXd& M) {
  const int d = static_cast<int>(M.rows());
  const double max_entry = M.cwiseAbs().maxCoeff();
  const double s = max_entry > 0.0 ? 1.0 / (d * max_entry) : 1.0;
  return make_walk_context(M, d, s);
}

ChebyshevResult chebyshev_apply(const WalkContext& ctx,
                                const Eigen::VectorXd& psi) {
  validate_walk_context(ctx);
  const Index n = ctx.n_bar;
  require(psi.size() == n, "input dimension must match the walk matrix");
  require(std::abs(psi.norm() - 1.0) <= 1e-9, "input must be a unit vector");

  // Isometry T|j> = |psi_j> with
  //   |psi_j> = (1/sqrt(d)) sum_k ( f_jk |j>|k> + sqrt(1-|A_jk|) |j>|k+n> ),
  // A = s M, f_jk = sqrt(conj(A_jk)) for j <= k and A_jk / conj(f_kj) for the
  // mirrored entry, so that <psi_j| SWAP |psi_k> = A_jk / d even when the
  // square root's principal branch would flip the sign of a negative entry.
  // Both registers live in dimension 2n so the swap is a plain permutation.
  const Index reg = 2 * n;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(ctx.d));
  Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index k = j + 1; k < n; ++k) {
      const double a = ctx.s * ctx.M(j, k);
      if (a == 0.0) continue;
      f(j, k) = std::sqrt(Complex(a, 0.0));
      f(k, j) = Complex(a, 0.0) / std::conj(f(j, k));
    }
  }
  // Each nonzero slot k contributes |A_jk| + (1 - |A_jk|) = 1 to the row
  // weight; rows with fewer than d nonzeros make up the difference with
  // flag-one amplitude on unused slots, lumped into a single slot per row.
  Eigen::VectorXd pad_weight = Eigen::VectorXd::Zero(n);
  for (Index j = 0; j < n; ++j) {
    Index nonzeros = 0;
    for (Index k = 0; k < n; ++k) {
      if (ctx.M(j, k) != 0.0) ++nonzeros;
    }
    pad_weight[j] = static_cast<double>(ctx.d - nonzeros);
  }

  // T maps |j> into span{|j,k>, |j,k+n>, |j,pad_j>}; store columns densely in
  // the reg*reg joint space, with one extra slot per row for the lumped pad.
  Eigen::MatrixXcd T = Eigen::MatrixXcd::Zero(reg * reg, n);
  for (Index j = 0; j < n; ++j) {
    for (Index k = 0; k < n; ++k) {
      const double a = ctx.s * ctx.M(j, k);
      if (a != 0.0) {
        T(j * reg + k, j) = inv_sqrt_d * f(j, k);
        T(j * reg + (k + n), j) =
            inv_sqrt_d * std::sqrt(std::max(0.0, 1.0 - std::abs(a)));
      }
    }
    if (pad_weight[j] > 0.0) {
      // Use the row's own flag-one slot |j, j+n> (free: M_jj = 0).
      T(j * reg + (j + n), j) += inv_sqrt_d * std::sqrt(pad_weight[j]);
    }
  }

  const Eigen::VectorXcd walked_in = T * psi.cast<Complex>();
  Eigen::VectorXcd walked(reg * reg);
  for (Index a = 0; a < reg; ++a) {
    for (Index b = 0; b < reg; ++b) {
      walked[b * reg + a] = walked_in[a * reg + b];  // register swap
    }
  }
  const Eigen::VectorXcd block = T.adjoint() * walked;
  const double a0 = block.norm();
  const double orthogonal = (walked - T * block).norm();

  Eigen::VectorXd flag_zero(n);
  for (Index j = 0; j < n; ++j) flag_zero[j] = block[j].real();

  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(next_pow2(n + 1));
  out.head(n) = block;
  out[n] = Complex(orthogonal, 0.0);
  return ChebyshevResult{QState(std::move(out)), std::move(flag_zero), a0,
                         orthogonal};
}

LcuResult lcu_apply(const Eigen::VectorXd& coeffs,
                    const std::vector<Eigen::MatrixXcd>& unitaries,
                    const Eigen::VectorXcd& v) {
  const Index L = coeffs.size();
  require(L >= 1, "need at least one term");
  require(static_cast<Index>(unitaries.size()) == L,
          "coefficient and unitary counts must match");
  const double coeff_norm = coeffs.norm();
  require(coeff_norm > 0.0, "coefficients must not all vanish");
  const Index dim = v.size();
  require(std::abs(v.norm() - 1.0) <= 1e-9, "input must be a unit vector");
  for (const Eigen::MatrixXcd& U : unitaries) {
    require(U.rows() == dim && U.cols() == dim,
            "unitary dimensions must match the input vector");
    require((U.adjoint() * U - Eigen::MatrixXcd::Identity(dim, dim))
                .cwiseAbs()
                .maxCoeff() <= 1e-9,
            "term operators must be unitary");
  }

  const Index reg = next_pow2(L);
  // Prepare sum_i (alpha_i / |alpha|) |i> U_i |v>, then Hadamard the index
  // register; the |0...0> block carries M v / (sqrt(reg) |alpha|).
  Eigen::VectorXcd joint = Eigen::VectorXcd::Zero(reg * dim);
  for (Index i = 0; i < L; ++i) {
    joint.segment(i * dim, dim) = (coeffs[i] / coeff_norm) * (unitaries[i] * v);
  }
  const double inv_sqrt_reg = 1.0 / std::sqrt(static_cast<double>(reg));
  Eigen::VectorXcd mixed = Eigen::VectorXcd::Zero(reg * dim);
  for (Index out = 0; out < reg; ++out) {
    for (Index in = 0; in < reg; ++in) {
      // Hadamard tensor power: entry (-1)^{popcount(out & in)} / sqrt(reg).
      const int sign =
          std::popcount(static_cast<unsigned long long>(out & in)) & 1 ? -1
                                                                       : 1;
      mixed.segment(out * dim, dim) += static_cast<double>(sign) *
                                       inv_sqrt_reg *
                                       joint.segment(in * dim, dim);
    }
  }

  Eigen::VectorXcd block = mixed.head(dim);
  const double p0 = block.squaredNorm();
  const double a0 = block.norm() * std::sqrt(static_cast<double>(reg));

  Eigen::VectorXcd padded = Eigen::VectorXcd::Zero(next_pow2(reg * dim));
  padded.head(reg * dim) = mixed;
  return LcuResult{QState(std::move(padded)), std::move(block), a0, p0, reg};
}

double recover_norm_lcu(double a0, double v_norm,
                        const Eigen::VectorXd& coeffs) {
  return a0 * v_norm * coeffs.norm();
}

double recover_norm_chebyshev(double a0, double v_norm,
                              const WalkContext& ctx) {
  return a0 * v_norm * static_cast<double>(ctx.d) / ctx.s;
}

double ae_error_bound(double a, int J, int k) {
  require(J >= 2, "grid size must be at least 2");
  require(k >= 1, "confidence multiple must be positive");
  const double dj = static_cast<double>(J);
  return 2.0 * kPi * k * std::sqrt(a * (1.0 - a)) / dj +
         k * k * kPi * kPi / (dj * dj);
}

namespace {

// Squared Fejer-like phase kernel sin^2(J pi delta) / (J sin(pi delta))^2,
// continued to 1 at integer delta.
double phase_kernel(double delta, int J) {
  const double frac = delta - std::round(delta);
  const double s = std::sin(kPi * frac);
  if (std::abs(s) < 1e-15) return 1.0;
  const double num = std::sin(static_cast<double>(J) * kPi * frac);
  const double ratio = num / (static_cast<double>(J) * s);
  return ratio * ratio;
}

double sample_from_pmf(const Eigen::VectorXd& pmf, RngStream& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (Index i = 0; i < pmf.size(); ++i) {
    acc += pmf[i];
    if (u < acc) return static_cast<double>(i);
  }
  return static_cast<double>(pmf.size() - 1);
}

double grid_estimate_from_outcome(double y, int J) {
  const double v = std::sin(kPi * y / static_cast<double>(J));
  return v * v;
}

Eigen::VectorXd full_grover_distribution(double a, int J) {
  const double theta = std::asin(std::sqrt(a));
  // Index register ++ two-dimensional rotation subspace: after y iterations
  // the system lies at angle (2y+1) theta; an inverse Fourier transform on
  // the index register produces the measured outcome distribution.
  Eigen::VectorXd pmf(J);
  const double inv_j = 1.0 / static_cast<double>(J);
  for (int m = 0; m < J; ++m) {
    Complex good(0.0, 0.0);
    Complex bad(0.0, 0.0);
    for (int y = 0; y < J; ++y) {
      const double ang = -2.0 * kPi * m * y * inv_j;
      const Complex tw(std::cos(ang), std::sin(ang));
      const double phase = (2.0 * y + 1.0) * theta;
      good += tw * std::sin(phase);
      bad += tw * std::cos(phase);
    }
    good *= inv_j;
    bad *= inv_j;
    pmf[m] = std::norm(good) + std::norm(bad);
  }
  pmf /= pmf.sum();
  return pmf;
}

}  // namespace

Eigen::VectorXd ae_outcome_distribution(double a, int J) {
  require(a >= 0.0 && a <= 1.0, "probability must lie in [0, 1]");
  require(J >= 2, "grid size must be at least 2");
  const double phi = std::asin(std::sqrt(a)) / kPi;  // in [0, 1/2]
  Eigen::VectorXd pmf(J);
  for (int y = 0; y < J; ++y) {
    const double frac = static_cast<double>(y) / static_cast<double>(J);
    pmf[y] = 0.5 * (phase_kernel(frac - phi, J) + phase_kernel(frac + phi, J));
  }
  pmf /= pmf.sum();
  return pmf;
}

double amplitude_estimate(double marked_probability, const AEConfig& cfg,
                          RngStream* rng) {
  require(marked_probability >= 0.0 && marked_probability <= 1.0,
          "probability must lie in [0, 1]");
  require(cfg.J >= 2, "grid size must be at least 2");
  require(cfg.k >= 1, "confidence multiple must be positive");
  require(cfg.beta >= 1 && cfg.beta % 2 == 1,
          "median repetitions must be odd");

  if (cfg.mode == AeMode::kGrid) {
    const double theta = std::asin(std::sqrt(marked_probability));
    const double y = std::round(static_cast<double>(cfg.J) * theta / kPi);
    return grid_estimate_from_outcome(y, cfg.J);
  }

  require(rng != nullptr, "sampling modes need a random stream");
  Eigen::VectorXd pmf;
  if (cfg.mode == AeMode::kStochastic) {
    pmf = ae_outcome_distribution(marked_probability, cfg.J);
  } else {
    require(cfg.J <= 1024, "explicit register mode is capped at J = 1024");
    require(is_pow2(cfg.J), "explicit register mode needs a power-of-two J");
    pmf = full_grover_distribution(marked_probability, cfg.J);
  }
  std::vector<double> estimates;
  estimates.reserve(cfg.beta);
  for (int r = 0; r < cfg.beta; ++r) {
    const double y = sample_from_pmf(pmf, *rng);
    estimates.push_back(grid_estimate_from_outcome(y, cfg.J));
  }
  return median_amplify(std::move(estimates));
}

double median_amplify(std::vector<double> estimates) {
  require(!estimates.empty() && estimates.size() % 2 == 1,
          "median amplification needs an odd number of estimates");
  const auto mid = estimates.begin() + static_cast<std::ptrdiff_t>(estimates.size() / 2);
  std::nth_element(estimates.begin(), mid, estimates.end());
  return *mid;
}

}  // namespace mf
