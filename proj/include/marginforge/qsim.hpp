#pragma once

#include <Eigen/Core>

#include <complex>
#include <vector>

#include "marginforge/core_data.hpp"
#include "marginforge/rng.hpp"

namespace mf {

using Complex = std::complex<double>;

inline constexpr double kStateNormTol = 1e-10;
inline constexpr double kDensityTol = 1e-10;

inline Index next_pow2(Index n) {
  Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Pure state on q qubits: 2^q amplitudes with unit norm (within
// kStateNormTol; construction rejects anything else).
class QState {
 public:
  explicit QState(Eigen::VectorXcd amplitudes);

  const Eigen::VectorXcd& amplitudes() const { return amps_; }
  int qubits() const { return qubits_; }
  Index dim() const { return amps_.size(); }

 private:
  Eigen::VectorXcd amps_;
  int qubits_ = 0;
};

// Normalizes v (padded with zeros to the next power of two) into a state and
// reports the original norm. Zero vectors are rejected.
struct PreparedState {
  QState state;
  double norm;
};
PreparedState prepare_amplitude_state(const Eigen::VectorXd& v);
PreparedState prepare_amplitude_state(const Eigen::VectorXcd& v);

// Mixed state: Hermitian, positive semidefinite (eigenvalues >= -kDensityTol)
// with unit trace.
class DensityState {
 public:
  explicit DensityState(Eigen::MatrixXcd rho);
  static DensityState from_pure(const QState& psi);

  const Eigen::MatrixXcd& matrix() const { return rho_; }
  Index dim() const { return rho_.rows(); }

 private:
  Eigen::MatrixXcd rho_;
};

// Ancilla-test probability of reading 1 after interfering |u> and |x> on a
// Hadamard ancilla: P = (1 - Re<u|x>) / 2. Simulated by building the joint
// state and measuring, not by shortcutting to the formula.
double swap_test_probability(const QState& u, const QState& x);

// One exact step of density-matrix exponentiation:
//   tr_1( e^{-i dt S} (rho (x) sigma) e^{+i dt S} )
//     = cos^2(dt) sigma - i cos(dt) sin(dt) [rho, sigma] + sin^2(dt) rho,
// the closed form of the partial trace over the first factor (S^2 = I).
DensityState density_exponentiation_step(const DensityState& rho,
                                         const DensityState& sigma, double dt);

// Eigendecomposition-level linear-system solver with phase-register rounding
// and spectral filtering. F must be Hermitian with spectral radius <= 1.
// Eigenvalues are rounded to eig_bits fractional bits; components whose
// rounded magnitude clears 1/kappa_eff are rotated by 1/(lambda kappa_eff),
// everything below is dropped (the low-rank filter). p1 is the postselection
// probability, recovered_norm = kappa_eff * |y| * sqrt(p1).
struct HhlResult {
  QState solution;       // normalized kept component, padded to a register
  Index dim;             // logical dimension before padding
  double p1;             // success probability of the rotation ancilla
  double recovered_norm; // estimate of |F^{-1} y| on the kept subspace
};
HhlResult hhl_solve(const Eigen::MatrixXd& F, const Eigen::VectorXd& y,
                    double kappa_eff, int eig_bits);

// Bipartite embedding of a rectangular map: rows/cols of A become the
// off-diagonal blocks of a symmetric matrix acting on (input ++ output):
//   embed(A) = [ 0      A^T ]
//              [ A      0   ],   embed(A) (v, 0) = (0, A v).
Eigen::MatrixXd hermitian_embed(const Eigen::MatrixXd& A);

// Quantum-walk application of a symmetric matrix M through its isometry
//   T = sum_j |psi_j><j|,  W = S (2 T T^dag - 1):
// projecting T^dag W T |psi> onto the flag-zero block yields Mbar psi with
// Mbar = s M / d. Entries of s M must not exceed 1/d in magnitude, M's
// diagonal must be zero (the embedding above guarantees this), and the
// eigenvalues of s M must lie strictly inside (-1, 1).
struct WalkContext {
  Eigen::MatrixXd M;  // symmetric, zero diagonal
  Index n_bar = 0;
  int d = 0;          // sparsity bound; n_bar for dense use
  double s = 1.0;     // entry rescaling, max |M_jk| * s <= 1/d
};

WalkContext make_walk_context(const Eigen::MatrixXd& M, int d, double s);
// Dense default: d = n_bar, s chosen as the largest admissible rescaling.
WalkContext make_walk_context(const Eigen::MatrixXd& M);

struct ChebyshevResult {
  QState state;                    // flag-zero block ++ lumped orthogonal rest
  Eigen::VectorXd flag_zero_block; // equals (s/d) M psi
  double a0;                       // |flag_zero_block|
  double orthogonal_norm;          // sqrt(1 - a0^2)
};
ChebyshevResult chebyshev_apply(const WalkContext& ctx,
                                const Eigen::VectorXd& psi);

// Linear combination of unitaries: prepare sum_i (alpha_i / sqrt(sum alpha^2))
// |i> U_i |v>, Hadamard the index register, read the |0...0> block. The
// reported a0 follows the norm-recovery convention |Mv| / sqrt(sum alpha_i^2)
// (it may exceed 1; the physically measured block probability is p0).
struct LcuResult {
  QState state;
  Eigen::VectorXcd flag_zero_block;
  double a0;            // |Mv| / sqrt(sum alpha_i^2)
  double p0;            // measured probability of the flag-zero block
  Index register_dim;   // padded index-register size (power of two)
};
LcuResult lcu_apply(const Eigen::VectorXd& coeffs,
                    const std::vector<Eigen::MatrixXcd>& unitaries,
                    const Eigen::VectorXcd& v);

double recover_norm_lcu(double a0, double v_norm,
                        const Eigen::VectorXd& coeffs);
double recover_norm_chebyshev(double a0, double v_norm,
                              const WalkContext& ctx);

// Amplitude estimation on a J-point phase grid.
//   grid:        deterministic nearest-grid estimate,
//   stochastic:  draws from the exact phase-register distribution,
//   full_grover: explicit register statevector (J <= 2^10), then Born sample.
// k is the confidence multiple of the error bound; beta (odd) the median
// repetition count. Endpoints are exact: a = 0 always, a = 1 for even J.
enum class AeMode { kGrid, kStochastic, kFullGrover };

struct AEConfig {
  int J = 64;        // grid size, >= 2
  int k = 1;         // confidence multiple in the error bound
  int beta = 1;      // odd number of median repetitions
  AeMode mode = AeMode::kGrid;
};

double amplitude_estimate(double marked_probability, const AEConfig& cfg,
                          RngStream* rng = nullptr);

// Theorem error bound |a - a~| <= 2 pi k sqrt(a (1-a)) / J + k^2 pi^2 / J^2.
double ae_error_bound(double a, int J, int k);

// Exact phase-register outcome distribution over y = 0..J-1 for marked
// probability a (used by the stochastic mode and by cross-checks).
Eigen::VectorXd ae_outcome_distribution(double a, int J);

// Median of an odd number of estimates.
double median_amplify(std::vector<double> estimates);

}  // namespace mf
