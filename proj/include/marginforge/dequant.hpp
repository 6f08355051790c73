#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "marginforge/core_data.hpp"
#include "marginforge/rng.hpp"

namespace mf {

// Sample-and-query access to a vector: query(i) exact in O(1), sample() draws
// index i with chance v_i^2 / |v|^2 in O(log n) by descending a partial-sum
// tree over squared entries, and norm() reports the declared norm together
// with its overestimate tag nu (exact builds carry nu = 0).
class SqVector {
 public:
  explicit SqVector(Eigen::VectorXd values);
  SqVector(Eigen::VectorXd values, double declared_norm, double nu);

  Index size() const { return values_.size(); }
  double query(Index i) const { return values_[i]; }
  Index sample(RngStream& rng) const;
  double norm() const { return declared_norm_; }
  double nu() const { return nu_; }
  const Eigen::VectorXd& values() const { return values_; }

 private:
  Eigen::VectorXd values_;
  std::vector<double> tree_;  // heap-shaped: node i sums children 2i, 2i+1
  Index leaves_ = 0;
  double declared_norm_ = 0.0;
  double nu_ = 0.0;
};

// Two-level SQ access to a matrix: one tree over squared row norms plus one
// tree per row, the standard structure for length-square matrix sampling.
class SqMatrix {
 public:
  explicit SqMatrix(Eigen::MatrixXd values);

  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }
  double query(Index i, Index j) const { return values_(i, j); }
  Index sample_row(RngStream& rng) const { return row_norms_.sample(rng); }
  Index sample_in_row(Index i, RngStream& rng) const {
    return rows_[static_cast<size_t>(i)].sample(rng);
  }
  double row_norm(Index i) const { return row_norms_.query(i); }
  double frobenius_norm() const { return row_norms_.norm(); }
  const Eigen::MatrixXd& values() const { return values_; }

 private:
  Eigen::MatrixXd values_;
  std::vector<SqVector> rows_;
  SqVector row_norms_;
};

SqVector build_sq(const Eigen::VectorXd& v);
SqMatrix build_sq(const Eigen::MatrixXd& A);

// Median-of-means estimate of x . y from SQ access to x and query access to
// y: batches of ceil(6 / epsilon^2) draws of the unbiased single-sample
// estimator y_i |x|^2 / x_i, medianed over an odd number of batches that
// grows like log(1/delta). Guarantee: |estimate - x.y| <= epsilon |x| |y|
// with probability >= 1 - delta.
double inner_product_estimate(const SqVector& x, const Eigen::VectorXd& y,
                              double epsilon, double delta, RngStream& rng);

// SQ access to V w (V of shape n x k, k small) given SQ access to the rows
// of V^T — i.e. the columns of V — and query access to w. Queries cost O(k);
// samples draw a column j with chance proportional to w_j^2 |V_col_j|^2 and
// accept index i with chance (Vw)_i^2 / (k sum_j w_j^2 V_ij^2), which is the
// exact target distribution. The expected number of proposals per draw is
// the cancellation factor C(V, w) = k sum_j w_j^2 |V_col_j|^2 / |Vw|^2;
// construction fails above the configured cap (rejection would thrash). At
// desk scale the norm is computed exactly (nu = 0) rather than estimated
// from acceptance statistics.
class ThinMatvec {
 public:
  ThinMatvec(const SqMatrix& v_transposed_rows, Eigen::VectorXd w,
             double cancellation_cap = 1e4);

  Index size() const { return v_dag_.cols(); }
  double query(Index i) const;  // O(k)
  Index sample(RngStream& rng) const;
  double norm() const { return exact_norm_; }
  double nu() const { return 0.0; }
  double cancellation() const { return cancellation_; }

 private:
  SqMatrix v_dag_;  // k x n: rows are the columns of V
  Eigen::VectorXd w_;
  SqVector column_proposal_;  // over (w_j |V_col_j|)_j
  double exact_norm_ = 0.0;
  double cancellation_ = 0.0;
  Index max_proposals_ = 0;
};

ThinMatvec thin_matvec(const SqMatrix& v_transposed_rows,
                       const Eigen::VectorXd& w,
                       double cancellation_cap = 1e4);

// Importance-sampled low-rank factorization: q rows drawn by squared row
// norm and rescaled to equal norm |A|_F / sqrt(q) form the sketch S; q
// columns drawn through the rows give the small matrix W whose SVD supplies
// U and the singular values; V := S^T U Sigma^{-1} approximates the top
// right-singular directions of A. Kept directions have singular value >=
// sigma_threshold; none kept is flagged, not thrown.
struct LowRankFactors {
  Eigen::MatrixXd S;      // q x n sketch of rescaled rows
  Eigen::MatrixXd U;      // q x l
  Eigen::VectorXd sigma;  // l kept singular values, descending
  Eigen::MatrixXd V;      // n x l = S^T U Sigma^{-1}
  Index l = 0;
  Index q = 0;
  double sigma_threshold = 0.0;
  double K_param = 0.0;  // |A|_F^2 / sigma_threshold^2
  std::vector<Index> row_indices;
  bool empty() const { return l == 0; }
};

// Precondition from the guarantee: epsilon in (0, sqrt(sigma_threshold /
// |A|_F) / 4]. q = 0 picks 2 * min(rows, cols) clamped to [16, 256]; the
// guarantee's asymptotic row count hides constants, so the sample size is
// configuration, not formula.
LowRankFactors fkv_low_rank(const SqMatrix& A, double sigma_threshold,
                            double epsilon, double delta, RngStream& rng,
                            Index q = 0);

std::string low_rank_factors_to_json(const LowRankFactors& f);

struct DequantParams {
  double sigma_threshold = 0.25;
  double epsilon = 0.05;     // low-rank guarantee slack (precondition-checked)
  double delta = 0.05;       // per-estimator failure probability
  double ip_epsilon = 0.01;  // sampled-inner-product precision
  Index q = 0;               // sketch rows; 0 = auto
};

// Approximate solution of F x = y through the sketch: coefficients
// c_l = (v_l . F^T y) / sigma_l^2 estimated by sampled inner products, with
// query access (S^T h)_i for h = U Sigma^{-1} c costing O(q) per entry.
// Directions below sigma_threshold are absent from the reconstruction.
struct DequantSolution {
  Eigen::VectorXd coefficients;  // c, one per kept direction
  Eigen::VectorXd h;             // U Sigma^{-1} c
  LowRankFactors factors;
  double norm = 0.0;  // |V c|

  double query(Index i) const;   // (S^T h)_i
  Eigen::VectorXd dense() const;  // V c
};

DequantSolution dequant_solve(const SqMatrix& F, const Eigen::VectorXd& y,
                              const DequantParams& params, RngStream& rng);

// Estimates |A w| through the three-index inner product <a|b> = |A w|^2 with
//   a_{ijk} = A_ij t_k,   b_{ijk} = w_j w_k A_ik / t_k,   t_k = |A_col_k|,
// for which |a| = |A|_F^2 and |b| <= |w|^2. Guarantee: |estimate - |Aw|| <=
// epsilon |A|_F |w| with probability >= 1 - delta. Columns with zero norm
// contribute nothing on either side and are skipped; an all-zero matrix is
// an error.
double dequant_norm_Aw(const Eigen::MatrixXd& A, const Eigen::VectorXd& w,
                       double epsilon, double delta, RngStream& rng);

}  // namespace mf
