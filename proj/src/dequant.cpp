#include "marginforge/dequant.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mf {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

std::vector<double> build_square_tree(const Eigen::VectorXd& v,
                                      Index* leaves_out) {
  Index leaves = 1;
  while (leaves < v.size()) leaves <<= 1;
  std::vector<double> tree(static_cast<size_t>(2 * leaves), 0.0);
  for (Index i = 0; i < v.size(); ++i) {
    tree[static_cast<size_t>(leaves + i)] = v[i] * v[i];
  }
  for (Index node = leaves - 1; node >= 1; --node) {
    tree[static_cast<size_t>(node)] = tree[static_cast<size_t>(2 * node)] +
                                      tree[static_cast<size_t>(2 * node + 1)];
  }
  *leaves_out = leaves;
  return tree;
}

Index sample_square_tree(const std::vector<double>& tree, Index leaves,
                         Index size, RngStream& rng) {
  const double total = tree[1];
  if (total <= 0.0) {
    throw std::runtime_error("cannot sample from an all-zero vector");
  }
  double target = rng.uniform() * total;
  Index node = 1;
  while (node < leaves) {
    const double left = tree[static_cast<size_t>(2 * node)];
    if (target < left) {
      node = 2 * node;
    } else {
      target -= left;
      node = 2 * node + 1;
    }
  }
  Index idx = node - leaves;
  if (idx >= size) idx = size - 1;  // guards a floating-point edge landing
  return idx;                       // in the zero-weight padding
}

}  // namespace

SqVector::SqVector(Eigen::VectorXd values) : values_(std::move(values)) {
  require(values_.size() > 0, "cannot build access over an empty vector");
  require(values_.allFinite(), "entries must be finite");
  tree_ = build_square_tree(values_, &leaves_);
  declared_norm_ = std::sqrt(tree_[1]);
  nu_ = 0.0;
}

SqVector::SqVector(Eigen::VectorXd values, double declared_norm, double nu)
    : SqVector(std::move(values)) {
  require(nu >= 0.0, "overestimate tag must be nonnegative");
  require(declared_norm >= 0.0, "declared norm must be nonnegative");
  declared_norm_ = declared_norm;
  nu_ = nu;
}

Index SqVector::sample(RngStream& rng) const {
  return sample_square_tree(tree_, leaves_, values_.size(), rng);
}

namespace {

SqVector row_norm_access(const Eigen::MatrixXd& A) {
  return SqVector(A.rowwise().norm());
}

}  // namespace

SqMatrix::SqMatrix(Eigen::MatrixXd values)
    : values_(std::move(values)), row_norms_(row_norm_access(values_)) {
  require(values_.size() > 0, "cannot build access over an empty matrix");
  rows_.reserve(static_cast<size_t>(values_.rows()));
  for (Index i = 0; i < values_.rows(); ++i) {
    rows_.emplace_back(values_.row(i).transpose());
  }
}

SqVector build_sq(const Eigen::VectorXd& v) { return SqVector(v); }
SqMatrix build_sq(const Eigen::MatrixXd& A) { return SqMatrix(A); }

namespace {

Index odd_batch_count(double delta) {
  // Hoeffding on the median of batches, each failing with chance <= 1/6:
  // exp(-2 B (1/2 - 1/6)^2) <= delta needs B >= 4.5 ln(1/delta).
  const double needed = 4.5 * std::log(1.0 / delta);
  Index b = static_cast<Index>(std::ceil(std::max(1.0, needed)));
  if (b % 2 == 0) ++b;
  return b;
}

}  // namespace

double inner_product_estimate(const SqVector& x, const Eigen::VectorXd& y,
                              double epsilon, double delta, RngStream& rng) {
  require(x.size() == y.size(), "dimensions must match");
  require(epsilon > 0.0 && epsilon <= 1.0, "precision must lie in (0, 1]");
  require(delta > 0.0 && delta < 1.0, "failure chance must lie in (0, 1)");
  require(x.norm() > 0.0, "sampled side must have nonzero norm");

  const Index batch = static_cast<Index>(std::ceil(6.0 / (epsilon * epsilon)));
  const Index batches = odd_batch_count(delta);
  const double x_norm_sq = x.norm() * x.norm();

  std::vector<double> means;
  means.reserve(static_cast<size_t>(batches));
  for (Index b = 0; b < batches; ++b) {
    double acc = 0.0;
    for (Index t = 0; t < batch; ++t) {
      const Index i = x.sample(rng);
      acc += y[i] * x_norm_sq / x.query(i);
    }
    means.push_back(acc / static_cast<double>(batch));
  }
  std::nth_element(means.begin(), means.begin() + batches / 2, means.end());
  return means[static_cast<size_t>(batches / 2)];
}

ThinMatvec::ThinMatvec(const SqMatrix& v_transposed_rows, Eigen::VectorXd w,
                       double cancellation_cap)
    : v_dag_(v_transposed_rows),
      w_(std::move(w)),
      column_proposal_(Eigen::VectorXd::Ones(1)) {
  const Index k = v_dag_.rows();
  require(w_.size() == k, "weight length must match the column count");
  require(k <= 32, "thin products are limited to 32 columns");
  require(cancellation_cap > 0.0, "cancellation cap must be positive");

  Eigen::VectorXd proposal(k);
  double weight_sum = 0.0;
  for (Index j = 0; j < k; ++j) {
    proposal[j] = w_[j] * v_dag_.row_norm(j);
    weight_sum += proposal[j] * proposal[j];
  }
  require(weight_sum > 0.0, "product is identically zero");
  column_proposal_ = SqVector(proposal);

  double norm_sq = 0.0;
  for (Index i = 0; i < v_dag_.cols(); ++i) {
    const double vi = query(i);
    norm_sq += vi * vi;
  }
  exact_norm_ = std::sqrt(norm_sq);
  require(exact_norm_ > 0.0, "product is identically zero");
  cancellation_ = static_cast<double>(k) * weight_sum / norm_sq;
  if (cancellation_ > cancellation_cap) {
    throw std::runtime_error(
        "cancellation factor " + std::to_string(cancellation_) +
        " exceeds the cap " + std::to_string(cancellation_cap) +
        "; rejection sampling would thrash");
  }
  max_proposals_ =
      static_cast<Index>(std::ceil(50.0 * cancellation_)) + 100;
}

double ThinMatvec::query(Index i) const {
  double acc = 0.0;
  for (Index j = 0; j < v_dag_.rows(); ++j) {
    acc += w_[j] * v_dag_.query(j, i);
  }
  return acc;
}

Index ThinMatvec::sample(RngStream& rng) const {
  const Index k = v_dag_.rows();
  for (Index attempt = 0; attempt < max_proposals_; ++attempt) {
    const Index j = column_proposal_.sample(rng);
    const Index i = v_dag_.sample_in_row(j, rng);
    double mixture = 0.0;
    for (Index jj = 0; jj < k; ++jj) {
      const double term = w_[jj] * v_dag_.query(jj, i);
      mixture += term * term;
    }
    const double target = query(i);
    const double accept =
        target * target / (static_cast<double>(k) * mixture);
    if (rng.uniform() < accept) return i;
  }
  throw std::runtime_error(
      "rejection sampling exceeded its proposal budget; cancellation is "
      "heavier than the construction-time estimate");
}

ThinMatvec thin_matvec(const SqMatrix& v_transposed_rows,
                       const Eigen::VectorXd& w, double cancellation_cap) {
  return ThinMatvec(v_transposed_rows, w, cancellation_cap);
}

LowRankFactors fkv_low_rank(const SqMatrix& A, double sigma_threshold,
                            double epsilon, double delta, RngStream& rng,
                            Index q) {
  require(sigma_threshold > 0.0, "singular-value cutoff must be positive");
  const double fro = A.frobenius_norm();
  require(fro > 0.0, "matrix must be nonzero");
  const double eps_cap = std::sqrt(sigma_threshold / fro) / 4.0;
  require(epsilon > 0.0 && epsilon <= eps_cap,
          "guarantee slack must lie in (0, sqrt(sigma/|A|_F)/4] = (0, " +
              std::to_string(eps_cap) + "]");
  require(delta > 0.0 && delta < 1.0, "failure chance must lie in (0, 1)");
  if (q == 0) {
    q = std::clamp<Index>(2 * std::min(A.rows(), A.cols()), 16, 256);
  }
  require(q >= 1, "sketch size must be positive");

  LowRankFactors out;
  out.q = q;
  out.sigma_threshold = sigma_threshold;
  out.K_param = fro * fro / (sigma_threshold * sigma_threshold);

  // Rows by squared norm, each rescaled to norm |A|_F / sqrt(q) so the
  // sketch matches A in Frobenius norm exactly.
  const double sq = std::sqrt(static_cast<double>(q));
  out.S.resize(q, A.cols());
  out.row_indices.resize(static_cast<size_t>(q));
  for (Index t = 0; t < q; ++t) {
    const Index r = A.sample_row(rng);
    out.row_indices[static_cast<size_t>(t)] = r;
    out.S.row(t) = A.values().row(r) * (fro / (sq * A.row_norm(r)));
  }

  // Columns through the rows: uniform row, then in-row squared-entry draw,
  // which samples columns of S by their squared norm in expectation.
  Eigen::MatrixXd W(q, q);
  for (Index u = 0; u < q; ++u) {
    const Index t = rng.uniform_int(static_cast<uint64_t>(q));
    const Index c = A.sample_in_row(
        out.row_indices[static_cast<size_t>(t)], rng);
    const double col_norm = out.S.col(c).norm();
    W.col(u) = out.S.col(c) * (fro / (sq * col_norm));
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(W, Eigen::ComputeThinU);
  Index l = 0;
  while (l < svd.singularValues().size() &&
         svd.singularValues()[l] >= sigma_threshold) {
    ++l;
  }
  out.l = l;
  if (l == 0) return out;  // nothing above the cutoff: flagged empty

  out.U = svd.matrixU().leftCols(l);
  out.sigma = svd.singularValues().head(l);
  out.V = out.S.transpose() * out.U * out.sigma.cwiseInverse().asDiagonal();
  return out;
}

std::string low_rank_factors_to_json(const LowRankFactors& f) {
  nlohmann::json j;
  j["l"] = f.l;
  j["q"] = f.q;
  j["sigma_threshold"] = f.sigma_threshold;
  j["K_param"] = f.K_param;
  j["sigma"] = std::vector<double>(f.sigma.data(), f.sigma.data() + f.sigma.size());
  auto matrix_rows = [](const Eigen::MatrixXd& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < M.rows(); ++i) {
      rows.push_back(std::vector<double>(M.row(i).begin(), M.row(i).end()));
    }
    return rows;
  };
  j["S"] = matrix_rows(f.S);
  j["U"] = matrix_rows(f.U);
  j["V"] = matrix_rows(f.V);
  j["row_indices"] = f.row_indices;
  return j.dump(2);
}

double DequantSolution::query(Index i) const {
  double acc = 0.0;
  for (Index t = 0; t < factors.q; ++t) {
    acc += factors.S(t, i) * h[t];
  }
  return acc;
}

Eigen::VectorXd DequantSolution::dense() const { return factors.V * coefficients; }

DequantSolution dequant_solve(const SqMatrix& F, const Eigen::VectorXd& y,
                              const DequantParams& params, RngStream& rng) {
  require(F.rows() == F.cols(), "matrix must be square");
  require(F.rows() == y.size(), "right-hand side length must match");

  DequantSolution out;
  out.factors = fkv_low_rank(F, params.sigma_threshold, params.epsilon,
                             params.delta, rng, params.q);
  if (out.factors.empty()) {
    throw std::runtime_error(
        "no singular value cleared the cutoff; the system is not "
        "representable at this threshold");
  }

  // Right-hand side in the kept directions: c_l = (v_l . F^T y) / sigma_l^2.
  const Eigen::VectorXd fty = F.values().transpose() * y;
  const Index l = out.factors.l;
  out.coefficients.resize(l);
  for (Index t = 0; t < l; ++t) {
    const SqVector v_access(out.factors.V.col(t));
    const double dot = inner_product_estimate(v_access, fty,
                                              params.ip_epsilon, params.delta,
                                              rng);
    out.coefficients[t] = dot / (out.factors.sigma[t] * out.factors.sigma[t]);
  }
  out.h = out.factors.U * out.factors.sigma.cwiseInverse().asDiagonal() *
          out.coefficients;
  out.norm = (out.factors.V * out.coefficients).norm();
  return out;
}

double dequant_norm_Aw(const Eigen::MatrixXd& A, const Eigen::VectorXd& w,
                       double epsilon, double delta, RngStream& rng) {
  require(A.cols() == w.size(), "weight length must match the column count");
  require(epsilon > 0.0 && epsilon < 1.0, "precision must lie in (0, 1)");
  require(delta > 0.0 && delta < 1.0, "failure chance must lie in (0, 1)");
  const Index m = A.rows();
  const Index n = A.cols();
  const Eigen::VectorXd col_norms = A.colwise().norm();
  std::vector<Index> live;
  for (Index k = 0; k < n; ++k) {
    if (col_norms[k] > 0.0) live.push_back(k);
  }
  require(!live.empty(), "matrix must have at least one nonzero column");
  const double w_norm = w.norm();
  const double fro = A.norm();
  if (w_norm == 0.0) return 0.0;
  const double scale = fro * w_norm;  // |a| |b| <= (|A|_F |w|)^2

  const Index kk = static_cast<Index>(live.size());
  Eigen::VectorXd a(m * n * kk);
  Eigen::VectorXd b(m * n * kk);
  Index pos = 0;
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) {
      for (Index t = 0; t < kk; ++t) {
        const Index k = live[static_cast<size_t>(t)];
        a[pos] = A(i, j) * col_norms[k];
        b[pos] = w[j] * w[k] * A(i, k) / col_norms[k];
        ++pos;
      }
    }
  }
  const SqVector a_access(a);

  // Two stages: a coarse pass brackets |Aw| so the fine pass can spend its
  // budget relative to the value instead of the worst-case scale, keeping
  // the overall guarantee |estimate - |Aw|| <= epsilon |A|_F |w|.
  const double coarse_eps = std::max(epsilon * epsilon, 0.1);
  const double est1 =
      inner_product_estimate(a_access, b, coarse_eps, delta / 2.0, rng);
  const double lower_sq = std::max(est1 - coarse_eps * scale * scale, 0.0);
  const double lower = std::sqrt(lower_sq);

  double fine_eps = epsilon * epsilon;  // worst case: |sqrt x - sqrt y| <= sqrt|x-y|
  if (lower > epsilon * scale) {
    fine_eps = std::max(fine_eps, epsilon * lower / scale);
  }
  fine_eps = std::min(fine_eps, 1.0);
  const double est2 =
      inner_product_estimate(a_access, b, fine_eps, delta / 2.0, rng);
  return std::sqrt(std::max(est2, 0.0));
}

}  // namespace mf
