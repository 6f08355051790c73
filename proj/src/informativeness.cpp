#include "marginforge/informativeness.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace mf {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

struct HardFit {
  std::vector<Eigen::VectorXd> points;
  Eigen::VectorXd y;
};

HardFit hard_points(const LabeledDataset& S, double tau) {
  HardFit out;
  for (const LabeledPoint& p : S.points) {
    const auto hard = hard_membership(p.c, tau);
    if (!hard) continue;
    out.points.push_back(p.x);
    out.y.conservativeResize(out.y.size() + 1);
    out.y[out.y.size() - 1] = hard_label_sign(*hard);
  }
  require(out.points.size() >= 2, "need at least two hard-labeled points");
  require(out.y.minCoeff() < 0 && out.y.maxCoeff() > 0,
          "need at least one hard-labeled point per class");
  return out;
}

HardFit augmented(const HardFit& base, const Eigen::VectorXd& x, double sign) {
  HardFit out = base;
  out.points.push_back(x);
  out.y.conservativeResize(out.y.size() + 1);
  out.y[out.y.size() - 1] = sign;
  return out;
}

// The overlap states as flat vectors: u = (b, alpha_1 x_1, ..., alpha_n x_n)
// and x = (1, x, ..., x), whose normalized dot product is exactly the
// tilde overlap of the svm module.
Eigen::VectorXd flatten_solution(const SvmSolution& sol,
                                 const std::vector<Eigen::VectorXd>& points) {
  const Index n = static_cast<Index>(points.size());
  const Index m = points[0].size();
  Eigen::VectorXd u(1 + n * m);
  u[0] = sol.b;
  for (Index k = 0; k < n; ++k) {
    u.segment(1 + k * m, m) = sol.alpha[k] * points[static_cast<size_t>(k)];
  }
  return u;
}

Eigen::VectorXd flatten_query(const Eigen::VectorXd& x, Index n) {
  const Index m = x.size();
  Eigen::VectorXd q(1 + n * m);
  q[0] = 1.0;
  for (Index k = 0; k < n; ++k) {
    q.segment(1 + k * m, m) = x;
  }
  return q;
}

// The weight map w = A (b, alpha) with A = [0 | X^T]: the zero first column
// keeps the bias out of the weight vector.
Eigen::MatrixXd weight_map(const std::vector<Eigen::VectorXd>& points) {
  const Index n = static_cast<Index>(points.size());
  const Index m = points[0].size();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n + 1);
  for (Index k = 0; k < n; ++k) {
    A.col(k + 1) = points[static_cast<size_t>(k)];
  }
  return A;
}

struct ClassChoice {
  ClassId cls;
  double p_c;
};

// Membership of class 1 is the activation of P = (1 - inner)/2; class 0 is
// the activation of the mirrored 1 - P. Argmax follows the sign of the
// estimated overlap, class 0 on ties.
ClassChoice choose_class(double inner, const Activation& act) {
  const double p1 = membership_probability(inner, act);
  const double p0 = membership_probability(-inner, act);
  if (p0 >= p1) return {0, p0};
  return {1, p1};
}

double forced_probability(double inner, const Activation& act, ClassId cls) {
  return cls == 0 ? membership_probability(-inner, act)
                  : membership_probability(inner, act);
}

// ----- exact backend ------------------------------------------------------

double exact_inner(const Backend& backend, const HardFit& fit,
                   const Eigen::VectorXd& x) {
  const Eigen::MatrixXd K = kernel_matrix(fit.points, backend.kernel);
  const Eigen::MatrixXd F = assemble_F(K, backend.gamma);
  const SvmSolution sol = solve_lssvm(F, fit.y, backend.gamma);
  return tilde_inner(sol, fit.points, x);
}

double exact_w_norm(const Backend& backend, const HardFit& aug) {
  const Eigen::MatrixXd K = kernel_matrix(aug.points, backend.kernel);
  const Eigen::MatrixXd F = assemble_F(K, backend.gamma);
  const SvmSolution sol = solve_lssvm(F, aug.y, backend.gamma);
  if (backend.kernel.kind == KernelKind::kLinear) {
    return weight_vector(sol, aug.points).norm;
  }
  return weight_norm_kernel(sol, K);
}

// ----- simulated-quantum backend -------------------------------------------

// Solves the bordered system through the filtered eigendecomposition and
// returns the normalized (b, alpha) direction plus its recovered norm.
struct QsimSolve {
  Eigen::VectorXd direction;
  double norm;
};

QsimSolve qsim_solve(const Backend& backend, const HardFit& fit,
                     RngStream& rng) {
  const Eigen::MatrixXd K = kernel_matrix(fit.points, backend.kernel);
  const Eigen::MatrixXd F = assemble_F(K, backend.gamma);
  const double spectral = F.operatorNorm();
  Eigen::VectorXd rhs(fit.y.size() + 1);
  rhs[0] = 0.0;
  rhs.tail(fit.y.size()) = fit.y;

  const HhlResult hhl = hhl_solve(F / spectral, rhs, backend.qsim.kappa_eff,
                                  backend.qsim.eig_bits);
  Eigen::VectorXd direction(hhl.dim);
  for (Index i = 0; i < hhl.dim; ++i) {
    direction[i] = hhl.solution.amplitudes()[i].real();
  }
  // The rotation ancilla's success chance is read out by amplitude
  // estimation, as the norm-recovery rule prescribes.
  const double p1 = amplitude_estimate(std::min(hhl.p1, 1.0), backend.qsim.ae,
                                       &rng);
  const double scaled_norm =
      backend.qsim.kappa_eff * rhs.norm() * std::sqrt(p1);
  return {std::move(direction), scaled_norm / spectral};
}

double qsim_inner(const Backend& backend, const HardFit& fit,
                  const Eigen::VectorXd& x, RngStream& rng) {
  const QsimSolve solved = qsim_solve(backend, fit, rng);
  SvmSolution dir_sol;
  dir_sol.b = solved.direction[0];
  dir_sol.alpha = solved.direction.tail(solved.direction.size() - 1);

  // The augmented query (1, x, ..., x) is nonzero even at the origin, so no
  // candidate norm check is needed; only the solution state can degenerate.
  const Eigen::VectorXd u_flat = flatten_solution(dir_sol, fit.points);
  const Eigen::VectorXd x_flat =
      flatten_query(x, static_cast<Index>(fit.points.size()));
  require(u_flat.norm() > 0.0, "degenerate solution state");

  const PreparedState u = prepare_amplitude_state(u_flat);
  const PreparedState q = prepare_amplitude_state(x_flat);
  const double p_raw = swap_test_probability(u.state, q.state);
  const double p_est = amplitude_estimate(p_raw, backend.qsim.ae, &rng);
  return 1.0 - 2.0 * p_est;  // invert P = (1 - inner) / 2
}

double qsim_w_norm(const Backend& backend, const HardFit& aug,
                   RngStream& rng) {
  const QsimSolve solved = qsim_solve(backend, aug, rng);
  const Eigen::MatrixXd A = weight_map(aug.points);
  const Eigen::MatrixXd M = hermitian_embed(A);
  const WalkContext ctx = make_walk_context(M);

  Eigen::VectorXd psi = Eigen::VectorXd::Zero(M.rows());
  psi.head(solved.direction.size()) = solved.direction;
  const ChebyshevResult walked = chebyshev_apply(ctx, psi);
  const double a_est =
      amplitude_estimate(walked.a0 * walked.a0, backend.qsim.ae, &rng);
  const double unit_norm =
      recover_norm_chebyshev(std::sqrt(a_est), 1.0, ctx);
  return unit_norm * solved.norm;
}

// ----- dequantized backend --------------------------------------------------

struct DequantSolve {
  Eigen::VectorXd direction;  // normalized (b, alpha)
  double norm;                // |(b, alpha)|
};

DequantSolve dequant_backend_solve(const Backend& backend, const HardFit& fit,
                                   RngStream& rng) {
  const Eigen::MatrixXd K = kernel_matrix(fit.points, backend.kernel);
  const Eigen::MatrixXd F = assemble_F(K, backend.gamma);
  const double spectral = F.operatorNorm();
  Eigen::VectorXd rhs(fit.y.size() + 1);
  rhs[0] = 0.0;
  rhs.tail(fit.y.size()) = fit.y;

  const SqMatrix sq_f(F / spectral);
  const DequantSolution sol =
      dequant_solve(sq_f, rhs, backend.dequant.solve, rng);
  Eigen::VectorXd z(F.rows());
  for (Index i = 0; i < F.rows(); ++i) z[i] = sol.query(i);
  const double z_norm = z.norm();
  if (z_norm == 0.0) {
    throw std::runtime_error("sketched solve returned the zero vector");
  }
  return {z / z_norm, z_norm / spectral};
}

double dequant_inner(const Backend& backend, const HardFit& fit,
                     const Eigen::VectorXd& x, RngStream& rng) {
  const DequantSolve solved = dequant_backend_solve(backend, fit, rng);
  SvmSolution dir_sol;
  dir_sol.b = solved.direction[0];
  dir_sol.alpha = solved.direction.tail(solved.direction.size() - 1);

  const Eigen::VectorXd u_flat = flatten_solution(dir_sol, fit.points);
  const Eigen::VectorXd x_flat =
      flatten_query(x, static_cast<Index>(fit.points.size()));
  const SqVector u_access(u_flat);
  const double dot =
      inner_product_estimate(u_access, x_flat, backend.dequant.ip_epsilon,
                             backend.dequant.delta, rng);
  const double inner = dot / (u_access.norm() * x_flat.norm());
  return std::clamp(inner, -1.0, 1.0);
}

double dequant_w_norm(const Backend& backend, const HardFit& aug,
                      RngStream& rng) {
  const DequantSolve solved = dequant_backend_solve(backend, aug, rng);
  const Eigen::MatrixXd A = weight_map(aug.points);
  const double unit_norm =
      dequant_norm_Aw(A, solved.direction, backend.dequant.norm_epsilon,
                      backend.dequant.delta, rng);
  return unit_norm * solved.norm;
}

// ----- dispatch -------------------------------------------------------------

double backend_inner(const Backend& backend, const HardFit& fit,
                     const Eigen::VectorXd& x, RngStream& rng) {
  switch (backend.kind) {
    case BackendKind::kExact:
      return exact_inner(backend, fit, x);
    case BackendKind::kQsim:
      require(backend.kernel.kind == KernelKind::kLinear,
              "the simulated-quantum path supports the linear kernel only");
      return qsim_inner(backend, fit, x, rng);
    case BackendKind::kDequant:
      require(backend.kernel.kind == KernelKind::kLinear,
              "the sampled path supports the linear kernel only");
      return dequant_inner(backend, fit, x, rng);
  }
  throw std::logic_error("unreachable backend kind");
}

double backend_w_norm(const Backend& backend, const HardFit& aug,
                      RngStream& rng) {
  switch (backend.kind) {
    case BackendKind::kExact:
      return exact_w_norm(backend, aug);
    case BackendKind::kQsim:
      return qsim_w_norm(backend, aug, rng);
    case BackendKind::kDequant:
      return dequant_w_norm(backend, aug, rng);
  }
  throw std::logic_error("unreachable backend kind");
}

InformativenessScore score_impl(const Backend& backend,
                                const LabeledDataset& S,
                                const Eigen::VectorXd& x,
                                std::optional<ClassId> forced,
                                RngStream& rng) {
  require(x.size() == S.dim, "candidate dimension must match the dataset");
  require(x.allFinite(), "candidate must be finite");
  const HardFit fit = hard_points(S, backend.tau);

  const double inner = backend_inner(backend, fit, x, rng);
  InformativenessScore out;
  if (forced) {
    require(*forced == 0 || *forced == 1, "class id must be 0 or 1");
    out.hypothesized_class = *forced;
    out.p_c = forced_probability(inner, backend.activation, *forced);
  } else {
    const ClassChoice choice = choose_class(inner, backend.activation);
    out.hypothesized_class = choice.cls;
    out.p_c = choice.p_c;
  }

  const HardFit aug =
      augmented(fit, x, hard_label_sign(out.hypothesized_class));
  out.w_norm = backend_w_norm(backend, aug, rng);
  if (backend.kind == BackendKind::kExact) {
    // Algebraic invariant of the dense solve. The sampled backends read the
    // norm through statistical estimators whose smallest grid outcome is an
    // honest zero, so for them a zero is a reading, not a failure.
    require(out.w_norm > 0.0, "augmented fit produced a zero weight vector");
  }
  out.value = out.p_c * out.w_norm;
  return out;
}

}  // namespace

InformativenessScore score(const Backend& backend, const LabeledDataset& S,
                           const Eigen::VectorXd& x, RngStream& rng) {
  return score_impl(backend, S, x, std::nullopt, rng);
}

InformativenessScore score(const Backend& backend, const LabeledDataset& S,
                           const Eigen::VectorXd& x, ClassId hypothesized,
                           RngStream& rng) {
  return score_impl(backend, S, x, hypothesized, rng);
}

Index required_candidates(double C, double beta) {
  require(C >= 1.0, "quantile parameter must be at least 1");
  require(beta > 0.0, "confidence exponent must be positive");
  if (C == 1.0) return 1;
  const double per_draw_miss = std::log1p(-1.0 / C);  // ln(1 - 1/C) < 0
  const double c = std::ceil(beta / -per_draw_miss);
  return std::max<Index>(1, static_cast<Index>(c));
}

CandidateSampler CandidateSampler::bounding_box(const LabeledDataset& S,
                                                double inflate) {
  require(!S.points.empty(), "dataset must be nonempty");
  require(inflate >= 0.0, "inflation must be nonnegative");
  CandidateSampler out;
  out.pool_mode_ = false;
  out.lo_ = S.points.front().x;
  out.hi_ = S.points.front().x;
  for (const LabeledPoint& p : S.points) {
    out.lo_ = out.lo_.cwiseMin(p.x);
    out.hi_ = out.hi_.cwiseMax(p.x);
  }
  const Eigen::VectorXd pad = (out.hi_ - out.lo_) * inflate;
  out.lo_ -= pad;
  out.hi_ += pad;
  return out;
}

CandidateSampler CandidateSampler::pool(std::vector<Eigen::VectorXd> points) {
  require(!points.empty(), "pool must be nonempty");
  CandidateSampler out;
  out.pool_mode_ = true;
  out.pool_ = std::move(points);
  out.remaining_ = static_cast<Index>(out.pool_.size());
  return out;
}

Eigen::VectorXd CandidateSampler::next(RngStream& rng) {
  if (!pool_mode_) {
    Eigen::VectorXd x(lo_.size());
    for (Index i = 0; i < x.size(); ++i) {
      x[i] = lo_[i] + (hi_[i] - lo_[i]) * rng.uniform();
    }
    return x;
  }
  if (remaining_ == 0) {
    throw std::runtime_error("candidate pool exhausted");
  }
  const Index pick =
      static_cast<Index>(rng.uniform_int(static_cast<uint64_t>(remaining_)));
  std::swap(pool_[static_cast<size_t>(pick)],
            pool_[static_cast<size_t>(remaining_ - 1)]);
  --remaining_;
  return pool_[static_cast<size_t>(remaining_)];
}

Index CandidateSampler::available() const {
  return pool_mode_ ? remaining_ : std::numeric_limits<Index>::max();
}

std::string BestOfCounter::to_json_with_best(double best_value) const {
  nlohmann::json j;
  j["c"] = c;
  j["scores"] = scores;
  j["best"] = {{"index", best_index}, {"value", best_value}};
  return j.dump();
}

BestOfResult best_of_c(const Backend& backend, const LabeledDataset& S,
                       CandidateSampler& sampler, double C, double beta,
                       RngStream& rng) {
  InformativenessScore best_score;
  bool have_best = false;
  double best_value = -std::numeric_limits<double>::infinity();
  auto evaluate = [&](const Eigen::VectorXd& x) {
    const InformativenessScore s = score(backend, S, x, rng);
    if (!have_best || s.value > best_value) {
      best_score = s;
      best_value = s.value;
      have_best = true;
    }
    return s.value;
  };
  auto [point, counter] = best_of_candidates(evaluate, sampler, C, beta, rng);
  return BestOfResult{std::move(point), best_score, std::move(counter)};
}

}  // namespace mf
