#pragma once

#include <Eigen/Core>

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "marginforge/core_data.hpp"
#include "marginforge/dequant.hpp"
#include "marginforge/qsim.hpp"
#include "marginforge/rng.hpp"
#include "marginforge/svm.hpp"

namespace mf {

enum class BackendKind { kExact, kQsim, kDequant };

// Simulated-quantum scoring path: eigenvalue filtering at 1/kappa_eff with
// eig_bits-bit phase rounding, overlap and norm readouts through amplitude
// estimation.
struct QsimConfig {
  double kappa_eff = 32.0;
  int eig_bits = 20;
  AEConfig ae{256, 1, 1, AeMode::kGrid};
};

// Sampled classical scoring path.
struct DequantConfig {
  DequantParams solve{};       // sketch solve of the bordered system
  double ip_epsilon = 0.01;    // overlap estimation precision
  double norm_epsilon = 0.02;  // |w| precision relative to |A|_F |(b,alpha)|
  double delta = 0.05;         // per-estimator failure chance
};

struct Backend {
  BackendKind kind = BackendKind::kExact;
  KernelSpec kernel{};  // the qsim and dequant paths support linear only
  double gamma = kDefaultGamma;
  double tau = kDefaultHardTau;
  Activation activation{};
  QsimConfig qsim{};
  DequantConfig dequant{};
};

struct InformativenessScore {
  double p_c = 0.0;
  double w_norm = 0.0;
  double value = 0.0;  // stored as the exact product p_c * w_norm
  ClassId hypothesized_class = 0;
};

// Scores a candidate: p_c is the fitted classifier's membership probability
// for the hypothesized class (argmax over the two classes by default), and
// w_norm comes from re-fitting with (x, hypothesized label) appended, via
// the backend's own solve/readout path.
InformativenessScore score(const Backend& backend, const LabeledDataset& S,
                           const Eigen::VectorXd& x, RngStream& rng);
InformativenessScore score(const Backend& backend, const LabeledDataset& S,
                           const Eigen::VectorXd& x, ClassId hypothesized,
                           RngStream& rng);

// Candidate count c = ceil(-beta / ln(1 - 1/C)) guaranteeing a top-1/C draw
// with chance >= 1 - e^{-beta}; C = 1 needs a single draw.
Index required_candidates(double C, double beta);

// Candidate source: uniform over the dataset's bounding box inflated per
// axis (query synthesis), or a finite pool drawn without replacement.
class CandidateSampler {
 public:
  static CandidateSampler bounding_box(const LabeledDataset& S,
                                       double inflate = 0.2);
  static CandidateSampler pool(std::vector<Eigen::VectorXd> points);

  Eigen::VectorXd next(RngStream& rng);
  // Points left to draw; unbounded for the box mode.
  Index available() const;
  bool is_pool() const { return pool_mode_; }

 private:
  CandidateSampler() = default;
  bool pool_mode_ = false;
  Eigen::VectorXd lo_, hi_;
  std::vector<Eigen::VectorXd> pool_;
  Index remaining_ = 0;
};

struct BestOfCounter {
  Index c = 0;
  std::vector<double> scores;
  Index best_index = -1;
  std::string to_json_with_best(double best_value) const;
};

struct BestOfResult {
  Eigen::VectorXd point;
  InformativenessScore best;
  BestOfCounter counter;
};

// Algorithm core shared by the backend runner and the statistical tests:
// draws exactly required_candidates(C, beta) points and keeps the first
// maximum (ties broken by draw order).
template <typename ScoreFn>
std::pair<Eigen::VectorXd, BestOfCounter> best_of_candidates(
    ScoreFn&& score_fn, CandidateSampler& sampler, double C, double beta,
    RngStream& rng) {
  const Index c = required_candidates(C, beta);
  if (sampler.is_pool() && sampler.available() < c) {
    throw std::runtime_error("pool of " + std::to_string(sampler.available()) +
                             " points cannot supply " + std::to_string(c) +
                             " candidates");
  }
  BestOfCounter counter;
  counter.c = c;
  counter.scores.reserve(static_cast<size_t>(c));
  Eigen::VectorXd best_point;
  double best_value = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < c; ++i) {
    Eigen::VectorXd x = sampler.next(rng);
    const double v = score_fn(x);
    counter.scores.push_back(v);
    if (v > best_value) {
      best_value = v;
      best_point = std::move(x);
      counter.best_index = i;
    }
  }
  return {std::move(best_point), std::move(counter)};
}

BestOfResult best_of_c(const Backend& backend, const LabeledDataset& S,
                       CandidateSampler& sampler, double C, double beta,
                       RngStream& rng);

}  // namespace mf
