// Quantile-sampling strategies over an abstract score oracle.
//
// Task: return a point whose (mean) score lies in the top 1/C of a finite
// score space, with failure probability at most e^{-beta}, while accounting
// for every oracle evaluation.  Four procedures are provided:
//
//   greedy_deterministic  - best of c = ceil(beta / -ln(1-1/C)) draws.
//   greedy_stochastic     - running best with pairwise mean-comparison tests
//                           escalated until the required confidence is met.
//   threshold_classical   - two phases: estimate a high quantile by order
//                           statistics, then test candidates against it.
//   threshold_quantum     - simulated bisection + amplitude estimation to
//                           locate the quantile, then amplitude amplification
//                           to draw a point above it.
//
// Every strategy returns a StrategyReport whose `calls` field equals the
// oracle counter delta (for the quantum strategy, the number of simulated
// Grover-operator applications).

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "marginforge/core_data.hpp"
#include "marginforge/rng.hpp"

namespace mf {

// ---------------------------------------------------------------------------
// Score oracle over a finite point space.
// ---------------------------------------------------------------------------

// Finite score space: point i has mean score mu_i; evaluations return
// mu_i + noise_sigma * N(0,1).  Every eval() increments the call counter.
class ScoreOracle {
 public:
  ScoreOracle(Eigen::VectorXd means, double noise_sigma);
  ScoreOracle(std::function<double(Index)> mean_fn, Index size,
              double noise_sigma);

  Index size() const { return size_; }
  double noise_sigma() const { return sigma_; }
  long long call_count() const { return calls_; }

  // One (possibly noisy) evaluation of point `point`; always counted.
  double eval(Index point, RngStream& rng);

  // Simulator-side ground truth; not counted as an oracle call.
  double true_mean(Index point) const;

 private:
  Eigen::VectorXd means_;
  std::function<double(Index)> fn_;
  Index size_ = 0;
  double sigma_ = 0.0;
  long long calls_ = 0;
};

// ---------------------------------------------------------------------------
// Reports.
// ---------------------------------------------------------------------------

struct StrategyReport {
  std::string strategy;
  Index chosen = -1;       // index of the returned point (-1 on failure)
  long long calls = 0;     // oracle evaluations / simulated Grover applications
  double C = 0.0;
  double beta = 0.0;
  double epsilon = 0.0;    // 0 when the strategy takes no accuracy parameter
  double sigma = 0.0;      // oracle noise level
  // threshold_*: the score threshold used for the final acceptance test.
  std::optional<double> threshold;
  // threshold_classical: interpolated score value at the 1-1/C quantile.
  // threshold_quantum:   achieved quantile level 1 - (estimated fraction
  //                      above the returned threshold).
  std::optional<double> percentile;
  bool failed = false;
  std::string failure_reason;
  // greedy_stochastic: comparisons abandoned at the per-comparison cap.
  Index low_confidence_comparisons = 0;
  // greedy_stochastic: modeled success probability from the multi-candidate
  // binomial expansion over the recorded pairwise confidences (diagnostic
  // only; never used to steer the procedure).
  std::optional<double> success_diagnostic;
};

std::string report_to_json(const StrategyReport& report);
std::string report_csv_header();
std::string report_to_csv_row(const StrategyReport& report);

// ---------------------------------------------------------------------------
// Numeric helpers.
// ---------------------------------------------------------------------------

// Inverse of std::erf on (-1, 1), accurate to double roundoff.
double erf_inv(double x);

// Probability that arm 0 has the larger true mean, given sample means
// mu_hat0 (over m0 draws) and mu_hat1 (over m1 draws) at noise level sigma:
//   1/2 + 1/2 erf((mu_hat0 - mu_hat1) / sqrt(sigma^2/m0 + sigma^2/m1)).
// sigma = 0 degenerates to 1 / 0.5 / 0 by direct comparison.
double pairwise_confidence(double mu_hat0, double mu_hat1, Index m0, Index m1,
                           double sigma);

// Weighted-order-statistic estimate of the q-quantile (q in [0,1]) of
// `values`: with h = (n+1)q, interpolates between the floor(h)-th and
// ceil(h)-th smallest values with weights ceil(h)-h and h-floor(h).
double order_statistic_quantile(std::vector<double> values, double q);

// Phase-1 sample count for threshold_classical:
//   n = ceil(2 * (1-p_C)/p_C * (C/epsilon)^2 * erf_inv(1 - e^{-beta})^2)
// with p_C = 1 - 1/C the target percentile level, so (1-p_C)/p_C = 1/(C-1).
Index threshold_phase1_samples(double C, double beta, double epsilon);

// Odd number of repetitions for which taking the median drives the failure
// probability of an estimator (per-run failure 1 - 8/pi^2) below 2^{-beta-1}.
Index median_repetitions(double beta);

// Modeled success probability of best-of-c selection when challenger i was
// beaten with confidence pairwise_confidences[i]: sum over n of the binomial
// probability that exactly n of the c candidates are top-1/C points times the
// probability that the kept point outranks all but n-1 of the challengers.
double stochastic_success_diagnostic(double C,
                                     const std::vector<double>& pairwise_confidences);

// True top-1/C membership by brute-force ranking: chosen is in the top
// max(1, floor(N/C)) of `means`.
bool in_top_fraction(const Eigen::VectorXd& means, Index chosen, double C);

// ---------------------------------------------------------------------------
// Strategies.
// ---------------------------------------------------------------------------

inline constexpr Index kDefaultComparisonCap = 1000000;

// Best of c = ceil(beta / -ln(1-1/C)) uniform draws; requires a noiseless
// oracle.  calls = c.
StrategyReport greedy_deterministic(ScoreOracle& oracle, double C, double beta,
                                    RngStream& rng);

// Running best over c candidates; each challenger is compared to the current
// best with equal per-arm evaluation counts, doubling until
// pairwise_confidence reaches 1 - p' with p' = 1 - (1-e^{-beta})^{1/c}.
// Comparisons that hit m_max evaluations per arm are resolved by sample mean
// and flagged in low_confidence_comparisons.  Requires noise_sigma > 0.
StrategyReport greedy_stochastic(ScoreOracle& oracle, double C, double beta,
                                 RngStream& rng,
                                 Index m_max = kDefaultComparisonCap);

// Phase 1: n = threshold_phase1_samples draws estimate the 1-1/C quantile
// (reported in `percentile`) and a conservative testing threshold at quantile
// 1-(1-epsilon)/C (reported in `threshold`).  Phase 2: uniform candidates are
// tested against the threshold with per-candidate repetitions
//   m = ceil(2 sigma^2 / (mu_hat - T)^2 * erf_inv(1 - 2e^{-beta})^2)
// (m = 1 when sigma = 0) until one passes; candidates are capped at
// O(C beta), after which the report flags failure.
StrategyReport threshold_classical(ScoreOracle& oracle, double C, double beta,
                                   double epsilon, RngStream& rng,
                                   Index m_max = kDefaultComparisonCap);

// Simulated quantum threshold search over a pool of N = 2^q scores (N <=
// 4096).  Bisection proposes thresholds T'; the fraction of the pool above T'
// is amplitude-estimated to additive epsilon/(4C) and median-amplified to
// failure <= 2^{-beta-1}; bisection stops when the estimated fraction lies in
// [(1-epsilon)/C, (1-epsilon/2)/C], a sub-band of [(1-eps)/C, (1+eps)/C]
// chosen so the true fraction stays strictly below 1/C.  A point above the
// final threshold is then drawn by simulated amplitude amplification.  calls
// counts Grover-operator applications (J per estimation run, k per
// amplification round plus one readout).  noise_sigma > 0 folds the noise
// into per-point exceedance amplitudes Phi((mu_i - T)/sigma).
StrategyReport threshold_quantum(const Eigen::VectorXd& pool_scores, double C,
                                 double beta, double epsilon, RngStream& rng,
                                 double noise_sigma = 0.0);

// ---------------------------------------------------------------------------
// Trial running and the complexity table.
// ---------------------------------------------------------------------------

enum class StrategyKind {
  kGreedyDeterministic,
  kGreedyStochastic,
  kThresholdClassical,
  kThresholdQuantum,
};

std::string strategy_name(StrategyKind kind);

struct TrialOutcome {
  StrategyReport report;
  bool success = false;  // chosen point is in the true top 1/C and not failed
};

// One full strategy run against a synthetic oracle with the given mean scores
// and noise level, judged by brute-force ranking.
TrialOutcome run_strategy_trial(StrategyKind kind,
                                const Eigen::VectorXd& pool_means,
                                double noise_sigma, double C, double beta,
                                double epsilon, RngStream& rng,
                                Index m_max = kDefaultComparisonCap);

// Least-squares slope of ln(y) against ln(x); requires matching sizes >= 2
// and strictly positive entries.
double fit_loglog_slope(const std::vector<double>& x,
                        const std::vector<double>& y);

// One-at-a-time sweep grid: each strategy sweeps each of its relevant
// parameters over the listed values while holding the others at the first
// listed value (for greedy_stochastic, sigma is held at the first positive
// value).  Pools of `pool_size` uniform scores are regenerated per trial.
struct SweepGrid {
  std::vector<double> C_values{8.0};
  std::vector<double> beta_values{3.0};
  std::vector<double> epsilon_values{0.1, 0.2, 0.4};
  std::vector<double> sigma_values{0.1};
  Index pool_size = 1024;
  Index trials = 20;
  std::uint64_t seed = 1;
  Index m_max = 100000;
};

struct SweepRow {
  std::string strategy;
  double C = 0.0;
  double beta = 0.0;
  double epsilon = 0.0;
  double sigma = 0.0;
  double mean_calls = 0.0;
  double success_rate = 0.0;
  Index trials = 0;
};

struct ComplexityTable {
  std::vector<SweepRow> rows;
  // (strategy, parameter, fitted log-log slope of mean calls vs parameter).
  std::vector<std::tuple<std::string, std::string, double>> slopes;

  std::string to_csv() const;   // strategy,C,beta,epsilon,sigma,calls,success
  std::string to_json() const;
};

ComplexityTable complexity_table(const SweepGrid& grid);

}  // namespace mf
