#include "marginforge/strategies.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "marginforge/informativeness.hpp"
#include "marginforge/qsim.hpp"

namespace mf {

namespace {

using nlohmann::json;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// Standard normal CDF (exact, unlike the pairwise-confidence formula below,
// which follows the published decision rule verbatim).
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

// ---------------------------------------------------------------------------
// ScoreOracle
// ---------------------------------------------------------------------------

ScoreOracle::ScoreOracle(Eigen::VectorXd means, double noise_sigma)
    : means_(std::move(means)), size_(means_.size()), sigma_(noise_sigma) {
  require(size_ >= 1, "score oracle: the point space must be non-empty");
  require(sigma_ >= 0.0, "score oracle: noise_sigma must be >= 0");
  require(means_.allFinite(), "score oracle: mean scores must be finite");
}

ScoreOracle::ScoreOracle(std::function<double(Index)> mean_fn, Index size,
                         double noise_sigma)
    : fn_(std::move(mean_fn)), size_(size), sigma_(noise_sigma) {
  require(static_cast<bool>(fn_), "score oracle: mean function must be set");
  require(size_ >= 1, "score oracle: the point space must be non-empty");
  require(sigma_ >= 0.0, "score oracle: noise_sigma must be >= 0");
}

double ScoreOracle::true_mean(Index point) const {
  require(point >= 0 && point < size_, "score oracle: point out of range");
  return fn_ ? fn_(point) : means_[point];
}

double ScoreOracle::eval(Index point, RngStream& rng) {
  const double mu = true_mean(point);
  ++calls_;
  return sigma_ > 0.0 ? mu + sigma_ * rng.normal() : mu;
}

// ---------------------------------------------------------------------------
// Numeric helpers
// ---------------------------------------------------------------------------

double erf_inv(double x) {
  require(x > -1.0 && x < 1.0, "erf_inv: argument must lie in (-1, 1)");
  if (x == 0.0) return 0.0;
  // Winitzki's closed-form approximation as the initial guess (relative error
  // ~1e-3 over the whole range), then Newton on erf to double roundoff.
  constexpr double a = 0.147;
  const double ln1m = std::log1p(-x * x);
  const double h = 2.0 / (std::numbers::pi * a) + 0.5 * ln1m;
  double z = std::sqrt(std::sqrt(h * h - ln1m / a) - h);
  if (x < 0.0) z = -z;
  const double half_sqrt_pi = 0.5 * std::sqrt(std::numbers::pi);
  for (int iter = 0; iter < 4; ++iter) {
    const double err = std::erf(z) - x;
    if (err == 0.0) break;
    const double step = err * half_sqrt_pi * std::exp(z * z);
    z -= step;
    if (std::abs(step) <= 1e-16 * std::abs(z)) break;
  }
  return z;
}

double pairwise_confidence(double mu_hat0, double mu_hat1, Index m0, Index m1,
                           double sigma) {
  require(m0 >= 1 && m1 >= 1, "pairwise_confidence: sample counts must be >= 1");
  require(sigma >= 0.0, "pairwise_confidence: sigma must be >= 0");
  if (sigma == 0.0) {
    if (mu_hat0 > mu_hat1) return 1.0;
    if (mu_hat0 < mu_hat1) return 0.0;
    return 0.5;
  }
  const double se = sigma * std::sqrt(1.0 / static_cast<double>(m0) +
                                      1.0 / static_cast<double>(m1));
  return 0.5 + 0.5 * std::erf((mu_hat0 - mu_hat1) / se);
}

double order_statistic_quantile(std::vector<double> values, double q) {
  require(!values.empty(), "order_statistic_quantile: empty sample");
  require(q >= 0.0 && q <= 1.0, "order_statistic_quantile: q must lie in [0,1]");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  const double h = (n + 1.0) * q;  // 1-indexed fractional order statistic
  if (h <= 1.0) return values.front();
  if (h >= n) return values.back();
  const auto lo = static_cast<std::size_t>(h);  // floor, >= 1 here
  const double frac = h - static_cast<double>(lo);
  return values[lo - 1] * (1.0 - frac) + values[lo] * frac;
}

Index threshold_phase1_samples(double C, double beta, double epsilon) {
  require(C > 1.0, "threshold_phase1_samples: C must exceed 1");
  require(beta > 0.0, "threshold_phase1_samples: beta must be positive");
  require(epsilon > 0.0 && epsilon < 1.0,
          "threshold_phase1_samples: epsilon must lie in (0,1)");
  const double z = erf_inv(1.0 - std::exp(-beta));
  const double ratio = C / epsilon;  // 1/epsilon' with epsilon' = epsilon/C
  const double n = 2.0 * (1.0 / (C - 1.0)) * ratio * ratio * z * z;
  return static_cast<Index>(std::ceil(n));
}

Index median_repetitions(double beta) {
  require(beta > 0.0, "median_repetitions: beta must be positive");
  // Per-run failure bound of single-shot amplitude estimation.
  const double delta = 1.0 - 8.0 / (std::numbers::pi * std::numbers::pi);
  const double rate = -std::log(2.0 * std::sqrt(delta * (1.0 - delta)));
  auto reps = static_cast<Index>(std::ceil(beta * std::numbers::ln2 / rate));
  if (reps < 1) reps = 1;
  if (reps % 2 == 0) ++reps;
  return reps;
}

double stochastic_success_diagnostic(
    double C, const std::vector<double>& pairwise_confidences) {
  require(C >= 1.0, "stochastic_success_diagnostic: C must be >= 1");
  if (C == 1.0) return 1.0;  // everything is in the top 1/1
  const std::size_t challengers = pairwise_confidences.size();
  const std::size_t candidates = challengers + 1;
  // coef[k] = probability that exactly k challengers outrank the kept point,
  // i.e. the coefficient of t^k in prod_j (P_j + (1-P_j) t).
  std::vector<double> coef(challengers + 1, 0.0);
  coef[0] = 1.0;
  for (std::size_t j = 0; j < challengers; ++j) {
    const double pj = std::clamp(pairwise_confidences[j], 0.0, 1.0);
    for (std::size_t k = j + 1; k >= 1; --k)
      coef[k] = coef[k] * pj + coef[k - 1] * (1.0 - pj);
    coef[0] *= pj;
  }
  // Sum over n = number of candidates that are true top-1/C points: the kept
  // point may be outranked by at most n-1 challengers.
  const double log_p = -std::log(C);
  const double log_q = std::log1p(-1.0 / C);
  const double lg_c = std::lgamma(static_cast<double>(candidates) + 1.0);
  double total = 0.0;
  for (std::size_t n = 1; n <= candidates; ++n) {
    const double dn = static_cast<double>(n);
    const double log_pmf =
        lg_c - std::lgamma(dn + 1.0) -
        std::lgamma(static_cast<double>(candidates - n) + 1.0) + dn * log_p +
        static_cast<double>(candidates - n) * log_q;
    total += std::exp(log_pmf) * coef[std::min(n - 1, challengers)];
  }
  return std::clamp(total, 0.0, 1.0);
}

bool in_top_fraction(const Eigen::VectorXd& means, Index chosen, double C) {
  require(C >= 1.0, "in_top_fraction: C must be >= 1");
  const Index n = means.size();
  require(chosen >= 0 && chosen < n, "in_top_fraction: index out of range");
  const auto top = std::max<Index>(
      1, static_cast<Index>(std::floor(static_cast<double>(n) / C)));
  std::vector<double> v(means.begin(), means.end());
  std::nth_element(v.begin(), v.begin() + (top - 1), v.end(),
                   std::greater<>());
  return means[chosen] >= v[static_cast<std::size_t>(top - 1)];
}

// ---------------------------------------------------------------------------
// Greedy strategies
// ---------------------------------------------------------------------------

StrategyReport greedy_deterministic(ScoreOracle& oracle, double C, double beta,
                                    RngStream& rng) {
  require(oracle.noise_sigma() == 0.0,
          "greedy_deterministic requires a noiseless oracle (noise_sigma = 0)");
  const Index c = required_candidates(C, beta);
  const long long start = oracle.call_count();

  StrategyReport rep;
  rep.strategy = "greedy_deterministic";
  rep.C = C;
  rep.beta = beta;

  double best = -kInf;
  for (Index t = 0; t < c; ++t) {
    const auto idx = static_cast<Index>(
        rng.uniform_int(static_cast<std::uint64_t>(oracle.size())));
    const double v = oracle.eval(idx, rng);
    if (rep.chosen < 0 || v > best) {
      best = v;
      rep.chosen = idx;
    }
  }
  rep.calls = oracle.call_count() - start;
  return rep;
}

StrategyReport greedy_stochastic(ScoreOracle& oracle, double C, double beta,
                                 RngStream& rng, Index m_max) {
  require(oracle.noise_sigma() > 0.0,
          "greedy_stochastic requires a noisy oracle (noise_sigma > 0)");
  require(m_max >= 1, "greedy_stochastic: m_max must be >= 1");
  const double sigma = oracle.noise_sigma();
  const Index c = required_candidates(C, beta);
  // Per-comparison confidence target from the union-style bound
  // 1 - p <= (1 - p')^c.
  const double p_prime =
      1.0 - std::pow(1.0 - std::exp(-beta), 1.0 / static_cast<double>(c));
  const double conf_target = 1.0 - p_prime;
  const long long start = oracle.call_count();

  StrategyReport rep;
  rep.strategy = "greedy_stochastic";
  rep.C = C;
  rep.beta = beta;
  rep.sigma = sigma;

  auto draw = [&] {
    return static_cast<Index>(
        rng.uniform_int(static_cast<std::uint64_t>(oracle.size())));
  };

  Index best_idx = draw();
  double best_sum = oracle.eval(best_idx, rng);
  Index best_m = 1;
  std::vector<double> confidences;
  confidences.reserve(static_cast<std::size_t>(c));

  for (Index t = 1; t < c; ++t) {
    const Index ch = draw();
    if (ch == best_idx) {
      // Same point drawn again: the comparison is vacuous; pool the draw.
      best_sum += oracle.eval(ch, rng);
      ++best_m;
      continue;
    }
    double ch_sum = oracle.eval(ch, rng);
    Index ch_m = 1;
    Index ch_idx = ch;
    while (true) {
      const double mu_b = best_sum / static_cast<double>(best_m);
      const double mu_c = ch_sum / static_cast<double>(ch_m);
      const double conf = pairwise_confidence(mu_b, mu_c, best_m, ch_m, sigma);
      if (conf >= conf_target) {
        confidences.push_back(conf);
        break;
      }
      if (1.0 - conf >= conf_target) {
        confidences.push_back(1.0 - conf);
        best_idx = ch_idx;
        best_sum = ch_sum;
        best_m = ch_m;
        break;
      }
      if (best_m >= m_max && ch_m >= m_max) {
        ++rep.low_confidence_comparisons;
        confidences.push_back(std::max(conf, 1.0 - conf));
        if (mu_c > mu_b) {
          best_idx = ch_idx;
          best_sum = ch_sum;
          best_m = ch_m;
        }
        break;
      }
      // Equal-m escalation: bring both arms to twice the larger count.
      const Index target = std::min(m_max, 2 * std::max(best_m, ch_m));
      while (ch_m < target) {
        ch_sum += oracle.eval(ch_idx, rng);
        ++ch_m;
      }
      while (best_m < target) {
        best_sum += oracle.eval(best_idx, rng);
        ++best_m;
      }
    }
  }

  rep.chosen = best_idx;
  rep.calls = oracle.call_count() - start;
  rep.success_diagnostic = stochastic_success_diagnostic(C, confidences);
  return rep;
}

// ---------------------------------------------------------------------------
// Classical threshold strategy
// ---------------------------------------------------------------------------

StrategyReport threshold_classical(ScoreOracle& oracle, double C, double beta,
                                   double epsilon, RngStream& rng,
                                   Index m_max) {
  require(C > 1.0, "threshold_classical requires C > 1");
  require(beta > 0.0, "threshold_classical: beta must be positive");
  require(epsilon > 0.0 && epsilon < 1.0,
          "threshold_classical: epsilon must lie in (0,1)");
  require(m_max >= 1, "threshold_classical: m_max must be >= 1");
  const double sigma = oracle.noise_sigma();
  const long long start = oracle.call_count();

  StrategyReport rep;
  rep.strategy = "threshold_classical";
  rep.C = C;
  rep.beta = beta;
  rep.epsilon = epsilon;
  rep.sigma = sigma;

  auto draw = [&] {
    return static_cast<Index>(
        rng.uniform_int(static_cast<std::uint64_t>(oracle.size())));
  };

  // Phase 1: quantile estimation from n single evaluations.
  const Index n = threshold_phase1_samples(C, beta, epsilon);
  std::vector<double> sample;
  sample.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) sample.push_back(oracle.eval(draw(), rng));
  rep.percentile = order_statistic_quantile(sample, 1.0 - 1.0 / C);
  // Testing threshold at the conservative quantile 1-(1-eps)/C: the quantile
  // estimate is accurate to eps/C with probability 1-e^{-beta}, so the
  // threshold sits above the true 1-1/C quantile and everything that passes
  // the Phase-2 test lies in the top 1/C.
  const double threshold =
      order_statistic_quantile(std::move(sample), 1.0 - (1.0 - epsilon) / C);
  rep.threshold = threshold;

  // Phase 2: candidate testing.  A uniform draw clears the conservative
  // quantile with probability >= (1-eps)/(2C) (half the design mass, leaving
  // room for estimation error), which sets the O(C beta) candidate budget.
  const double pass_prob = (1.0 - epsilon) / (2.0 * C);
  const auto budget =
      static_cast<Index>(std::ceil(beta / -std::log1p(-pass_prob)));
  const double z_pass = erf_inv(std::max(0.0, 1.0 - 2.0 * std::exp(-beta)));

  double best_mean = -kInf;
  Index best_idx = -1;
  for (Index cand = 0; cand < budget; ++cand) {
    const Index idx = draw();
    double sum = oracle.eval(idx, rng);
    Index m = 1;
    if (sigma > 0.0) {
      constexpr Index kPilot = 4;
      while (m < kPilot) {
        sum += oracle.eval(idx, rng);
        ++m;
      }
      const double pilot_mean = sum / static_cast<double>(m);
      if (pilot_mean > threshold) {
        const double gap = pilot_mean - threshold;
        const double m_needed =
            2.0 * sigma * sigma / (gap * gap) * z_pass * z_pass;
        const Index m_star = std::clamp(
            static_cast<Index>(std::ceil(m_needed)), m, m_max);
        while (m < m_star) {
          sum += oracle.eval(idx, rng);
          ++m;
        }
      }
    }
    const double mean = sum / static_cast<double>(m);
    if (mean > best_mean) {
      best_mean = mean;
      best_idx = idx;
    }
    if (mean > threshold) {
      rep.chosen = idx;
      rep.calls = oracle.call_count() - start;
      return rep;
    }
  }

  rep.failed = true;
  rep.failure_reason =
      "no candidate cleared the testing threshold within the candidate budget";
  rep.chosen = best_idx;  // best seen, returned flagged
  rep.calls = oracle.call_count() - start;
  return rep;
}

// ---------------------------------------------------------------------------
// Quantum threshold strategy (simulated)
// ---------------------------------------------------------------------------

namespace {

// Probability that one oracle readout of a uniformly drawn pool point exceeds
// T: the marked amplitude the simulated estimator sees.
double marked_amplitude(const Eigen::VectorXd& scores, double threshold,
                        double sigma) {
  const auto n = static_cast<double>(scores.size());
  if (sigma <= 0.0) {
    double count = 0.0;
    for (double s : scores) count += s > threshold ? 1.0 : 0.0;
    return count / n;
  }
  double total = 0.0;
  for (double s : scores) total += normal_cdf((s - threshold) / sigma);
  return total / n;
}

// Draw a marked point: uniform over scores above T when noiseless, otherwise
// proportional to each point's exceedance probability.
Index draw_marked(const Eigen::VectorXd& scores, double threshold, double sigma,
                  RngStream& rng) {
  const Index n = scores.size();
  if (sigma <= 0.0) {
    std::vector<Index> marked;
    for (Index i = 0; i < n; ++i)
      if (scores[i] > threshold) marked.push_back(i);
    if (marked.empty()) return -1;
    return marked[static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::uint64_t>(marked.size())))];
  }
  Eigen::VectorXd w(n);
  for (Index i = 0; i < n; ++i) w[i] = normal_cdf((scores[i] - threshold) / sigma);
  const double total = w.sum();
  if (total <= 0.0) return -1;
  double u = rng.uniform() * total;
  for (Index i = 0; i < n; ++i) {
    u -= w[i];
    if (u <= 0.0) return i;
  }
  return n - 1;
}

}  // namespace

StrategyReport threshold_quantum(const Eigen::VectorXd& pool_scores, double C,
                                 double beta, double epsilon, RngStream& rng,
                                 double noise_sigma) {
  const Index n = pool_scores.size();
  require(n >= 2, "threshold_quantum: pool must hold at least two points");
  require((n & (n - 1)) == 0,
          "threshold_quantum: pool size must be a power of two");
  require(n <= 4096, "threshold_quantum: pool size is capped at 4096");
  require(pool_scores.allFinite(), "threshold_quantum: scores must be finite");
  require(C > 1.0, "threshold_quantum requires C > 1");
  require(beta > 0.0, "threshold_quantum: beta must be positive");
  require(epsilon > 0.0 && epsilon < 1.0,
          "threshold_quantum: epsilon must lie in (0,1)");
  require(noise_sigma >= 0.0, "threshold_quantum: noise_sigma must be >= 0");

  StrategyReport rep;
  rep.strategy = "threshold_quantum";
  rep.C = C;
  rep.beta = beta;
  rep.epsilon = epsilon;
  rep.sigma = noise_sigma;

  long long calls = 0;

  // Estimation resolution: additive error at the working amplitude ~1/C must
  // be at most epsilon/(4C) so that the accepted fraction stays strictly
  // below 1/C after accounting for the stop band below.
  const double target_err = epsilon / (4.0 * C);
  const double a_check = std::min(1.5 / C, 0.5);
  int grid = static_cast<int>(next_pow2(std::max<Index>(
      8, static_cast<Index>(std::ceil(8.0 * std::numbers::pi *
                                      std::sqrt(1.5 * C) / epsilon)))));
  while (ae_error_bound(a_check, grid, 1) > target_err && grid < (1 << 20))
    grid *= 2;
  const Index reps = median_repetitions(beta);
  AEConfig cfg;
  cfg.J = grid;
  cfg.k = 1;
  cfg.beta = 1;
  cfg.mode = AeMode::kStochastic;

  auto estimate_fraction = [&](double threshold) {
    const double a = marked_amplitude(pool_scores, threshold, noise_sigma);
    std::vector<double> estimates(static_cast<std::size_t>(reps));
    for (auto& e : estimates) e = amplitude_estimate(a, cfg, &rng);
    calls += static_cast<long long>(reps) * grid;
    return median_amplify(std::move(estimates));
  };

  // Bisection on the trial threshold until the estimate lands in
  // [(1-eps)/C, (1-eps/2)/C]: inside the published acceptance interval
  // [(1-eps)/C, (1+eps)/C] but strictly below 1/C with margin for the
  // estimation error.
  const double band_lo = (1.0 - epsilon) / C;
  const double band_hi = (1.0 - 0.5 * epsilon) / C;
  const double tail = noise_sigma > 0.0 ? 10.0 * noise_sigma : 0.0;
  const double span = pool_scores.maxCoeff() - pool_scores.minCoeff();
  double lo = pool_scores.minCoeff() - tail - 1e-9 * (1.0 + span);
  double hi = pool_scores.maxCoeff() + tail;

  constexpr int kMaxBisection = 200;
  bool found = false;
  double threshold = 0.0;
  double fraction = 0.0;
  for (int step = 0; step < kMaxBisection && !found; ++step) {
    const double mid = 0.5 * (lo + hi);
    const double est = estimate_fraction(mid);
    if (est > band_hi) {
      lo = mid;  // too many points above: raise the threshold
    } else if (est < band_lo) {
      hi = mid;
    } else {
      threshold = mid;
      fraction = est;
      found = true;
    }
  }
  if (!found) {
    rep.failed = true;
    rep.failure_reason =
        "bisection could not bracket the target quantile band "
        "(degenerate score distribution)";
    rep.calls = calls;
    return rep;
  }
  rep.threshold = threshold;
  rep.percentile = 1.0 - fraction;

  // Amplitude amplification toward the marked set, with the rotation count
  // chosen from the estimated amplitude.
  const double a_true = marked_amplitude(pool_scores, threshold, noise_sigma);
  if (a_true <= 0.0) {
    rep.failed = true;
    rep.failure_reason = "no pool point lies above the accepted threshold";
    rep.calls = calls;
    return rep;
  }
  const double theta_est =
      std::asin(std::sqrt(std::clamp(fraction, 1e-12, 1.0)));
  const auto k_star = std::max<Index>(
      0, static_cast<Index>(
             std::llround(std::numbers::pi / (4.0 * theta_est) - 0.5)));
  const double theta_true = std::asin(std::sqrt(std::min(a_true, 1.0)));
  const double angle = (2.0 * static_cast<double>(k_star) + 1.0) * theta_true;
  const double success_prob = std::sin(angle) * std::sin(angle);

  constexpr int kMaxAmplificationRounds = 32;
  for (int attempt = 0; attempt < kMaxAmplificationRounds; ++attempt) {
    calls += static_cast<long long>(k_star) + 1;  // rotations plus readout
    if (rng.bernoulli(success_prob)) {
      rep.chosen = draw_marked(pool_scores, threshold, noise_sigma, rng);
      rep.calls = calls;
      return rep;
    }
  }
  rep.failed = true;
  rep.failure_reason =
      "amplitude amplification did not land on a marked point";
  rep.calls = calls;
  return rep;
}

// ---------------------------------------------------------------------------
// Trial running
// ---------------------------------------------------------------------------

std::string strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kGreedyDeterministic:
      return "greedy_deterministic";
    case StrategyKind::kGreedyStochastic:
      return "greedy_stochastic";
    case StrategyKind::kThresholdClassical:
      return "threshold_classical";
    case StrategyKind::kThresholdQuantum:
      return "threshold_quantum";
  }
  throw std::invalid_argument("strategy_name: unknown strategy kind");
}

TrialOutcome run_strategy_trial(StrategyKind kind,
                                const Eigen::VectorXd& pool_means,
                                double noise_sigma, double C, double beta,
                                double epsilon, RngStream& rng, Index m_max) {
  TrialOutcome out;
  switch (kind) {
    case StrategyKind::kGreedyDeterministic: {
      ScoreOracle oracle(pool_means, 0.0);  // the deterministic reading
      out.report = greedy_deterministic(oracle, C, beta, rng);
      break;
    }
    case StrategyKind::kGreedyStochastic: {
      ScoreOracle oracle(pool_means, noise_sigma);
      out.report = greedy_stochastic(oracle, C, beta, rng, m_max);
      break;
    }
    case StrategyKind::kThresholdClassical: {
      ScoreOracle oracle(pool_means, noise_sigma);
      out.report = threshold_classical(oracle, C, beta, epsilon, rng, m_max);
      break;
    }
    case StrategyKind::kThresholdQuantum: {
      out.report =
          threshold_quantum(pool_means, C, beta, epsilon, rng, noise_sigma);
      break;
    }
  }
  out.success = !out.report.failed && out.report.chosen >= 0 &&
                in_top_fraction(pool_means, out.report.chosen, C);
  return out;
}

// ---------------------------------------------------------------------------
// Complexity table
// ---------------------------------------------------------------------------

double fit_loglog_slope(const std::vector<double>& x,
                        const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2,
          "fit_loglog_slope: need matching samples of size >= 2");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0.0 && y[i] > 0.0,
            "fit_loglog_slope: entries must be positive");
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const auto n = static_cast<double>(x.size());
  const double denom = n * sxx - sx * sx;
  require(std::abs(denom) > 0.0, "fit_loglog_slope: x values must differ");
  return (n * sxy - sx * sy) / denom;
}

namespace {

std::string point_tag(double C, double beta, double epsilon, double sigma) {
  std::ostringstream out;
  out << C << '/' << beta << '/' << epsilon << '/' << sigma;
  return out.str();
}

}  // namespace

ComplexityTable complexity_table(const SweepGrid& grid) {
  require(!grid.C_values.empty() && !grid.beta_values.empty() &&
              !grid.epsilon_values.empty() && !grid.sigma_values.empty(),
          "complexity_table: every parameter list must be non-empty");
  require(grid.pool_size >= 2, "complexity_table: pool_size must be >= 2");
  require(grid.trials >= 1, "complexity_table: trials must be >= 1");

  const RngStream root(grid.seed);
  ComplexityTable table;

  const double c0 = grid.C_values.front();
  const double beta0 = grid.beta_values.front();
  const double eps0 = grid.epsilon_values.front();
  const double sigma0 = grid.sigma_values.front();
  std::vector<double> positive_sigmas;
  for (double s : grid.sigma_values)
    if (s > 0.0) positive_sigmas.push_back(s);

  // Mean calls / success rate over `trials` fresh pools at one grid point,
  // deduplicated across sweeps.
  std::map<std::string, std::size_t> row_index;
  auto evaluate = [&](StrategyKind kind, double C, double beta, double epsilon,
                      double sigma) -> std::size_t {
    const std::string name = strategy_name(kind);
    const std::string key = name + '/' + point_tag(C, beta, epsilon, sigma);
    if (const auto it = row_index.find(key); it != row_index.end())
      return it->second;
    double call_sum = 0.0;
    double success_sum = 0.0;
    for (Index t = 0; t < grid.trials; ++t) {
      RngStream rng = root.substream(key + "/trial" + std::to_string(t));
      Eigen::VectorXd means(grid.pool_size);
      for (Index i = 0; i < grid.pool_size; ++i) means[i] = rng.uniform();
      const TrialOutcome outcome = run_strategy_trial(
          kind, means, sigma, C, beta, epsilon, rng, grid.m_max);
      call_sum += static_cast<double>(outcome.report.calls);
      success_sum += outcome.success ? 1.0 : 0.0;
    }
    SweepRow row;
    row.strategy = name;
    row.C = C;
    row.beta = beta;
    row.epsilon = epsilon;
    row.sigma = sigma;
    row.trials = grid.trials;
    row.mean_calls = call_sum / static_cast<double>(grid.trials);
    row.success_rate = success_sum / static_cast<double>(grid.trials);
    table.rows.push_back(std::move(row));
    row_index.emplace(key, table.rows.size() - 1);
    return table.rows.size() - 1;
  };

  struct Sweep {
    StrategyKind kind;
    std::string parameter;
    std::vector<double> values;
  };
  std::vector<Sweep> sweeps;
  sweeps.push_back({StrategyKind::kGreedyDeterministic, "C", grid.C_values});
  sweeps.push_back(
      {StrategyKind::kGreedyDeterministic, "beta", grid.beta_values});
  if (!positive_sigmas.empty()) {
    sweeps.push_back({StrategyKind::kGreedyStochastic, "C", grid.C_values});
    sweeps.push_back(
        {StrategyKind::kGreedyStochastic, "beta", grid.beta_values});
    sweeps.push_back(
        {StrategyKind::kGreedyStochastic, "sigma", positive_sigmas});
  }
  sweeps.push_back({StrategyKind::kThresholdClassical, "C", grid.C_values});
  sweeps.push_back(
      {StrategyKind::kThresholdClassical, "beta", grid.beta_values});
  sweeps.push_back(
      {StrategyKind::kThresholdClassical, "epsilon", grid.epsilon_values});
  sweeps.push_back({StrategyKind::kThresholdQuantum, "C", grid.C_values});
  sweeps.push_back(
      {StrategyKind::kThresholdQuantum, "beta", grid.beta_values});
  sweeps.push_back(
      {StrategyKind::kThresholdQuantum, "epsilon", grid.epsilon_values});

  const double stoch_sigma =
      positive_sigmas.empty() ? 0.0 : positive_sigmas.front();
  for (const auto& sweep : sweeps) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (double value : sweep.values) {
      double C = c0, beta = beta0, epsilon = eps0, sigma = sigma0;
      if (sweep.kind == StrategyKind::kGreedyDeterministic) sigma = 0.0;
      if (sweep.kind == StrategyKind::kGreedyStochastic) sigma = stoch_sigma;
      if (sweep.parameter == "C") C = value;
      if (sweep.parameter == "beta") beta = value;
      if (sweep.parameter == "epsilon") epsilon = value;
      if (sweep.parameter == "sigma") sigma = value;
      const std::size_t row = evaluate(sweep.kind, C, beta, epsilon, sigma);
      if (std::find(xs.begin(), xs.end(), value) == xs.end()) {
        xs.push_back(value);
        ys.push_back(std::max(table.rows[row].mean_calls, 1e-12));
      }
    }
    if (xs.size() >= 2)
      table.slopes.emplace_back(strategy_name(sweep.kind), sweep.parameter,
                                fit_loglog_slope(xs, ys));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

std::string report_csv_header() {
  return "strategy,C,beta,epsilon,sigma,calls,success";
}

std::string report_to_csv_row(const StrategyReport& report) {
  std::ostringstream out;
  out << report.strategy << ',' << format_shortest(report.C) << ','
      << format_shortest(report.beta) << ','
      << format_shortest(report.epsilon) << ','
      << format_shortest(report.sigma) << ',' << report.calls << ','
      << (report.failed ? 0 : 1);
  return out.str();
}

std::string report_to_json(const StrategyReport& report) {
  json j;
  j["strategy"] = report.strategy;
  j["chosen"] = report.chosen;
  j["calls"] = report.calls;
  j["C"] = report.C;
  j["beta"] = report.beta;
  j["epsilon"] = report.epsilon;
  j["sigma"] = report.sigma;
  if (report.threshold) j["threshold"] = *report.threshold;
  if (report.percentile) j["percentile"] = *report.percentile;
  j["failed"] = report.failed;
  if (!report.failure_reason.empty())
    j["failure_reason"] = report.failure_reason;
  j["low_confidence_comparisons"] = report.low_confidence_comparisons;
  if (report.success_diagnostic)
    j["success_diagnostic"] = *report.success_diagnostic;
  return j.dump(2);
}

std::string ComplexityTable::to_csv() const {
  std::ostringstream out;
  out << report_csv_header() << '\n';
  for (const auto& row : rows) {
    out << row.strategy << ',' << format_shortest(row.C) << ','
        << format_shortest(row.beta) << ',' << format_shortest(row.epsilon)
        << ',' << format_shortest(row.sigma) << ','
        << format_shortest(row.mean_calls) << ','
        << format_shortest(row.success_rate) << '\n';
  }
  return out.str();
}

std::string ComplexityTable::to_json() const {
  json j;
  j["rows"] = json::array();
  for (const auto& row : rows) {
    json r;
    r["strategy"] = row.strategy;
    r["C"] = row.C;
    r["beta"] = row.beta;
    r["epsilon"] = row.epsilon;
    r["sigma"] = row.sigma;
    r["mean_calls"] = row.mean_calls;
    r["success_rate"] = row.success_rate;
    r["trials"] = row.trials;
    j["rows"].push_back(std::move(r));
  }
  j["slopes"] = json::array();
  for (const auto& [strategy, parameter, slope] : slopes) {
    json s;
    s["strategy"] = strategy;
    s["parameter"] = parameter;
    s["slope"] = slope;
    j["slopes"].push_back(std::move(s));
  }
  return j.dump(2);
}

}  // namespace mf
