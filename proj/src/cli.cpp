#include "marginforge/cli.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "marginforge/core_data.hpp"
#include "marginforge/dequant.hpp"
#include "marginforge/informativeness.hpp"
#include "marginforge/robustness.hpp"
#include "marginforge/rng.hpp"
#include "marginforge/strategies.hpp"
#include "marginforge/svm.hpp"

namespace mf {
namespace {

using nlohmann::json;

// Validation failure: maps to exit code 2.  Derives from invalid_argument so
// range checks raised inside the library modules land in the same bucket.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

const std::set<std::string>& key_registry() {
  static const std::set<std::string> keys = {
      // plumbing
      "command", "seed", "output_path", "csv_path",
      // dataset: file or inline manifold
      "dataset", "manifold.kind", "manifold.k", "manifold.m", "manifold.r_p",
      "manifold.samples_per_class",
      // backend
      "backend.kind", "backend.gamma", "backend.tau", "backend.kernel.kind",
      "backend.kernel.order", "backend.kernel.width",
      "backend.activation.kind", "backend.activation.scale",
      "backend.qsim.kappa_eff", "backend.qsim.eig_bits", "backend.qsim.ae.J",
      "backend.qsim.ae.k", "backend.qsim.ae.beta", "backend.qsim.ae.mode",
      "backend.dequant.solve.sigma_threshold", "backend.dequant.solve.epsilon",
      "backend.dequant.solve.delta", "backend.dequant.solve.ip_epsilon",
      "backend.dequant.solve.q", "backend.dequant.ip_epsilon",
      "backend.dequant.norm_epsilon", "backend.dequant.delta",
      // strategy parameters
      "C", "beta", "epsilon", "sigma", "strategy", "pool_size", "trials",
      "m_max",
      // score
      "candidate", "forced_class",
      // active-round
      "box_inflate",
      // dequant-check
      "matrix.rows", "matrix.cols", "matrix.rank", "matrix.noise",
      // certify
      "certify.delta", "certify.epsilon0", "certify.trials", "norm",
      // complexity-table
      "table.C_values", "table.beta_values", "table.epsilon_values",
      "table.sigma_values", "table.pool_size", "table.trials", "table.m_max"};
  return keys;
}

// Typed reads over the flat config map.  Every read (default or explicit) is
// recorded, so resolved() echoes exactly the values the run used.
class ConfigView {
 public:
  explicit ConfigView(json flat) : cfg_(std::move(flat)) {}

  bool has(const std::string& key) const { return cfg_.contains(key); }

  bool any_with_prefix(const std::string& prefix) const {
    for (const auto& item : cfg_.items()) {
      if (item.key().rfind(prefix, 0) == 0) return true;
    }
    return false;
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return record(key, fallback);
    const json& v = cfg_.at(key);
    if (!v.is_number()) throw type_error(key, v, "a number");
    resolved_[key] = v;
    return v.get<double>();
  }

  double require_number(const std::string& key) {
    if (!has(key)) throw missing(key);
    return number(key, 0.0);
  }

  Index integer(const std::string& key, Index fallback) {
    if (!has(key)) {
      resolved_[key] = static_cast<std::int64_t>(fallback);
      return fallback;
    }
    const json& v = cfg_.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
      throw type_error(key, v, "an integer");
    }
    resolved_[key] = v;
    return static_cast<Index>(v.get<std::int64_t>());
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) {
      resolved_[key] = fallback;
      return fallback;
    }
    const json& v = cfg_.at(key);
    if (!v.is_string()) throw type_error(key, v, "a string");
    resolved_[key] = v;
    return v.get<std::string>();
  }

  std::string require_text(const std::string& key) {
    if (!has(key)) throw missing(key);
    return text(key, "");
  }

  std::vector<double> number_list(const std::string& key,
                                  std::vector<double> fallback) {
    if (!has(key)) {
      resolved_[key] = fallback;
      return fallback;
    }
    const json& v = cfg_.at(key);
    if (!v.is_array()) throw type_error(key, v, "an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const json& e : v) {
      if (!e.is_number()) throw type_error(key, e, "an array of numbers");
      out.push_back(e.get<double>());
    }
    if (out.empty()) {
      throw ConfigError("config key '" + key + "' must not be empty");
    }
    resolved_[key] = v;
    return out;
  }

  std::vector<double> require_number_list(const std::string& key) {
    if (!has(key)) throw missing(key);
    return number_list(key, {});
  }

  std::uint64_t require_seed() {
    if (!has("seed")) {
      throw ConfigError(
          "missing seed: pass --seed or put a 'seed' key in the config");
    }
    const json& v = cfg_.at("seed");
    const bool ok = v.is_number_unsigned() ||
                    (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    if (!ok) throw type_error("seed", v, "a non-negative integer");
    resolved_["seed"] = v;
    return v.is_number_unsigned()
               ? v.get<std::uint64_t>()
               : static_cast<std::uint64_t>(v.get<std::int64_t>());
  }

  const json& resolved() const { return resolved_; }

 private:
  double record(const std::string& key, double fallback) {
    resolved_[key] = fallback;
    return fallback;
  }
  static ConfigError missing(const std::string& key) {
    return ConfigError("missing required config key '" + key + "'");
  }
  static ConfigError type_error(const std::string& key, const json& v,
                                const std::string& expected) {
    return ConfigError("config key '" + key + "': expected " + expected +
                       ", got " + v.type_name());
  }

  json cfg_;
  json resolved_ = json::object();
};

void check_range(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

// ---------------------------------------------------------------------------
// Shared resolvers.
// ---------------------------------------------------------------------------

ManifoldSpec resolve_manifold(ConfigView& cfg, const RngStream& root,
                              Index default_samples) {
  ManifoldSpec spec;
  const std::string kind = cfg.text("manifold.kind", "parallel-segments");
  if (kind == "parallel-segments") {
    spec.kind = ManifoldKind::kParallelSegments;
  } else if (kind == "concentric-arcs") {
    spec.kind = ManifoldKind::kConcentricArcs;
  } else if (kind == "parallel-disks") {
    spec.kind = ManifoldKind::kParallelDisks;
  } else {
    throw ConfigError("manifold.kind '" + kind +
                      "' is not one of parallel-segments | concentric-arcs | "
                      "parallel-disks");
  }
  const bool disks = spec.kind == ManifoldKind::kParallelDisks;
  spec.k = static_cast<int>(cfg.integer("manifold.k", disks ? 2 : 1));
  spec.m = static_cast<int>(cfg.integer("manifold.m", disks ? 3 : 2));
  spec.r_p = cfg.number("manifold.r_p", 1.0);
  spec.samples_per_class = static_cast<int>(
      cfg.integer("manifold.samples_per_class", default_samples));
  check_range(spec.r_p > 0.0, "manifold.r_p must be positive");
  check_range(spec.samples_per_class >= 1,
              "manifold.samples_per_class must be at least 1");
  spec.seed = root.substream("dataset").seed();
  return spec;
}

LabeledDataset resolve_dataset(ConfigView& cfg, const RngStream& root) {
  const bool has_file = cfg.has("dataset");
  const bool has_manifold = cfg.any_with_prefix("manifold.");
  if (has_file && has_manifold) {
    throw ConfigError(
        "provide either a 'dataset' file or inline 'manifold.*' keys, not "
        "both");
  }
  if (has_file) {
    const std::string path = cfg.require_text("dataset");
    std::ifstream in(path);
    if (!in) {
      throw ConfigError("dataset file '" + path + "' is unreadable");
    }
    try {
      return load_dataset(path);
    } catch (const std::exception& e) {
      throw ConfigError("dataset file '" + path + "': " + e.what());
    }
  }
  return generate_manifold(resolve_manifold(cfg, root, 10));
}

Backend resolve_backend(ConfigView& cfg) {
  Backend backend;
  const std::string kind = cfg.text("backend.kind", "exact");
  if (kind == "exact") {
    backend.kind = BackendKind::kExact;
  } else if (kind == "qsim") {
    backend.kind = BackendKind::kQsim;
  } else if (kind == "dequant") {
    backend.kind = BackendKind::kDequant;
  } else {
    throw ConfigError("backend.kind '" + kind +
                      "' is not one of exact | qsim | dequant");
  }

  const std::string kernel = cfg.text("backend.kernel.kind", "linear");
  if (kernel == "linear") {
    backend.kernel.kind = KernelKind::kLinear;
  } else if (kernel == "polynomial") {
    backend.kernel.kind = KernelKind::kPolynomial;
  } else if (kernel == "rbf") {
    backend.kernel.kind = KernelKind::kRbf;
  } else {
    throw ConfigError("backend.kernel.kind '" + kernel +
                      "' is not one of linear | polynomial | rbf");
  }
  backend.kernel.order =
      static_cast<int>(cfg.integer("backend.kernel.order", 2));
  backend.kernel.width = cfg.number("backend.kernel.width", 1.0);
  check_range(backend.kernel.order >= 1, "backend.kernel.order must be >= 1");
  check_range(backend.kernel.width > 0.0,
              "backend.kernel.width must be positive");
  if (backend.kind != BackendKind::kExact &&
      backend.kernel.kind != KernelKind::kLinear) {
    throw ConfigError("backend '" + kind + "' supports only the linear kernel");
  }

  backend.gamma = cfg.number("backend.gamma", kDefaultGamma);
  backend.tau = cfg.number("backend.tau", kDefaultHardTau);
  check_range(backend.gamma > 0.0, "backend.gamma must be positive");
  check_range(backend.tau > 0.5 && backend.tau <= 1.0,
              "backend.tau must lie in (0.5, 1]");

  const std::string act = cfg.text("backend.activation.kind", "linear-clip");
  if (act == "linear-clip") {
    backend.activation.kind = ActivationKind::kLinearClip;
  } else if (act == "sigmoid") {
    backend.activation.kind = ActivationKind::kSigmoid;
  } else {
    throw ConfigError("backend.activation.kind '" + act +
                      "' is not one of linear-clip | sigmoid");
  }
  backend.activation.scale = cfg.number("backend.activation.scale", 1.0);
  check_range(backend.activation.scale > 0.0,
              "backend.activation.scale must be positive");

  if (backend.kind == BackendKind::kQsim) {
    backend.qsim.kappa_eff =
        cfg.number("backend.qsim.kappa_eff", backend.qsim.kappa_eff);
    backend.qsim.eig_bits = static_cast<int>(
        cfg.integer("backend.qsim.eig_bits", backend.qsim.eig_bits));
    backend.qsim.ae.J =
        static_cast<int>(cfg.integer("backend.qsim.ae.J", backend.qsim.ae.J));
    backend.qsim.ae.k =
        static_cast<int>(cfg.integer("backend.qsim.ae.k", backend.qsim.ae.k));
    backend.qsim.ae.beta = cfg.number("backend.qsim.ae.beta", 1.0);
    const std::string mode = cfg.text("backend.qsim.ae.mode", "grid");
    if (mode == "grid") {
      backend.qsim.ae.mode = AeMode::kGrid;
    } else if (mode == "stochastic") {
      backend.qsim.ae.mode = AeMode::kStochastic;
    } else if (mode == "full-grover") {
      backend.qsim.ae.mode = AeMode::kFullGrover;
    } else {
      throw ConfigError("backend.qsim.ae.mode '" + mode +
                        "' is not one of grid | stochastic | full-grover");
    }
    check_range(backend.qsim.kappa_eff > 1.0,
                "backend.qsim.kappa_eff must exceed 1");
    check_range(backend.qsim.eig_bits >= 1 && backend.qsim.eig_bits <= 40,
                "backend.qsim.eig_bits must lie in [1, 40]");
  }

  if (backend.kind == BackendKind::kDequant) {
    DequantConfig& dq = backend.dequant;
    dq.solve.sigma_threshold = cfg.number(
        "backend.dequant.solve.sigma_threshold", dq.solve.sigma_threshold);
    dq.solve.epsilon =
        cfg.number("backend.dequant.solve.epsilon", dq.solve.epsilon);
    dq.solve.delta = cfg.number("backend.dequant.solve.delta", dq.solve.delta);
    dq.solve.ip_epsilon =
        cfg.number("backend.dequant.solve.ip_epsilon", dq.solve.ip_epsilon);
    dq.solve.q = cfg.integer("backend.dequant.solve.q", dq.solve.q);
    dq.ip_epsilon = cfg.number("backend.dequant.ip_epsilon", dq.ip_epsilon);
    dq.norm_epsilon =
        cfg.number("backend.dequant.norm_epsilon", dq.norm_epsilon);
    dq.delta = cfg.number("backend.dequant.delta", dq.delta);
    check_range(dq.solve.sigma_threshold > 0.0,
                "backend.dequant.solve.sigma_threshold must be positive");
    check_range(dq.solve.epsilon > 0.0 && dq.solve.epsilon < 1.0,
                "backend.dequant.solve.epsilon must lie in (0, 1)");
    check_range(dq.solve.delta > 0.0 && dq.solve.delta < 1.0,
                "backend.dequant.solve.delta must lie in (0, 1)");
    check_range(dq.solve.ip_epsilon > 0.0,
                "backend.dequant.solve.ip_epsilon must be positive");
    check_range(dq.solve.q >= 0, "backend.dequant.solve.q must be >= 0");
    check_range(dq.ip_epsilon > 0.0,
                "backend.dequant.ip_epsilon must be positive");
    check_range(dq.norm_epsilon > 0.0,
                "backend.dequant.norm_epsilon must be positive");
    check_range(dq.delta > 0.0 && dq.delta < 1.0,
                "backend.dequant.delta must lie in (0, 1)");
  }
  return backend;
}

PNorm resolve_norm(ConfigView& cfg) {
  const std::string name = cfg.text("norm", "l2");
  if (name == "l1") return PNorm::l1();
  if (name == "l2") return PNorm::l2();
  if (name == "linf") return PNorm::linf();
  throw ConfigError("norm '" + name + "' is not one of l1 | l2 | linf");
}

json score_to_json(const InformativenessScore& s) {
  json out;
  out["p_c"] = s.p_c;
  out["w_norm"] = s.w_norm;
  out["value"] = s.value;
  out["hypothesized_class"] = s.hypothesized_class;
  return out;
}

json point_to_json(const Eigen::VectorXd& x) {
  json arr = json::array();
  for (Index i = 0; i < x.size(); ++i) arr.push_back(x[i]);
  return arr;
}

// ---------------------------------------------------------------------------
// Command handlers.  Each returns the "result" payload; CSV-capable commands
// also fill *csv when a destination was requested.
// ---------------------------------------------------------------------------

json cmd_score(ConfigView& cfg, const RngStream& root) {
  const LabeledDataset ds = resolve_dataset(cfg, root);
  const Backend backend = resolve_backend(cfg);
  const std::vector<double> raw = cfg.require_number_list("candidate");
  if (static_cast<Index>(raw.size()) != ds.dim) {
    throw ConfigError("candidate has " + std::to_string(raw.size()) +
                      " coordinates but the dataset dimension is " +
                      std::to_string(ds.dim));
  }
  Eigen::VectorXd x =
      Eigen::Map<const Eigen::VectorXd>(raw.data(), static_cast<Index>(raw.size()));
  RngStream rng = root.substream("score");
  InformativenessScore s;
  if (cfg.has("forced_class")) {
    const Index cls = cfg.integer("forced_class", 0);
    check_range(cls == 0 || cls == 1, "forced_class must be 0 or 1");
    s = score(backend, ds, x, static_cast<ClassId>(cls), rng);
  } else {
    s = score(backend, ds, x, rng);
  }
  return score_to_json(s);
}

json cmd_active_round(ConfigView& cfg, const RngStream& root) {
  const LabeledDataset ds = resolve_dataset(cfg, root);
  const Backend backend = resolve_backend(cfg);
  const double C = cfg.number("C", 2.0);
  const double beta = cfg.number("beta", 3.0);
  const double inflate = cfg.number("box_inflate", 0.2);
  check_range(C >= 1.0, "C must be at least 1");
  check_range(beta > 0.0, "beta must be positive");
  check_range(inflate >= 0.0, "box_inflate must be >= 0");
  CandidateSampler sampler = CandidateSampler::bounding_box(ds, inflate);
  RngStream rng = root.substream("active-round");
  const BestOfResult r = best_of_c(backend, ds, sampler, C, beta, rng);
  json out;
  out["c"] = static_cast<std::int64_t>(r.counter.c);
  out["chosen"] = point_to_json(r.point);
  out["best"] = score_to_json(r.best);
  out["counter"] = json::parse(r.counter.to_json_with_best(r.best.value));
  return out;
}

json cmd_strategies(ConfigView& cfg, const RngStream& root, std::string* csv) {
  const std::string name = cfg.require_text("strategy");
  StrategyKind kind;
  if (name == "greedy_deterministic") {
    kind = StrategyKind::kGreedyDeterministic;
  } else if (name == "greedy_stochastic") {
    kind = StrategyKind::kGreedyStochastic;
  } else if (name == "threshold_classical") {
    kind = StrategyKind::kThresholdClassical;
  } else if (name == "threshold_quantum") {
    kind = StrategyKind::kThresholdQuantum;
  } else {
    throw ConfigError(
        "strategy '" + name +
        "' is not one of greedy_deterministic | greedy_stochastic | "
        "threshold_classical | threshold_quantum");
  }
  const bool threshold = kind == StrategyKind::kThresholdClassical ||
                         kind == StrategyKind::kThresholdQuantum;
  const double C = cfg.number("C", 8.0);
  const double beta = cfg.number("beta", 3.0);
  const double epsilon = cfg.number("epsilon", 0.2);
  const double sigma =
      cfg.number("sigma", kind == StrategyKind::kGreedyStochastic ? 0.1 : 0.0);
  const Index pool_size = cfg.integer("pool_size", 1024);
  const Index trials = cfg.integer("trials", 1);
  const Index m_max = cfg.integer("m_max", 100000);
  check_range(threshold ? C > 1.0 : C >= 1.0,
              threshold ? "C must exceed 1 for threshold strategies"
                        : "C must be at least 1");
  check_range(beta > 0.0, "beta must be positive");
  if (threshold) {
    check_range(epsilon > 0.0 && epsilon < 1.0,
                "epsilon must lie in (0, 1) for threshold strategies");
  }
  check_range(sigma >= 0.0, "sigma must be >= 0");
  if (kind == StrategyKind::kGreedyStochastic) {
    check_range(sigma > 0.0, "greedy_stochastic needs sigma > 0");
  }
  check_range(pool_size >= 2, "pool_size must be at least 2");
  if (kind == StrategyKind::kThresholdQuantum) {
    const bool pow2 = pool_size > 0 && (pool_size & (pool_size - 1)) == 0;
    check_range(pow2 && pool_size <= 4096,
                "threshold_quantum needs pool_size a power of two <= 4096");
  }
  check_range(trials >= 1 && trials <= 1000000,
              "trials must lie in [1, 1000000]");
  check_range(m_max >= 1, "m_max must be at least 1");

  const RngStream srng = root.substream("strategies");
  json reports = json::array();
  std::ostringstream rows;
  rows << report_csv_header() << '\n';
  long long successes = 0;
  double total_calls = 0.0;
  for (Index t = 0; t < trials; ++t) {
    RngStream trng = srng.substream("trial" + std::to_string(t));
    Eigen::VectorXd pool(pool_size);
    for (Index i = 0; i < pool_size; ++i) pool[i] = trng.uniform();
    const TrialOutcome o =
        run_strategy_trial(kind, pool, sigma, C, beta, epsilon, trng, m_max);
    successes += o.success ? 1 : 0;
    total_calls += static_cast<double>(o.report.calls);
    json rep = json::parse(report_to_json(o.report));
    rep["success"] = o.success;
    reports.push_back(std::move(rep));
    rows << report_to_csv_row(o.report) << '\n';
  }
  if (csv != nullptr) *csv = rows.str();
  json out;
  out["strategy"] = name;
  out["trials"] = static_cast<std::int64_t>(trials);
  out["success_rate"] =
      static_cast<double>(successes) / static_cast<double>(trials);
  out["mean_calls"] = total_calls / static_cast<double>(trials);
  out["reports"] = std::move(reports);
  return out;
}

json cmd_dequant_check(ConfigView& cfg, const RngStream& root) {
  const Index rows = cfg.integer("matrix.rows", 32);
  const Index cols = cfg.integer("matrix.cols", 32);
  const Index rank = cfg.integer("matrix.rank", 4);
  const double noise = cfg.number("matrix.noise", 0.01);
  check_range(rows >= 2 && cols >= 2, "matrix.rows and matrix.cols must be >= 2");
  check_range(rank >= 0 && rank <= std::min(rows, cols),
              "matrix.rank must lie in [0, min(rows, cols)]");
  check_range(noise >= 0.0, "matrix.noise must be >= 0");

  RngStream rng = root.substream("dequant-check");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, cols);
  if (rank > 0) {
    Eigen::MatrixXd left(rows, rank);
    Eigen::MatrixXd right(rank, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < rank; ++j) left(i, j) = rng.normal();
    }
    for (Index i = 0; i < rank; ++i) {
      for (Index j = 0; j < cols; ++j) right(i, j) = rng.normal();
    }
    A = left * right / std::sqrt(static_cast<double>(rank));
  }
  if (noise > 0.0) {
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) A(i, j) += noise * rng.normal();
    }
  }

  // The sketch theorem admits a slack of at most sqrt(sigma_threshold /
  // |A|_F) / 4, so the default threshold tracks the realized Frobenius norm:
  // 0.17 |A|_F keeps a slack of 0.1 admissible for every seed while sitting
  // far above the additive-noise floor. The value actually used is echoed in
  // the resolved config either way.
  DequantParams params;
  params.sigma_threshold = cfg.number("backend.dequant.solve.sigma_threshold",
                                      0.17 * A.norm());
  params.epsilon = cfg.number("backend.dequant.solve.epsilon", 0.1);
  params.delta = cfg.number("backend.dequant.solve.delta", 0.1);
  params.q = cfg.integer("backend.dequant.solve.q", params.q);
  check_range(params.sigma_threshold > 0.0,
              "backend.dequant.solve.sigma_threshold must be positive");
  check_range(params.epsilon > 0.0 && params.epsilon < 1.0,
              "backend.dequant.solve.epsilon must lie in (0, 1)");
  check_range(params.delta > 0.0 && params.delta < 1.0,
              "backend.dequant.solve.delta must lie in (0, 1)");
  check_range(params.q >= 0, "backend.dequant.solve.q must be >= 0");

  const SqMatrix sq(A);
  const LowRankFactors f = fkv_low_rank(sq, params.sigma_threshold,
                                        params.epsilon, params.delta, rng,
                                        params.q);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(rows, cols);
  if (!f.empty()) D = A * f.V * f.V.transpose();
  const double err = (A - D).squaredNorm();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const Eigen::VectorXd& sv = svd.singularValues();
  double best_rank_err = 0.0;
  for (Index i = f.l; i < sv.size(); ++i) best_rank_err += sv[i] * sv[i];
  const double slack = params.epsilon * A.squaredNorm();

  json out;
  out["kept_rank"] = static_cast<std::int64_t>(f.l);
  out["sketch_rows"] = static_cast<std::int64_t>(f.q);
  out["frob_error_sq"] = err;
  out["best_rank_error_sq"] = best_rank_err;
  out["epsilon_slack"] = slack;
  out["bound"] = best_rank_err + slack;
  out["guarantee_met"] = err <= best_rank_err + slack;
  return out;
}

json cmd_certify(ConfigView& cfg, const RngStream& root, std::string* csv) {
  if (cfg.has("dataset")) {
    throw ConfigError(
        "certify needs an analytic manifold (manifold.* keys), not a dataset "
        "file");
  }
  const ManifoldSpec spec = resolve_manifold(cfg, root, 256);
  const double delta = cfg.require_number("certify.delta");
  const double epsilon0 = cfg.number("certify.epsilon0", 0.2);
  const Index trials_per_class = cfg.integer("certify.trials", 1000);
  const PNorm norm = resolve_norm(cfg);
  check_range(delta > 0.0, "certify.delta must be positive");
  check_range(epsilon0 >= 0.0, "certify.epsilon0 must be >= 0");
  check_range(trials_per_class >= 1, "certify.trials must be at least 1");

  const LabeledDataset ds = generate_manifold(spec);
  std::vector<Eigen::VectorXd> class0, class1;
  for (const LabeledPoint& p : ds.points) {
    const std::optional<ClassId> cls = hard_membership(p.c);
    if (!cls) continue;
    (*cls == 0 ? class0 : class1).push_back(p.x);
  }
  const Cover cover0 = build_delta_cover(class0, delta, norm, 0);
  const Cover cover1 = build_delta_cover(class1, delta, norm, 1);
  const CertificationReport rep =
      certify(spec, cover0, cover1, epsilon0, spec.r_p, trials_per_class,
              root.substream("certify").seed());
  if (csv != nullptr) *csv = certification_report_to_csv(rep);
  json out = json::parse(certification_report_to_json(rep));
  out["cover0_centers"] = static_cast<std::int64_t>(cover0.centers.size());
  out["cover1_centers"] = static_cast<std::int64_t>(cover1.centers.size());
  return out;
}

json cmd_complexity_table(ConfigView& cfg, const RngStream& root,
                          std::string* csv) {
  SweepGrid grid;
  grid.C_values = cfg.number_list("table.C_values", grid.C_values);
  grid.beta_values = cfg.number_list("table.beta_values", grid.beta_values);
  grid.epsilon_values =
      cfg.number_list("table.epsilon_values", grid.epsilon_values);
  grid.sigma_values = cfg.number_list("table.sigma_values", grid.sigma_values);
  grid.pool_size = cfg.integer("table.pool_size", grid.pool_size);
  grid.trials = cfg.integer("table.trials", grid.trials);
  grid.m_max = cfg.integer("table.m_max", grid.m_max);
  grid.seed = root.substream("complexity-table").seed();
  const ComplexityTable table = complexity_table(grid);
  if (csv != nullptr) *csv = table.to_csv();
  return json::parse(table.to_json());
}

// ---------------------------------------------------------------------------
// Argument and config assembly.
// ---------------------------------------------------------------------------

const std::set<std::string>& command_set() {
  static const std::set<std::string> commands = {
      "score",        "active-round", "strategies",
      "dequant-check", "certify",      "complexity-table"};
  return commands;
}

bool command_writes_csv(const std::string& command) {
  return command == "strategies" || command == "certify" ||
         command == "complexity-table";
}

json parse_override_value(const std::string& text) {
  try {
    json v = json::parse(text);
    if (v.is_number() || v.is_boolean() || v.is_string() || v.is_array()) {
      return v;
    }
  } catch (const json::parse_error&) {
    // fall through: treat the raw text as a string value
  }
  return json(text);
}

std::string assemble_report(const std::string& command, const json& resolved,
                            const char* payload_key, const json& payload) {
  json report;
  report["schema_version"] = kSchemaVersion;
  report["version"] = kVersionString;
  report["command"] = command;
  report["config"] = resolved;
  report[payload_key] = payload;
  return report.dump(2) + "\n";
}

}  // namespace

CliOutcome run_cli(const std::vector<std::string>& args) {
  CliOutcome outcome;

  std::string command, config_path, out_path, csv_path;
  std::uint64_t seed_flag = 0;
  double C_flag = 0.0, beta_flag = 0.0, epsilon_flag = 0.0, sigma_flag = 0.0;
  std::vector<std::string> set_flags;

  CLI::App app{"quantile-sampling experiment runner"};
  app.name("margin-forge");
  app.add_option("command", command,
                 "score | active-round | strategies | dequant-check | "
                 "certify | complexity-table");
  app.add_option("--config", config_path, "flat JSON config file");
  auto* seed_opt = app.add_option("--seed", seed_flag, "top-level RNG seed");
  auto* c_opt = app.add_option("--C", C_flag, "inverse top-fraction target");
  auto* beta_opt = app.add_option("--beta", beta_flag, "confidence exponent");
  auto* eps_opt = app.add_option("--epsilon", epsilon_flag,
                                 "threshold accuracy parameter");
  auto* sigma_opt = app.add_option("--sigma", sigma_flag, "oracle noise level");
  auto* out_opt = app.add_option("--out", out_path, "report destination");
  auto* csv_opt = app.add_option("--csv", csv_path, "CSV destination");
  app.add_option("--set", set_flags,
                 "extra key=value overrides (repeatable; value parsed as "
                 "JSON, else taken as a string)");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("margin-forge");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    outcome.exit_code = 0;
    outcome.message = app.help();
    return outcome;
  } catch (const CLI::ParseError& e) {
    outcome.exit_code = 2;
    outcome.message = e.what();
    return outcome;
  }

  json flat = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      outcome.exit_code = 2;
      outcome.message = "config file '" + config_path + "' is unreadable";
      return outcome;
    }
    try {
      in >> flat;
    } catch (const json::parse_error& e) {
      outcome.exit_code = 2;
      outcome.message = "config file '" + config_path + "': " + e.what();
      return outcome;
    }
    if (!flat.is_object()) {
      outcome.exit_code = 2;
      outcome.message =
          "config file '" + config_path + "' must hold a JSON object";
      return outcome;
    }
  }

  // Overrides: --set pairs first, dedicated flags last (strongest).
  for (const std::string& kv : set_flags) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      outcome.exit_code = 2;
      outcome.message = "override '" + kv + "' must have the form key=value";
      return outcome;
    }
    flat[kv.substr(0, eq)] = parse_override_value(kv.substr(eq + 1));
  }
  if (seed_opt->count() > 0) flat["seed"] = seed_flag;
  if (c_opt->count() > 0) flat["C"] = C_flag;
  if (beta_opt->count() > 0) flat["beta"] = beta_flag;
  if (eps_opt->count() > 0) flat["epsilon"] = epsilon_flag;
  if (sigma_opt->count() > 0) flat["sigma"] = sigma_flag;
  if (out_opt->count() > 0) flat["output_path"] = out_path;
  if (csv_opt->count() > 0) flat["csv_path"] = csv_path;

  // Structural validation: flat object, known keys only.
  std::string unknown;
  for (const auto& item : flat.items()) {
    if (item.value().is_object()) {
      outcome.exit_code = 2;
      outcome.message = "config key '" + item.key() +
                        "' holds a nested object; flatten it with dotted "
                        "keys like '" +
                        item.key() + ".subkey'";
      return outcome;
    }
    if (key_registry().count(item.key()) == 0) {
      if (!unknown.empty()) unknown += ", ";
      unknown += "'" + item.key() + "'";
    }
  }
  if (!unknown.empty()) {
    outcome.exit_code = 2;
    outcome.message = "unknown config key " + unknown;
    return outcome;
  }

  // The command comes from the positional argument, falling back to the file.
  if (command.empty() && flat.contains("command")) {
    const json& v = flat.at("command");
    if (!v.is_string()) {
      outcome.exit_code = 2;
      outcome.message = "config key 'command': expected a string";
      return outcome;
    }
    command = v.get<std::string>();
  }
  if (command.empty()) {
    outcome.exit_code = 2;
    outcome.message =
        "no command given: pass one of score | active-round | strategies | "
        "dequant-check | certify | complexity-table";
    return outcome;
  }
  if (command_set().count(command) == 0) {
    outcome.exit_code = 2;
    outcome.message =
        "command '" + command +
        "' is not one of score | active-round | strategies | dequant-check | "
        "certify | complexity-table";
    return outcome;
  }

  // Artifact destinations are plumbing, not experiment configuration: they
  // are peeled off before the echo so reports stay location-independent.
  if (flat.contains("output_path")) {
    const json& v = flat.at("output_path");
    if (!v.is_string()) {
      outcome.exit_code = 2;
      outcome.message = "config key 'output_path': expected a string";
      return outcome;
    }
    outcome.output_path = v.get<std::string>();
    flat.erase("output_path");
  }
  if (flat.contains("csv_path")) {
    const json& v = flat.at("csv_path");
    if (!v.is_string()) {
      outcome.exit_code = 2;
      outcome.message = "config key 'csv_path': expected a string";
      return outcome;
    }
    outcome.csv_path = v.get<std::string>();
    flat.erase("csv_path");
  }
  flat.erase("command");

  ConfigView cfg(std::move(flat));
  try {
    if (!outcome.csv_path.empty() && !command_writes_csv(command)) {
      throw ConfigError("command '" + command +
                        "' writes no CSV; remove --csv / csv_path");
    }
    const std::uint64_t seed = cfg.require_seed();
    const RngStream root(seed);
    std::string* csv = outcome.csv_path.empty() ? nullptr : &outcome.csv;

    json payload;
    if (command == "score") {
      payload = cmd_score(cfg, root);
    } else if (command == "active-round") {
      payload = cmd_active_round(cfg, root);
    } else if (command == "strategies") {
      payload = cmd_strategies(cfg, root, csv);
    } else if (command == "dequant-check") {
      payload = cmd_dequant_check(cfg, root);
    } else if (command == "certify") {
      payload = cmd_certify(cfg, root, csv);
    } else {
      payload = cmd_complexity_table(cfg, root, csv);
    }
    outcome.exit_code = 0;
    outcome.report = assemble_report(command, cfg.resolved(), "result", payload);
  } catch (const std::invalid_argument& e) {
    outcome.exit_code = 2;
    outcome.message = e.what();
    outcome.report.clear();
    outcome.csv.clear();
  } catch (const std::exception& e) {
    outcome.exit_code = 3;
    outcome.message = e.what();
    json error;
    error["type"] = "runtime";
    error["message"] = e.what();
    outcome.report = assemble_report(command, cfg.resolved(), "error", error);
    outcome.csv.clear();
  }
  return outcome;
}

int cli_main(int argc, const char* const* argv) {
  std::vector<std::string> args;
  args.reserve(argc > 0 ? static_cast<std::size_t>(argc - 1) : 0);
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  const CliOutcome outcome = run_cli(args);

  if (outcome.exit_code == 2) {
    std::cerr << "config error: " << outcome.message << "\n";
    return 2;
  }
  if (outcome.report.empty() && !outcome.message.empty()) {
    std::cout << outcome.message;  // --help text
    return outcome.exit_code;
  }

  if (!outcome.report.empty()) {
    if (outcome.output_path.empty()) {
      std::cout << outcome.report;
    } else {
      std::ofstream out(outcome.output_path);
      if (!out) {
        std::cerr << "config error: report destination '"
                  << outcome.output_path << "' is unwritable\n";
        return 2;
      }
      out << outcome.report;
    }
  }
  if (!outcome.csv.empty() && !outcome.csv_path.empty()) {
    std::ofstream out(outcome.csv_path);
    if (!out) {
      std::cerr << "config error: CSV destination '" << outcome.csv_path
                << "' is unwritable\n";
      return 2;
    }
    out << outcome.csv;
  }
  if (outcome.exit_code == 3) {
    std::cerr << "runtime failure: " << outcome.message << "\n";
  }
  return outcome.exit_code;
}

}  // namespace mf
