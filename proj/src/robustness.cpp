#include "marginforge/robustness.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace mf {

namespace {

using nlohmann::json;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Uniform intrinsic parameters matching the manifold generator's domains.
Eigen::VectorXd sample_params(const ManifoldSpec& spec, RngStream& rng) {
  Eigen::VectorXd params(spec.k);
  switch (spec.kind) {
    case ManifoldKind::kParallelSegments:
      params[0] = rng.uniform();
      break;
    case ManifoldKind::kConcentricArcs:
      params[0] = rng.uniform() * std::numbers::pi / 2;
      break;
    case ManifoldKind::kParallelDisks:
      params[0] = std::sqrt(rng.uniform());  // uniform over the disk area
      params[1] = rng.uniform() * 2 * std::numbers::pi;
      break;
  }
  return params;
}

// Uniform draw from the radius-epsilon ball of the given p-norm.
Eigen::VectorXd ball_sample(int dim, double epsilon, PNorm norm,
                            RngStream& rng) {
  Eigen::VectorXd pert = Eigen::VectorXd::Zero(dim);
  if (epsilon <= 0.0) return pert;
  if (std::isinf(norm.p)) {
    for (int i = 0; i < dim; ++i) pert[i] = (2.0 * rng.uniform() - 1.0) * epsilon;
    return pert;
  }
  double length = 0.0;
  if (norm.p == 2.0) {
    for (int i = 0; i < dim; ++i) pert[i] = rng.normal();
    length = pert.norm();
  } else {  // p == 1: iid Laplace directions are uniform on the L1 sphere
    for (int i = 0; i < dim; ++i) {
      const double magnitude = -std::log(1.0 - rng.uniform());
      pert[i] = rng.bernoulli(0.5) ? magnitude : -magnitude;
    }
    length = pert.cwiseAbs().sum();
  }
  if (length == 0.0) return Eigen::VectorXd::Zero(dim);
  const double radius =
      epsilon * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
  return pert * (radius / length);
}

}  // namespace

Cover build_delta_cover(const std::vector<Eigen::VectorXd>& class_samples,
                        double delta, PNorm norm, ClassId label) {
  require(delta > 0.0, "cover: delta must be positive");
  require(!class_samples.empty(), "cover: the sample set is empty");
  const auto n = static_cast<Index>(class_samples.size());
  const Index dim = class_samples.front().size();
  for (const auto& s : class_samples)
    require(s.size() == dim, "cover: samples must share one dimension");

  // Density precondition: a set whose largest nearest-neighbor gap reaches
  // delta/2 cannot certify that the underlying class is covered, only that
  // the samples are.
  if (n >= 2) {
    double max_gap = 0.0;
    for (Index i = 0; i < n; ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        nearest = std::min(
            nearest, p_distance(class_samples[static_cast<std::size_t>(i)],
                                class_samples[static_cast<std::size_t>(j)],
                                norm));
      }
      max_gap = std::max(max_gap, nearest);
    }
    if (!(max_gap < delta / 2.0)) {
      std::ostringstream msg;
      msg << "cover: samples too sparse to certify covering (max "
             "nearest-neighbor gap "
          << max_gap << " is not below delta/2 = " << delta / 2.0 << ")";
      throw std::runtime_error(msg.str());
    }
  }

  // Which samples each candidate center would cover.
  std::vector<std::vector<Index>> within(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (p_distance(class_samples[static_cast<std::size_t>(i)],
                     class_samples[static_cast<std::size_t>(j)],
                     norm) <= delta)
        within[static_cast<std::size_t>(i)].push_back(j);
    }
  }

  // Greedy maximum-new-coverage selection, ties to the lowest index.
  std::vector<bool> covered(static_cast<std::size_t>(n), false);
  Index uncovered = n;
  Cover cover;
  cover.delta = delta;
  cover.norm = norm;
  while (uncovered > 0) {
    Index best = -1;
    Index best_gain = 0;
    for (Index i = 0; i < n; ++i) {
      Index gain = 0;
      for (Index j : within[static_cast<std::size_t>(i)])
        gain += covered[static_cast<std::size_t>(j)] ? 0 : 1;
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    // An uncovered sample always covers at least itself.
    if (best < 0) throw std::logic_error("cover: greedy selection stalled");
    cover.centers.push_back(class_samples[static_cast<std::size_t>(best)]);
    cover.labels.push_back(label);
    for (Index j : within[static_cast<std::size_t>(best)]) {
      if (!covered[static_cast<std::size_t>(j)]) {
        covered[static_cast<std::size_t>(j)] = true;
        --uncovered;
      }
    }
  }

  // Brute-force verification of the cover property.
  for (Index j = 0; j < n; ++j) {
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& center : cover.centers)
      nearest = std::min(
          nearest,
          p_distance(class_samples[static_cast<std::size_t>(j)], center, norm));
    if (!(nearest <= delta))
      throw std::logic_error("cover: verification scan found an uncovered sample");
  }
  return cover;
}

std::vector<Eigen::VectorXd> sample_epsilon_neighborhood(
    const ManifoldSpec& spec, ClassId cls, double epsilon0, Index count,
    std::uint64_t seed, PNorm norm) {
  require(cls == 0 || cls == 1, "neighborhood: class must be 0 or 1");
  require(epsilon0 >= 0.0, "neighborhood: epsilon0 must be >= 0");
  require(count >= 0, "neighborhood: count must be >= 0");
  RngStream rng(seed);
  std::vector<Eigen::VectorXd> points;
  points.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    const Eigen::VectorXd base = manifold_point(spec, cls, sample_params(spec, rng));
    points.push_back(base + ball_sample(spec.m, epsilon0, norm, rng));
  }
  return points;
}

ClassId classify_nearest_center(const Cover& cover0, const Cover& cover1,
                                const Eigen::VectorXd& x) {
  require(!cover0.centers.empty() && !cover1.centers.empty(),
          "classify: both covers must be non-empty");
  require(cover0.norm.p == cover1.norm.p,
          "classify: covers must share one norm");
  double best = std::numeric_limits<double>::infinity();
  ClassId label = 0;
  for (const Cover* cover : {&cover0, &cover1}) {
    for (std::size_t i = 0; i < cover->centers.size(); ++i) {
      const double d = p_distance(cover->centers[i], x, cover->norm);
      if (d < best) {
        best = d;
        label = cover->labels[i];
      }
    }
  }
  return label;
}

CertificationReport certify(const ManifoldSpec& spec, const Cover& cover0,
                            const Cover& cover1, double epsilon0, double r_p,
                            Index trials_per_class, std::uint64_t seed) {
  require(!cover0.centers.empty() && !cover1.centers.empty(),
          "certify: both covers must be non-empty");
  require(cover0.delta == cover1.delta, "certify: covers must share delta");
  require(cover0.norm.p == cover1.norm.p, "certify: covers must share a norm");
  require(epsilon0 >= 0.0, "certify: epsilon0 must be >= 0");
  require(r_p > 0.0, "certify: r_p must be positive");
  require(trials_per_class >= 1, "certify: trials_per_class must be >= 1");

  CertificationReport report;
  report.epsilon0 = epsilon0;
  report.r_p = r_p;
  report.delta = cover0.delta;
  report.trials = 2 * trials_per_class;
  report.theorem_condition_met = cover0.delta < r_p - epsilon0;

  for (ClassId cls = 0; cls < kClassCount; ++cls) {
    // Distinct per-class sampling seeds derived from the caller's seed.
    const std::uint64_t class_seed =
        seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(cls + 1));
    const auto points = sample_epsilon_neighborhood(
        spec, cls, epsilon0, trials_per_class, class_seed, cover0.norm);
    for (const auto& x : points)
      if (classify_nearest_center(cover0, cover1, x) != cls)
        ++report.misclassified;
  }
  return report;
}

std::string certification_report_to_json(const CertificationReport& report) {
  json j;
  j["epsilon0"] = report.epsilon0;
  j["r_p"] = report.r_p;
  j["delta"] = report.delta;
  j["trials"] = report.trials;
  j["misclassified"] = report.misclassified;
  j["theorem_condition_met"] = report.theorem_condition_met;
  return j.dump(2);
}

std::string certification_report_to_csv(const CertificationReport& report) {
  std::ostringstream out;
  out << "epsilon0,r_p,delta,trials,misclassified,theorem_condition_met\n"
      << format_shortest(report.epsilon0) << ',' << format_shortest(report.r_p)
      << ',' << format_shortest(report.delta) << ',' << report.trials << ','
      << report.misclassified << ','
      << (report.theorem_condition_met ? 1 : 0) << '\n';
  return out.str();
}

}  // namespace mf
