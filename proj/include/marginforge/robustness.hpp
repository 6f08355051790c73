// Covering-based robustness certification for two-class manifolds.
//
// A delta-cover of a class is a subset of its sample points such that every
// sample lies within delta of some chosen center.  Classifying by nearest
// labeled cover center is provably correct on the epsilon0-neighborhood of
// each class whenever delta is small enough relative to the interclass
// separation r_p; certify() measures this empirically with exact analytic
// manifolds so the geometry has no estimation error.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "marginforge/core_data.hpp"

namespace mf {

// Cover of one or more classes: center i carries label labels[i].  Built
// covers guarantee (brute-force verified) that every generating sample of the
// covered class is within delta of a same-class center.
struct Cover {
  std::vector<Eigen::VectorXd> centers;
  std::vector<ClassId> labels;
  double delta = 0.0;
  PNorm norm = PNorm::l2();
};

// Greedy maximum-new-coverage center selection over the sample set (each step
// picks the sample whose delta-ball covers the most still-uncovered samples,
// ties to the lowest index), then a brute-force scan verifies the cover
// property.  Requires the samples to be dense relative to delta (maximum
// nearest-neighbor gap below delta/2); sparser sets throw, since no subset of
// them could certifiably cover the underlying class.
Cover build_delta_cover(const std::vector<Eigen::VectorXd>& class_samples,
                        double delta, PNorm norm, ClassId label = 0);

// `count` points within p-distance epsilon0 of the class manifold: a uniform
// manifold point plus a uniform perturbation from the epsilon0-ball of the
// given norm.  Deterministic under seed.
std::vector<Eigen::VectorXd> sample_epsilon_neighborhood(
    const ManifoldSpec& spec, ClassId cls, double epsilon0, Index count,
    std::uint64_t seed, PNorm norm = PNorm::l2());

// 1-nearest-neighbor over the union of both covers' centers; ties go to the
// earlier center (cover0 is scanned first).
ClassId classify_nearest_center(const Cover& cover0, const Cover& cover1,
                                const Eigen::VectorXd& x);

struct CertificationReport {
  double epsilon0 = 0.0;
  double r_p = 0.0;
  double delta = 0.0;
  Index trials = 0;  // total classified samples, both classes combined
  Index misclassified = 0;
  bool theorem_condition_met = false;  // delta < r_p - epsilon0, exact reals
};

// Draws trials_per_class points from each class's epsilon0-neighborhood and
// classifies them by nearest cover center.  Inside the certified regime the
// count must come back zero; outside it the report simply records what was
// observed.  Both covers must share delta and norm.
CertificationReport certify(const ManifoldSpec& spec, const Cover& cover0,
                            const Cover& cover1, double epsilon0, double r_p,
                            Index trials_per_class, std::uint64_t seed);

std::string certification_report_to_json(const CertificationReport& report);
// Two-line CSV: header plus one row.
std::string certification_report_to_csv(const CertificationReport& report);

}  // namespace mf
