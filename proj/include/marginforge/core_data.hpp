#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "marginforge/rng.hpp"

namespace mf {

using Index = Eigen::Index;

// Class index: datasets are two-class throughout (0 and 1). Hard labels map
// class 0 -> +1 and class 1 -> -1 where a signed label is needed.
using ClassId = int;

inline constexpr int kClassCount = 2;
inline constexpr double kDefaultHardTau = 0.8;

inline double hard_label_sign(ClassId c) { return c == 0 ? +1.0 : -1.0; }

// p in {1, 2, inf}. Infinity is spelled as p = 0 in configs; use the factory
// helpers below rather than raw construction.
struct PNorm {
  double p = 2.0;  // 1, 2, or +infinity

  static PNorm l1() { return {1.0}; }
  static PNorm l2() { return {2.0}; }
  static PNorm linf() { return {std::numeric_limits<double>::infinity()}; }
};

// Distance between two dense vectors in the given p-norm.
template <typename DerivedA, typename DerivedB>
double p_distance(const Eigen::MatrixBase<DerivedA>& a,
                  const Eigen::MatrixBase<DerivedB>& b, PNorm norm) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("p_distance: dimension mismatch");
  }
  const auto diff = (a.derived() - b.derived()).template cast<double>().eval();
  if (norm.p == 1.0) return diff.cwiseAbs().sum();
  if (norm.p == 2.0) return diff.norm();
  if (std::isinf(norm.p)) return diff.cwiseAbs().maxCoeff();
  throw std::invalid_argument("p_distance: only p in {1, 2, inf} supported");
}

// A point with per-class membership degrees c_j in [0, 1], sum <= 1 (+1e-9
// slack). A hard signed label exists exactly when some c_j clears the
// membership threshold; see hard_membership.
struct LabeledPoint {
  Eigen::VectorXd x;
  Eigen::VectorXd c;  // length kClassCount
};

struct LabeledDataset {
  int dim = 0;  // m
  std::vector<LabeledPoint> points;
};

// Returns the class whose membership strictly exceeds tau, or nullopt when no
// class does. tau <= 0.5 is rejected: two classes could then both qualify and
// the hard label would be ambiguous.
std::optional<ClassId> hard_membership(const Eigen::VectorXd& c,
                                       double tau = kDefaultHardTau);

// Validates membership-vector invariants (entries in [0,1], sum <= 1 + 1e-9).
void validate_memberships(const Eigen::VectorXd& c);

enum class ManifoldKind { kParallelSegments, kConcentricArcs, kParallelDisks };

// Analytic two-class manifold pair with exactly known separation r_p.
//   parallel-segments: unit segments along axis 0, classes offset by r_p on
//     axis 1 (k = 1; separation exact in every p-norm).
//   concentric-arcs: quarter arcs of radius 1 and 1 + r_p in the axis-0/1
//     plane (k = 1; separation exact in the 2-norm).
//   parallel-disks: filled unit disks in the axis-0/1 plane, classes offset by
//     r_p on axis 2 (k = 2, requires m >= 3; exact in every p-norm).
// Sample 0 of each class sits at the closest-approach parameter, so the
// sampled min interclass distance equals r_p exactly, not just in the limit.
struct ManifoldSpec {
  ManifoldKind kind = ManifoldKind::kParallelSegments;
  int k = 1;       // intrinsic dimension
  int m = 2;       // ambient dimension, k < m
  double r_p = 1.0;
  int samples_per_class = 10;
  std::uint64_t seed = 0;
};

LabeledDataset generate_manifold(const ManifoldSpec& spec);

// A point exactly on the class manifold at the given intrinsic parameters
// (used by neighborhood sampling and by distance oracles in tests).
Eigen::VectorXd manifold_point(const ManifoldSpec& spec, ClassId cls,
                               const Eigen::VectorXd& params);

// Exact p-distance from x to the analytic class manifold.
double manifold_distance(const ManifoldSpec& spec, ClassId cls,
                         const Eigen::VectorXd& x, PNorm norm);

// Brute-force minimum distance between hard-labeled points of different
// classes. Throws if either class is empty or a cross-class pair coincides
// (one point cannot belong to both classes, so zero separation is a broken
// dataset, not a value to report).
double min_interclass_distance(const LabeledDataset& ds, PNorm norm);

// Shortest decimal string that round-trips to exactly this double (used by
// every CSV/JSON emitter so that identical values always print identically).
std::string format_shortest(double value);

// Serialization: JSON object {"m":..,"classes":2,"points":[{"x":[..],"c":[..]},..]}
// and CSV with columns x_0..x_{m-1},c_0,c_1.
std::string dataset_to_json(const LabeledDataset& ds);
LabeledDataset dataset_from_json(const std::string& text);
std::string dataset_to_csv(const LabeledDataset& ds);
LabeledDataset dataset_from_csv(const std::string& text);

void save_dataset(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_dataset(const std::string& path);

}  // namespace mf
