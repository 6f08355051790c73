// Datasets, memberships, p-norm geometry, and serialization round-trips.
//
// Oracles are independent of the code under test: interclass distances are
// re-derived by brute-force pairwise scans written inline, membership and
// distance pins are hand-evaluated constants, and serialization checks are
// full round-trips compared field by field.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Core>

#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <string>

#include "marginforge/core_data.hpp"

using namespace mf;

namespace {

// Brute-force oracle: smallest cross-class p-distance over hard-labeled
// points, written independently of min_interclass_distance.
double brute_force_interclass(const LabeledDataset& ds, PNorm norm,
                              double tau = kDefaultHardTau) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& a : ds.points) {
    const auto ca = hard_membership(a.c, tau);
    if (!ca) continue;
    for (const auto& b : ds.points) {
      const auto cb = hard_membership(b.c, tau);
      if (!cb || *cb == *ca) continue;
      best = std::min(best, p_distance(a.x, b.x, norm));
    }
  }
  return best;
}

Eigen::VectorXd vec1(double a) {
  Eigen::VectorXd v(1);
  v << a;
  return v;
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

bool same_bits(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

bool datasets_identical(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.dim != b.dim || a.points.size() != b.points.size()) return false;
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    if (!same_bits(a.points[i].x, b.points[i].x)) return false;
    if (!same_bits(a.points[i].c, b.points[i].c)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("parallel segments: 10 per class, separation exactly 1") {
  ManifoldSpec spec;
  spec.kind = ManifoldKind::kParallelSegments;
  spec.k = 1;
  spec.m = 2;
  spec.r_p = 1.0;
  spec.samples_per_class = 10;
  spec.seed = 7;
  const LabeledDataset ds = generate_manifold(spec);

  CHECK(ds.dim == 2);
  CHECK(ds.points.size() == 20);
  const double brute = brute_force_interclass(ds, PNorm::l2());
  CHECK(brute == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(min_interclass_distance(ds, PNorm::l2()) ==
        doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("one sample per class sits at the closest-approach pair") {
  for (const ManifoldKind kind :
       {ManifoldKind::kParallelSegments, ManifoldKind::kConcentricArcs,
        ManifoldKind::kParallelDisks}) {
    ManifoldSpec spec;
    spec.kind = kind;
    spec.k = kind == ManifoldKind::kParallelDisks ? 2 : 1;
    spec.m = kind == ManifoldKind::kParallelDisks ? 3 : 2;
    spec.r_p = 0.75;
    spec.samples_per_class = 1;
    spec.seed = 3;
    const LabeledDataset ds = generate_manifold(spec);
    REQUIRE(ds.points.size() == 2);
    CHECK(p_distance(ds.points[0].x, ds.points[1].x, PNorm::l2()) ==
          doctest::Approx(0.75).epsilon(1e-9));
  }
}

TEST_CASE("same seed reproduces the dataset bit for bit") {
  ManifoldSpec spec;
  spec.kind = ManifoldKind::kConcentricArcs;
  spec.samples_per_class = 17;
  spec.seed = 12345;
  const LabeledDataset a = generate_manifold(spec);
  const LabeledDataset b = generate_manifold(spec);
  CHECK(datasets_identical(a, b));

  spec.seed = 12346;
  const LabeledDataset c = generate_manifold(spec);
  CHECK_FALSE(datasets_identical(a, c));
}

TEST_CASE("generated separation never undershoots the analytic value") {
  for (const ManifoldKind kind :
       {ManifoldKind::kParallelSegments, ManifoldKind::kConcentricArcs,
        ManifoldKind::kParallelDisks}) {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
      ManifoldSpec spec;
      spec.kind = kind;
      spec.k = kind == ManifoldKind::kParallelDisks ? 2 : 1;
      spec.m = kind == ManifoldKind::kParallelDisks ? 3 : 2;
      spec.r_p = 1.0;
      spec.samples_per_class = 25;
      spec.seed = seed;
      const LabeledDataset ds = generate_manifold(spec);
      CHECK(min_interclass_distance(ds, PNorm::l2()) >= spec.r_p - 1e-9);
      CHECK(brute_force_interclass(ds, PNorm::l2()) >= spec.r_p - 1e-9);
    }
  }
}

TEST_CASE("denser sampling drives the measured separation toward its floor") {
  ManifoldSpec spec;
  spec.kind = ManifoldKind::kParallelSegments;
  spec.r_p = 1.0;
  spec.seed = 5;
  spec.samples_per_class = 4;
  const double coarse = min_interclass_distance(generate_manifold(spec),
                                                PNorm::l2());
  spec.samples_per_class = 400;
  const double fine = min_interclass_distance(generate_manifold(spec),
                                              PNorm::l2());
  CHECK(coarse >= 1.0 - 1e-9);
  CHECK(fine >= 1.0 - 1e-9);
  CHECK(fine <= coarse + 1e-12);
  CHECK(fine == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("membership threshold is strict and defaults to 0.8") {
  CHECK(hard_membership(vec2(0.9, 0.1)) == ClassId{0});
  CHECK(hard_membership(vec2(0.1, 0.9)) == ClassId{1});
  CHECK_FALSE(hard_membership(vec2(0.5, 0.5)).has_value());
  // Exactly at the threshold does not qualify: the inequality is strict.
  CHECK_FALSE(hard_membership(vec2(0.8, 0.2)).has_value());
  CHECK_THROWS_AS(hard_membership(vec2(0.9, 0.1), 0.5), std::invalid_argument);
  CHECK_THROWS_AS(hard_membership(vec2(0.9, 0.1), 0.3), std::invalid_argument);
  // Above 0.5 any threshold is allowed.
  CHECK(hard_membership(vec2(0.7, 0.2), 0.6) == ClassId{0});
}

TEST_CASE("membership vectors must be probabilities summing to at most one") {
  CHECK_NOTHROW(validate_memberships(vec2(0.4, 0.6)));
  CHECK_NOTHROW(validate_memberships(vec2(0.0, 0.0)));
  CHECK_THROWS_AS(validate_memberships(vec2(-0.1, 0.5)),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_memberships(vec2(0.7, 0.7)), std::invalid_argument);
  CHECK_THROWS_AS(validate_memberships(vec2(1.2, 0.0)), std::invalid_argument);
}

TEST_CASE("p-distance matches hand values in all three norms") {
  CHECK(p_distance(vec1(0.0), vec1(1.0), PNorm::l2()) == 1.0);
  const Eigen::VectorXd a = vec2(1.0, 2.0);
  const Eigen::VectorXd b = vec2(4.0, -2.0);
  CHECK(p_distance(a, b, PNorm::l1()) == doctest::Approx(7.0));
  CHECK(p_distance(a, b, PNorm::l2()) == doctest::Approx(5.0));
  CHECK(p_distance(a, b, PNorm::linf()) == doctest::Approx(4.0));
  CHECK_THROWS_AS(p_distance(vec1(0.0), vec2(0.0, 0.0), PNorm::l2()),
                  std::invalid_argument);
  CHECK_THROWS_AS(p_distance(a, b, PNorm{3.0}), std::invalid_argument);
}

TEST_CASE("interclass distance is strictly positive and rejects empty classes") {
  ManifoldSpec spec;
  spec.samples_per_class = 8;
  spec.seed = 11;
  const LabeledDataset ds = generate_manifold(spec);
  CHECK(min_interclass_distance(ds, PNorm::l2()) > 0.0);
  CHECK(min_interclass_distance(ds, PNorm::l1()) > 0.0);
  CHECK(min_interclass_distance(ds, PNorm::linf()) > 0.0);

  LabeledDataset one_class;
  one_class.dim = 2;
  one_class.points.push_back({vec2(0.0, 0.0), vec2(1.0, 0.0)});
  one_class.points.push_back({vec2(1.0, 0.0), vec2(1.0, 0.0)});
  CHECK_THROWS_AS(min_interclass_distance(one_class, PNorm::l2()),
                  std::invalid_argument);

  // A point claimed by both classes would report zero separation; that is a
  // broken dataset, not a distance.
  LabeledDataset coincident;
  coincident.dim = 1;
  coincident.points.push_back({vec1(0.5), vec2(1.0, 0.0)});
  coincident.points.push_back({vec1(0.5), vec2(0.0, 1.0)});
  CHECK_THROWS(min_interclass_distance(coincident, PNorm::l2()));
}

TEST_CASE("every generated point carries exactly one hard class") {
  for (const ManifoldKind kind :
       {ManifoldKind::kParallelSegments, ManifoldKind::kConcentricArcs,
        ManifoldKind::kParallelDisks}) {
    ManifoldSpec spec;
    spec.kind = kind;
    spec.k = kind == ManifoldKind::kParallelDisks ? 2 : 1;
    spec.m = kind == ManifoldKind::kParallelDisks ? 3 : 2;
    spec.samples_per_class = 12;
    spec.seed = 9;
    const LabeledDataset ds = generate_manifold(spec);
    int per_class[2] = {0, 0};
    for (const auto& pt : ds.points) {
      const auto cls = hard_membership(pt.c);
      REQUIRE(cls.has_value());
      CHECK(pt.c[static_cast<Index>(*cls)] == 1.0);
      ++per_class[*cls];
    }
    CHECK(per_class[0] == 12);
    CHECK(per_class[1] == 12);
  }
}

TEST_CASE("invalid manifold specs are rejected") {
  ManifoldSpec spec;
  spec.k = 2;
  spec.m = 2;  // k < m required
  CHECK_THROWS_AS(generate_manifold(spec), std::invalid_argument);
  spec = ManifoldSpec{};
  spec.r_p = 0.0;
  CHECK_THROWS_AS(generate_manifold(spec), std::invalid_argument);
  spec = ManifoldSpec{};
  spec.samples_per_class = 0;
  CHECK_THROWS_AS(generate_manifold(spec), std::invalid_argument);
  spec = ManifoldSpec{};
  spec.kind = ManifoldKind::kParallelDisks;
  spec.k = 2;
  spec.m = 2;  // disks need m >= 3
  CHECK_THROWS_AS(generate_manifold(spec), std::invalid_argument);
}

TEST_CASE("manifold points lie on the manifold and distances are analytic") {
  ManifoldSpec spec;
  spec.kind = ManifoldKind::kConcentricArcs;
  spec.r_p = 0.5;
  const Eigen::VectorXd params = vec1(0.25);
  for (ClassId cls : {0, 1}) {
    const Eigen::VectorXd on = manifold_point(spec, cls, params);
    CHECK(manifold_distance(spec, cls, on, PNorm::l2()) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  // The inner arc has radius 1: the origin is at distance exactly 1.
  CHECK(manifold_distance(spec, 0, vec2(0.0, 0.0), PNorm::l2()) ==
        doctest::Approx(1.0).epsilon(1e-9));
  // The outer arc has radius 1 + r_p = 1.5.
  CHECK(manifold_distance(spec, 1, vec2(0.0, 0.0), PNorm::l2()) ==
        doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("shortest round-trip decimals parse back to the same double") {
  const double cases[] = {0.0,       -0.0,   1.0,        0.1,
                          1.0 / 3.0, 1e-300, 9.9e307,    -123.456,
                          5e-324,    2.5,    0.30000000000000004};
  for (const double v : cases) {
    const std::string s = format_shortest(v);
    const double back = std::strtod(s.c_str(), nullptr);
    CHECK(back == v);
  }
  // Determinism and economy on a few known values.
  CHECK(format_shortest(1.0) == "1");
  CHECK(format_shortest(0.5) == "0.5");
  CHECK(format_shortest(0.1) == "0.1");
}

TEST_CASE("dataset JSON round-trip preserves every field") {
  ManifoldSpec spec;
  spec.kind = ManifoldKind::kParallelDisks;
  spec.k = 2;
  spec.m = 3;
  spec.samples_per_class = 6;
  spec.seed = 21;
  const LabeledDataset ds = generate_manifold(spec);
  const LabeledDataset back = dataset_from_json(dataset_to_json(ds));
  CHECK(datasets_identical(ds, back));
}

TEST_CASE("dataset CSV round-trip preserves every field") {
  ManifoldSpec spec;
  spec.samples_per_class = 5;
  spec.seed = 2;
  const LabeledDataset ds = generate_manifold(spec);
  const std::string csv = dataset_to_csv(ds);
  CHECK(csv.rfind("x_0,x_1,c_0,c_1", 0) == 0);
  const LabeledDataset back = dataset_from_csv(csv);
  CHECK(datasets_identical(ds, back));
}

TEST_CASE("dataset files round-trip through save and load") {
  ManifoldSpec spec;
  spec.samples_per_class = 4;
  spec.seed = 13;
  const LabeledDataset ds = generate_manifold(spec);
  const std::string json_path = "core_data_roundtrip.json";
  const std::string csv_path = "core_data_roundtrip.csv";
  save_dataset(ds, json_path);
  save_dataset(ds, csv_path);
  CHECK(datasets_identical(ds, load_dataset(json_path)));
  CHECK(datasets_identical(ds, load_dataset(csv_path)));
  std::remove(json_path.c_str());
  std::remove(csv_path.c_str());
}

TEST_CASE("malformed serialized datasets are rejected") {
  CHECK_THROWS(dataset_from_json("{\"m\": 2}"));
  CHECK_THROWS(dataset_from_json("not json at all"));
  // Membership rows must satisfy the membership invariants.
  CHECK_THROWS(dataset_from_csv("x_0,c_0,c_1\n0.5,0.9,0.9\n"));
  // A header-only file is a dataset with zero points, not an error.
  const LabeledDataset empty = dataset_from_csv("x_0,c_0,c_1\n");
  CHECK(empty.dim == 1);
  CHECK(empty.points.empty());
}
