#include "marginforge/core_data.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace mf {

namespace {

using nlohmann::json;

constexpr double kMembershipSumSlack = 1e-9;
constexpr double kCoincidenceTol = 0.0;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Uniform point on the class manifold; params drawn in the generator.
Eigen::VectorXd embed(const ManifoldSpec& spec, ClassId cls, double a,
                      double b) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(spec.m);
  switch (spec.kind) {
    case ManifoldKind::kParallelSegments:
      x[0] = a;
      x[1] = cls == 0 ? 0.0 : spec.r_p;
      break;
    case ManifoldKind::kConcentricArcs: {
      const double r = cls == 0 ? 1.0 : 1.0 + spec.r_p;
      x[0] = r * std::cos(a);
      x[1] = r * std::sin(a);
      break;
    }
    case ManifoldKind::kParallelDisks:
      x[0] = a * std::cos(b);
      x[1] = a * std::sin(b);
      x[2] = cls == 0 ? 0.0 : spec.r_p;
      break;
  }
  return x;
}

void validate_spec(const ManifoldSpec& spec) {
  require(spec.r_p > 0.0, "manifold spec: r_p must be positive");
  require(spec.k < spec.m, "manifold spec: intrinsic dim k must be < m");
  require(spec.samples_per_class >= 1,
          "manifold spec: samples_per_class must be >= 1");
  const int want_k = spec.kind == ManifoldKind::kParallelDisks ? 2 : 1;
  require(spec.k == want_k, "manifold spec: k does not match kind");
  const int min_m = spec.kind == ManifoldKind::kParallelDisks ? 3 : 2;
  require(spec.m >= min_m, "manifold spec: ambient dim too small for kind");
}

}  // namespace

void validate_memberships(const Eigen::VectorXd& c) {
  require(c.size() == kClassCount, "memberships: expected one entry per class");
  double sum = 0.0;
  for (Index j = 0; j < c.size(); ++j) {
    require(c[j] >= 0.0 && c[j] <= 1.0, "memberships: entries must be in [0,1]");
    sum += c[j];
  }
  require(sum <= 1.0 + kMembershipSumSlack, "memberships: sum exceeds 1");
}

std::optional<ClassId> hard_membership(const Eigen::VectorXd& c, double tau) {
  require(tau > 0.5, "hard_membership: tau must exceed 0.5");
  validate_memberships(c);
  for (Index j = 0; j < c.size(); ++j) {
    if (c[j] > tau) return static_cast<ClassId>(j);
  }
  return std::nullopt;
}

Eigen::VectorXd manifold_point(const ManifoldSpec& spec, ClassId cls,
                               const Eigen::VectorXd& params) {
  validate_spec(spec);
  require(cls == 0 || cls == 1, "manifold_point: class must be 0 or 1");
  require(params.size() == spec.k, "manifold_point: wrong parameter count");
  const double a = params[0];
  const double b = spec.k > 1 ? params[1] : 0.0;
  return embed(spec, cls, a, b);
}

double manifold_distance(const ManifoldSpec& spec, ClassId cls,
                         const Eigen::VectorXd& x, PNorm norm) {
  validate_spec(spec);
  require(x.size() == spec.m, "manifold_distance: dimension mismatch");
  // Closed-form projections exist for the 2-norm; for p = 1/inf on the
  // axis-aligned kinds the projection in the manifold's own coordinates is
  // still exact because the manifold spans whole axes. Arcs are 2-norm only.
  switch (spec.kind) {
    case ManifoldKind::kParallelSegments: {
      Eigen::VectorXd nearest = x;
      nearest[0] = std::clamp(x[0], 0.0, 1.0);
      nearest[1] = cls == 0 ? 0.0 : spec.r_p;
      for (int j = 2; j < spec.m; ++j) nearest[j] = 0.0;
      return p_distance(x, nearest, norm);
    }
    case ManifoldKind::kConcentricArcs: {
      require(norm.p == 2.0, "manifold_distance: arcs support the 2-norm only");
      const double r = cls == 0 ? 1.0 : 1.0 + spec.r_p;
      double ang = std::atan2(x[1], x[0]);
      ang = std::clamp(ang, 0.0, std::numbers::pi / 2);
      Eigen::VectorXd nearest = Eigen::VectorXd::Zero(spec.m);
      nearest[0] = r * std::cos(ang);
      nearest[1] = r * std::sin(ang);
      return p_distance(x, nearest, norm);
    }
    case ManifoldKind::kParallelDisks: {
      Eigen::VectorXd nearest = x;
      const double rho = std::hypot(x[0], x[1]);
      if (rho > 1.0) {
        nearest[0] = x[0] / rho;
        nearest[1] = x[1] / rho;
      }
      nearest[2] = cls == 0 ? 0.0 : spec.r_p;
      for (int j = 3; j < spec.m; ++j) nearest[j] = 0.0;
      return p_distance(x, nearest, norm);
    }
  }
  throw std::logic_error("manifold_distance: unreachable");
}

LabeledDataset generate_manifold(const ManifoldSpec& spec) {
  validate_spec(spec);
  LabeledDataset ds;
  ds.dim = spec.m;
  RngStream root(spec.seed);
  for (ClassId cls = 0; cls < kClassCount; ++cls) {
    RngStream stream =
        root.substream(cls == 0 ? "manifold/class0" : "manifold/class1");
    for (int i = 0; i < spec.samples_per_class; ++i) {
      // Sample 0 anchors at parameter zero: the two anchors form a
      // closest-approach pair, so the sampled sets realize the analytic
      // separation exactly.
      double a = 0.0, b = 0.0;
      if (i > 0) {
        switch (spec.kind) {
          case ManifoldKind::kParallelSegments:
            a = stream.uniform();
            break;
          case ManifoldKind::kConcentricArcs:
            a = stream.uniform() * std::numbers::pi / 2;
            break;
          case ManifoldKind::kParallelDisks:
            a = std::sqrt(stream.uniform());  // uniform over the disk area
            b = stream.uniform() * 2 * std::numbers::pi;
            break;
        }
      }
      LabeledPoint pt;
      pt.x = embed(spec, cls, a, b);
      pt.c = Eigen::VectorXd::Zero(kClassCount);
      pt.c[cls] = 1.0;
      ds.points.push_back(std::move(pt));
    }
  }
  return ds;
}

double min_interclass_distance(const LabeledDataset& ds, PNorm norm) {
  std::vector<const LabeledPoint*> by_class[kClassCount];
  for (const auto& pt : ds.points) {
    if (auto cls = hard_membership(pt.c)) by_class[*cls].push_back(&pt);
  }
  require(!by_class[0].empty() && !by_class[1].empty(),
          "min_interclass_distance: a class has no hard-labeled points");
  double best = std::numeric_limits<double>::infinity();
  for (const auto* a : by_class[0]) {
    for (const auto* b : by_class[1]) {
      const double d = p_distance(a->x, b->x, norm);
      if (d <= kCoincidenceTol) {
        throw std::invalid_argument(
            "min_interclass_distance: coincident points in opposite classes");
      }
      best = std::min(best, d);
    }
  }
  return best;
}

std::string dataset_to_json(const LabeledDataset& ds) {
  json j;
  j["m"] = ds.dim;
  j["classes"] = kClassCount;
  json pts = json::array();
  for (const auto& pt : ds.points) {
    json p;
    p["x"] = std::vector<double>(pt.x.data(), pt.x.data() + pt.x.size());
    p["c"] = std::vector<double>(pt.c.data(), pt.c.data() + pt.c.size());
    pts.push_back(std::move(p));
  }
  j["points"] = std::move(pts);
  return j.dump();
}

std::string format_shortest(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

LabeledDataset dataset_from_json(const std::string& text) {
  const json j = json::parse(text);
  LabeledDataset ds;
  ds.dim = j.at("m").get<int>();
  require(j.at("classes").get<int>() == kClassCount,
          "dataset: expected a two-class file");
  for (const auto& p : j.at("points")) {
    LabeledPoint pt;
    const auto xs = p.at("x").get<std::vector<double>>();
    const auto cs = p.at("c").get<std::vector<double>>();
    require(static_cast<int>(xs.size()) == ds.dim,
            "dataset: point dimension mismatch");
    pt.x = Eigen::Map<const Eigen::VectorXd>(xs.data(), xs.size());
    pt.c = Eigen::Map<const Eigen::VectorXd>(cs.data(), cs.size());
    validate_memberships(pt.c);
    ds.points.push_back(std::move(pt));
  }
  return ds;
}

std::string dataset_to_csv(const LabeledDataset& ds) {
  std::ostringstream out;
  out.precision(17);
  for (int j = 0; j < ds.dim; ++j) out << "x_" << j << ",";
  out << "c_0,c_1\n";
  for (const auto& pt : ds.points) {
    for (Index j = 0; j < pt.x.size(); ++j) out << pt.x[j] << ",";
    out << pt.c[0] << "," << pt.c[1] << "\n";
  }
  return out.str();
}

LabeledDataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "csv: empty input");
  int columns = 1;
  for (char ch : line) columns += ch == ',';
  LabeledDataset ds;
  ds.dim = columns - kClassCount;
  require(ds.dim >= 1, "csv: header must list x_0.. plus c_0,c_1");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(row, cell, ',')) vals.push_back(std::stod(cell));
    require(static_cast<int>(vals.size()) == columns, "csv: ragged row");
    LabeledPoint pt;
    pt.x = Eigen::Map<const Eigen::VectorXd>(vals.data(), ds.dim);
    pt.c = Eigen::Map<const Eigen::VectorXd>(vals.data() + ds.dim, kClassCount);
    validate_memberships(pt.c);
    ds.points.push_back(std::move(pt));
  }
  return ds;
}

void save_dataset(const LabeledDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
    out << dataset_to_csv(ds);
  } else {
    out << dataset_to_json(ds);
  }
}

LabeledDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
    return dataset_from_csv(buf.str());
  }
  return dataset_from_json(buf.str());
}

}  // namespace mf
