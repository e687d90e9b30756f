#include "kesten/geometry.hpp"

#include "kesten/error.hpp"
#include "kesten/io.hpp"
#include "kesten/parallel.hpp"
#include "kesten/stats.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>

namespace kesten {

// --- points ----------------------------------------------------------------

SpherePoint SpherePoint::from_unit(const RowVec& coords) {
  if (coords.size() < 1 || coords.size() > kMaxDim) throw Error("SpherePoint: dimension must be 1..3");
  if (std::abs(coords.norm() - 1.0) > 1e-12) throw Error("SpherePoint: coordinates are not unit length");
  return SpherePoint(coords);
}

SpherePoint SpherePoint::operator-() const { return SpherePoint(RowVec(-coords_)); }

SpherePoint project(const RowVec& x) {
  const double n = x.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw Error("project: zero or non-finite vector");
  return SpherePoint(RowVec(x / n));
}

double angular_distance(const SpherePoint& a, const SpherePoint& b) {
  // atan2 form stays accurate for nearly (anti)parallel points.
  const double dot = a.coords().dot(b.coords());
  const double cross = (a.coords() - dot * b.coords()).norm();
  return std::atan2(cross, dot);
}

// --- grid construction -------------------------------------------------------

SphereGrid SphereGrid::make(int dim, int resolution) {
  SphereGrid g;
  g.dim_ = dim;
  switch (dim) {
    case 1: {
      g.resolution_ = 2;
      RowVec minus(1), plus(1);
      minus << -1.0;
      plus << 1.0;
      g.points_ = {SpherePoint::from_unit(minus), SpherePoint::from_unit(plus)};
      g.antipode_ = {1, 0};
      g.weights_ = {0.5, 0.5};
      break;
    }
    case 2:
      g.build_circle(resolution);
      break;
    case 3:
      g.build_icosphere(resolution);
      break;
    default:
      throw ConfigError("grids are available for dimensions 1..3 only");
  }
  return g;
}

SphereGrid SphereGrid::make_default(int dim) { return make(dim, dim == 2 ? 256 : 4); }

void SphereGrid::build_circle(int n) {
  if (n < 2 || n % 2 != 0) throw ConfigError("circle grid needs an even number (>= 2) of angles");
  resolution_ = n;
  points_.resize(n);
  const int half = n / 2;
  for (int k = 0; k < half; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / n;
    RowVec c(2);
    c << std::cos(theta), std::sin(theta);
    c /= c.norm();
    points_[k] = project(c);
    points_[k + half] = -points_[k];
  }
  antipode_.resize(n);
  for (int k = 0; k < n; ++k) antipode_[k] = (k + half) % n;
  weights_.assign(n, 1.0 / n);
}

void SphereGrid::build_icosphere(int level) {
  if (level < 0 || level > 6) throw ConfigError("icosphere level must be in 0..6");
  resolution_ = level;
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const double base[12][3] = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                              {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                              {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  std::vector<Eigen::Vector3d> verts;
  for (const auto& b : base) verts.push_back(Eigen::Vector3d(b[0], b[1], b[2]).normalized());

  const std::uint32_t faces0[20][3] = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                       {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                       {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                       {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  levels_.assign(1, {});
  for (const auto& f : faces0) {
    Face face{{f[0], f[1], f[2]}, -1};
    const auto& a = verts[face.v[0]];
    const auto& b = verts[face.v[1]];
    const auto& c = verts[face.v[2]];
    if (a.dot(b.cross(c)) < 0.0) std::swap(face.v[1], face.v[2]);
    levels_[0].push_back(face);
  }

  for (int l = 0; l < level; ++l) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
    auto mid = [&](std::uint32_t i, std::uint32_t j) {
      const auto key = std::minmax(i, j);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back((verts[i] + verts[j]).normalized());
      const auto idx = static_cast<std::uint32_t>(verts.size() - 1);
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<Face> next;
    next.reserve(levels_[l].size() * 4);
    for (auto& face : levels_[l]) {
      const auto [a, b, c] = face.v;
      const auto ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
      face.first_child = static_cast<std::int32_t>(next.size());
      next.push_back({{a, ab, ca}, -1});
      next.push_back({{ab, b, bc}, -1});
      next.push_back({{ca, bc, c}, -1});
      next.push_back({{ab, bc, ca}, -1});
    }
    levels_.push_back(std::move(next));
  }

  points_.clear();
  for (const auto& v : verts) {
    RowVec c(3);
    c << v.x(), v.y(), v.z();
    points_.push_back(project(c));
  }
  pair_antipodes();

  // Quadrature weights: one third of each adjacent spherical triangle's area.
  weights_.assign(points_.size(), 0.0);
  leaf_inverse_.clear();
  for (const auto& face : levels_.back()) {
    Eigen::Matrix3d cols;
    for (int k = 0; k < 3; ++k) {
      const auto& p = points_[face.v[k]].coords();
      cols.col(k) << p(0), p(1), p(2);
    }
    const Eigen::Vector3d a = cols.col(0), b = cols.col(1), c = cols.col(2);
    const double excess = 2.0 * std::atan2(std::abs(a.dot(b.cross(c))), 1.0 + a.dot(b) + b.dot(c) + c.dot(a));
    for (int k = 0; k < 3; ++k) weights_[face.v[k]] += excess / 3.0;
    leaf_inverse_.push_back(cols.inverse());
  }
  double total = 0.0;
  for (double w : weights_) total += w;
  for (double& w : weights_) w /= total;
}

void SphereGrid::pair_antipodes() {
  // Match by rounded coordinates, then overwrite the partner with the exact negation.
  auto key = [](const RowVec& c) {
    return std::make_tuple(std::llround(c(0) * 1e9), std::llround(c(1) * 1e9), std::llround(c(2) * 1e9));
  };
  std::map<std::tuple<long long, long long, long long>, std::size_t> index;
  for (std::size_t i = 0; i < points_.size(); ++i) index.emplace(key(points_[i].coords()), i);
  antipode_.assign(points_.size(), points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (antipode_[i] != points_.size()) continue;
    auto it = index.find(key(RowVec(-points_[i].coords())));
    if (it == index.end()) throw Error("icosphere: missing antipodal vertex");
    const std::size_t j = it->second;
    antipode_[i] = j;
    antipode_[j] = i;
    if (j != i) points_[j] = -points_[i];
  }
}

// --- interpolation -----------------------------------------------------------

namespace {
constexpr double kSnap = 1e-12;

Stencil single(std::size_t i) {
  Stencil s;
  s.idx = {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i)};
  return s;
}
}  // namespace

Stencil SphereGrid::stencil(const SpherePoint& x) const {
  if (x.dim() != dim_) throw Error("stencil: dimension mismatch");
  switch (dim_) {
    case 1:
      return single(x[0] >= 0.0 ? 1 : 0);
    case 2: {
      const std::size_t n = points_.size();
      double theta = std::atan2(x[1], x[0]);
      if (theta < 0.0) theta += 2.0 * std::numbers::pi;
      const double s = theta * static_cast<double>(n) / (2.0 * std::numbers::pi);
      double fl = std::floor(s);
      double t = s - fl;
      auto i0 = static_cast<std::size_t>(fl) % n;
      if (t < kSnap) return single(i0);
      if (t > 1.0 - kSnap) return single((i0 + 1) % n);
      Stencil st;
      st.idx = {static_cast<std::uint32_t>(i0), static_cast<std::uint32_t>((i0 + 1) % n),
                static_cast<std::uint32_t>(i0)};
      st.w1 = t;
      return st;
    }
    default:
      return locate_icosphere(x.coords());
  }
}

Stencil SphereGrid::locate_icosphere(const RowVec& xr) const {
  const Eigen::Vector3d x(xr(0), xr(1), xr(2));
  auto vec = [&](std::uint32_t i) {
    const auto& c = points_[i].coords();
    return Eigen::Vector3d(c(0), c(1), c(2));
  };
  auto score = [&](const Face& f) {
    const Eigen::Vector3d a = vec(f.v[0]), b = vec(f.v[1]), c = vec(f.v[2]);
    return std::min({x.dot(a.cross(b)), x.dot(b.cross(c)), x.dot(c.cross(a))});
  };
  std::size_t best = 0;
  double best_score = -1e300;
  for (std::size_t i = 0; i < levels_[0].size(); ++i) {
    const double sc = score(levels_[0][i]);
    if (sc > best_score) {
      best_score = sc;
      best = i;
    }
  }
  for (std::size_t l = 0; l + 1 < levels_.size(); ++l) {
    const auto first = static_cast<std::size_t>(levels_[l][best].first_child);
    std::size_t pick = first;
    double pick_score = -1e300;
    for (std::size_t c = first; c < first + 4; ++c) {
      const double sc = score(levels_[l + 1][c]);
      if (sc > pick_score) {
        pick_score = sc;
        pick = c;
      }
    }
    best = pick;
  }
  const Face& leaf = levels_.back()[best];
  Eigen::Vector3d lambda = leaf_inverse_[best] * x;
  lambda = lambda.cwiseMax(0.0);
  lambda /= lambda.sum();
  int top = 0;
  lambda.maxCoeff(&top);
  if (lambda(top) > 1.0 - kSnap) return single(leaf.v[top]);
  Stencil st;
  st.idx = leaf.v;
  st.w1 = lambda(1);
  st.w2 = lambda(2);
  return st;
}

std::size_t SphereGrid::bin(const SpherePoint& x) const {
  const Stencil s = stencil(x);
  const double w0 = 1.0 - s.w1 - s.w2;
  if (w0 >= s.w1 && w0 >= s.w2) return s.idx[0];
  return s.w1 >= s.w2 ? s.idx[1] : s.idx[2];
}

double SphereGrid::min_separation() const {
  double best = std::numbers::pi;
  if (dim_ == 2) return 2.0 * std::numbers::pi / static_cast<double>(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i)
    for (std::size_t j = i + 1; j < points_.size(); ++j) best = std::min(best, angular_distance(points_[i], points_[j]));
  return best;
}

double evaluate(const Stencil& s, const std::vector<double>& v) {
  const double base = v[s.idx[0]];
  return base + s.w1 * (v[s.idx[1]] - base) + s.w2 * (v[s.idx[2]] - base);
}

double interpolate(const GridFunction& f, const SpherePoint& x) { return evaluate(f.grid->stencil(x), f.values); }

// --- grid functions ----------------------------------------------------------

GridFunction::GridFunction(std::shared_ptr<const SphereGrid> g, double fill)
    : grid(std::move(g)), values(grid->size(), fill) {}

GridFunction::GridFunction(std::shared_ptr<const SphereGrid> g, std::vector<double> v)
    : grid(std::move(g)), values(std::move(v)) {
  if (values.size() != grid->size()) throw Error("GridFunction: value count does not match grid");
  for (double x : values)
    if (!std::isfinite(x)) throw Error("GridFunction: non-finite value");
}

double GridFunction::sup_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}
double GridFunction::min() const { return *std::min_element(values.begin(), values.end()); }
double GridFunction::max() const { return *std::max_element(values.begin(), values.end()); }

void write_grid_function_csv(std::ostream& os, const GridFunction& f) {
  const int d = f.grid->dim();
  for (int k = 0; k < d; ++k) os << 'x' << k << ',';
  os << "value\n";
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto& c = f.grid->point(i).coords();
    for (int k = 0; k < d; ++k) os << format_double(c(k)) << ',';
    os << format_double(f.values[i]) << '\n';
  }
}

GridFunction read_grid_function_csv(std::istream& is, std::shared_ptr<const SphereGrid> grid) {
  std::string line;
  do {
    if (!std::getline(is, line)) throw Error("grid function CSV: missing header");
  } while (!line.empty() && line.front() == '#');
  const int d = grid->dim();
  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != static_cast<std::size_t>(d + 1))
      throw Error("grid function CSV: row " + std::to_string(row + 2) + " has wrong field count");
    if (row >= grid->size()) throw Error("grid function CSV: more rows than grid points");
    const auto& c = grid->point(row).coords();
    for (int k = 0; k < d; ++k) {
      if (std::abs(parse_double(fields[k]) - c(k)) > 1e-12)
        throw Error("grid function CSV: row " + std::to_string(row + 2) + " does not match the grid");
    }
    values.push_back(parse_double(fields[d]));
    ++row;
  }
  return GridFunction(std::move(grid), std::move(values));
}

// --- products ----------------------------------------------------------------

double ProductAccumulator::advance_inplace(const Matrix& m) {
  const RowVec y = direction.coords() * m;
  const double n = y.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("advance: |x M| is zero or non-finite");
  direction = project(y);
  const double u = std::log(n);
  log_norm += u;
  ++steps;
  return u;
}

ProductAccumulator advance(ProductAccumulator acc, const Matrix& m) {
  acc.advance_inplace(m);
  return acc;
}

double operator_norm(const Matrix& m) {
  if (m.rows() == 1) return std::abs(m(0, 0));
  return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

double lambda_min_mmt(const Matrix& m) {
  if (m.rows() == 1) return m(0, 0) * m(0, 0);
  const auto sv = Eigen::JacobiSVD<Matrix>(m).singularValues();
  const double s = sv(sv.size() - 1);
  return s * s;
}

LyapunovEstimate lyapunov(const ModelSpec& spec, std::uint64_t n_steps, std::uint64_t n_chains, RngStream& rng,
                          int workers) {
  if (n_steps < 1000) throw Error("lyapunov: n_steps must be at least 1000");
  if (n_chains < 1) throw Error("lyapunov: need at least one chain");
  const std::uint64_t base = rng.next_u64();
  RowVec e1 = RowVec::Zero(spec.dimension);
  e1(0) = 1.0;
  const SpherePoint start = SpherePoint::from_unit(e1);

  std::vector<double> per_chain(n_chains);
  std::vector<double> increments;  // single-chain case only
  if (n_chains == 1) increments.reserve(n_steps);
  parallel_for(n_chains, workers, [&](std::size_t c) {
    RngStream stream(base, c);
    ProductAccumulator acc(start);
    for (std::uint64_t n = 0; n < n_steps; ++n) {
      const double u = acc.advance_inplace(sample_m(spec, stream));
      if (n_chains == 1) increments.push_back(u);
    }
    per_chain[c] = acc.log_norm / static_cast<double>(n_steps);
  });

  LyapunovEstimate out;
  out.n_steps = n_steps;
  out.n_chains = n_chains;
  if (n_chains == 1) {
    const auto bm = stats::batch_means(increments);
    out.beta = per_chain[0];
    out.std_error = bm.se;
  } else {
    const auto ms = stats::mean_se(per_chain);
    out.beta = ms.mean;
    out.std_error = ms.se;
  }
  return out;
}

}  // namespace kesten
