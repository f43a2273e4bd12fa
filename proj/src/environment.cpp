#include "sgpplace/environment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "sgpplace/errors.hpp"
#include "sgpplace/linalg.hpp"

namespace sgpplace {

namespace {

double signed_area(const Polygon& poly) {
  double a = 0.0;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    a += poly[j].x() * poly[i].y() - poly[i].x() * poly[j].y();
  }
  return 0.5 * a;
}

void check_polygon(const Polygon& poly) {
  if (poly.size() < 3) {
    throw InvalidArgument("polygon needs at least 3 vertices, got " + std::to_string(poly.size()));
  }
  for (const auto& v : poly) {
    if (!v.allFinite()) throw InvalidArgument("polygon has a non-finite vertex");
  }
  if (signed_area(poly) == 0.0) throw InvalidArgument("polygon has zero area");
}

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

Eigen::Vector2d closest_on_segment(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return a;
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return a + t * ab;
}

bool segments_cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                    const Eigen::Vector2d& d) {
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  auto on = [](const Eigen::Vector2d& p, const Eigen::Vector2d& q, const Eigen::Vector2d& r, double o) {
    return o == 0.0 && std::min(p.x(), q.x()) <= r.x() && r.x() <= std::max(p.x(), q.x()) &&
           std::min(p.y(), q.y()) <= r.y() && r.y() <= std::max(p.y(), q.y());
  };
  return on(a, b, c, d1) || on(a, b, d, d2) || on(c, d, a, d3) || on(c, d, b, d4);
}

bool polygon_is_simple(const Polygon& poly) {
  const std::size_t k = poly.size();
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == k - 1);
      if (adjacent) continue;
      if (segments_cross(poly[i], poly[(i + 1) % k], poly[j], poly[(j + 1) % k])) return false;
    }
  }
  return true;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

bool point_in_polygon(const Eigen::Vector2d& p, const Polygon& poly) {
  check_polygon(poly);
  const std::size_t k = poly.size();
  double extent = 1.0;
  for (const auto& v : poly) extent = std::max(extent, v.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * extent;
  for (std::size_t i = 0, j = k - 1; i < k; j = i++) {
    if ((closest_on_segment(p, poly[j], poly[i]) - p).norm() <= tol) return true;
  }
  bool inside = false;
  for (std::size_t i = 0, j = k - 1; i < k; j = i++) {
    const Eigen::Vector2d& a = poly[i];
    const Eigen::Vector2d& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x_cross = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

Eigen::Vector2d nearest_boundary_point(const Eigen::Vector2d& p, const Polygon& poly) {
  check_polygon(poly);
  Eigen::Vector2d best = poly.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Eigen::Vector2d c = closest_on_segment(p, poly[j], poly[i]);
    const double d = (c - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

Environment Environment::box(const Eigen::Ref<const Eigen::VectorXd>& low, const Eigen::Ref<const Eigen::VectorXd>& high) {
  if (low.size() != high.size()) throw InvalidArgument("bounds: low and high have different dimensions");
  Environment env;
  env.bounds.resize(low.size(), 2);
  env.bounds.col(0) = low;
  env.bounds.col(1) = high;
  env.validate();
  return env;
}

bool Environment::in_bounds(const Eigen::Ref<const Eigen::VectorXd>& p, double tol) const {
  if (p.size() != dim()) throw InvalidArgument("point dimension does not match the environment");
  return ((p.array() >= bounds.col(0).array() - tol) && (p.array() <= bounds.col(1).array() + tol)).all();
}

bool Environment::in_obstacle(const Eigen::Ref<const Eigen::VectorXd>& p) const {
  if (obstacles.empty()) return false;
  const Eigen::Vector2d q(p(0), p(1));
  return std::any_of(obstacles.begin(), obstacles.end(), [&](const Polygon& poly) { return point_in_polygon(q, poly); });
}

void Environment::clamp(Eigen::Ref<Eigen::VectorXd> p) const {
  p = p.cwiseMax(bounds.col(0)).cwiseMin(bounds.col(1));
}

void Environment::validate() const {
  if (bounds.rows() < 1 || bounds.cols() != 2) throw InvalidArgument("bounds must be a non-empty list of [low, high] pairs");
  if (!bounds.allFinite()) throw InvalidArgument("bounds must be finite");
  for (Eigen::Index i = 0; i < bounds.rows(); ++i) {
    if (!(bounds(i, 0) < bounds(i, 1))) {
      throw InvalidArgument("bounds for dimension " + std::to_string(i + 1) + " need low < high");
    }
  }
  if (!obstacles.empty() && dim() != 2) throw InvalidArgument("obstacles are only supported in 2D environments");
  for (const auto& poly : obstacles) {
    check_polygon(poly);
    if (!polygon_is_simple(poly)) throw InvalidArgument("obstacle polygon is self-intersecting");
  }
  if (candidates) {
    if (candidates->cols() != dim()) throw InvalidArgument("candidate dimension does not match the bounds");
    for (Eigen::Index i = 0; i < candidates->rows(); ++i) {
      if (!candidates->row(i).allFinite() || !feasible(candidates->row(i).transpose())) {
        throw InvalidArgument("candidate " + std::to_string(i) + " lies outside the bounds or inside an obstacle");
      }
    }
  }
}

const Eigen::MatrixXd& Environment::require_candidates() const {
  if (!candidates || candidates->rows() == 0) throw InvalidArgument("this method needs a candidate set");
  return *candidates;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::MatrixXd sample_uniform(const Environment& env, Eigen::Index n, std::uint64_t seed) {
  env.validate();
  if (n < 1) throw InvalidArgument("sample_uniform needs n >= 1");
  std::mt19937_64 rng(seed);
  const Eigen::Index d = env.dim();
  std::vector<std::uniform_real_distribution<double>> dists;
  for (Eigen::Index k = 0; k < d; ++k) dists.emplace_back(env.bounds(k, 0), env.bounds(k, 1));

  Eigen::MatrixXd out(n, d);
  Eigen::VectorXd p(d);
  Eigen::Index accepted = 0;
  long attempts = 0;
  constexpr long kProbe = 1000000;
  while (accepted < n) {
    for (Eigen::Index k = 0; k < d; ++k) p(k) = dists[static_cast<std::size_t>(k)](rng);
    ++attempts;
    if (!env.in_obstacle(p)) out.row(accepted++) = p.transpose();
    if (attempts == kProbe && static_cast<double>(accepted) < 0.01 * static_cast<double>(attempts)) {
      throw EnvironmentDegenerate("rejection sampling accepted " + std::to_string(accepted) + " of " +
                                  std::to_string(attempts) + " draws; obstacles cover almost all of the bounds");
    }
  }
  return out;
}

double GridField::at(const Eigen::Vector2d& p) const {
  auto locate = [](const Eigen::VectorXd& axis, double v, Eigen::Index& i, double& t) {
    const Eigen::Index n = axis.size();
    if (n == 1) {
      i = 0;
      t = 0.0;
      return;
    }
    const double* begin = axis.data();
    const double* it = std::upper_bound(begin, begin + n, v);
    i = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(it - begin) - 1, 0, n - 2);
    t = std::clamp((v - axis(i)) / (axis(i + 1) - axis(i)), 0.0, 1.0);
  };
  if (!contains(p)) throw InvalidArgument("field query outside the lattice extent");
  Eigen::Index i = 0, j = 0;
  double tx = 0.0, ty = 0.0;
  locate(xs, p.x(), i, tx);
  locate(ys, p.y(), j, ty);
  const Eigen::Index i1 = std::min<Eigen::Index>(i + 1, xs.size() - 1);
  const Eigen::Index j1 = std::min<Eigen::Index>(j + 1, ys.size() - 1);
  return (1 - tx) * (1 - ty) * values(i, j) + tx * (1 - ty) * values(i1, j) + (1 - tx) * ty * values(i, j1) +
         tx * ty * values(i1, j1);
}

bool GridField::contains(const Eigen::Vector2d& p, double tol) const {
  return p.x() >= xs(0) - tol && p.x() <= xs(xs.size() - 1) + tol && p.y() >= ys(0) - tol &&
         p.y() <= ys(ys.size() - 1) + tol;
}

EvaluationGrid GridField::to_grid() const {
  EvaluationGrid g;
  g.points.resize(xs.size() * ys.size(), 2);
  Eigen::VectorXd v(g.points.rows());
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < ys.size(); ++j) {
    for (Eigen::Index i = 0; i < xs.size(); ++i, ++k) {
      g.points(k, 0) = xs(i);
      g.points(k, 1) = ys(j);
      v(k) = values(i, j);
    }
  }
  g.labels = v;
  return g;
}

Eigen::MatrixXd lattice_points(const Environment& env, int nx, int ny) {
  if (env.dim() != 2) throw InvalidArgument("lattice_points needs a 2D environment");
  if (nx < 1 || ny < 1) throw InvalidArgument("lattice needs at least one node per axis");
  const Eigen::VectorXd xs = Eigen::VectorXd::LinSpaced(nx, env.bounds(0, 0), env.bounds(0, 1));
  const Eigen::VectorXd ys = Eigen::VectorXd::LinSpaced(ny, env.bounds(1, 0), env.bounds(1, 1));
  Eigen::MatrixXd pts(nx * ny, 2);
  Eigen::Index k = 0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i, ++k) pts.row(k) << xs(i), ys(j);
  return pts;
}

EvaluationGrid synth_field(const Environment& env, const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& grid,
                           std::uint64_t seed) {
  spec.validate();
  if (grid.rows() < 1) throw InvalidArgument("synth_field needs at least one grid point");
  if (grid.rows() > 5000) throw InvalidArgument("synth_field is limited to 5000 grid points (dense factorization)");
  spec.check_dimension(grid.cols());
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    if (!env.in_bounds(grid.row(i).transpose(), 1e-12)) throw InvalidArgument("synth_field grid point outside bounds");
  }
  Eigen::MatrixXd k = kernel_matrix(spec, grid, grid);
  k.diagonal().array() += 1e-8;
  static constexpr double kLevels[] = {0.0, 1e-8, 1e-6, 1e-4};
  const JitteredCholesky chol = jittered_cholesky(k, kLevels, spec.variance, "synthetic field covariance");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(grid.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  EvaluationGrid out;
  out.points = grid;
  out.labels = chol.matrix_l() * z;
  return out;
}

GridField synth_grid_field(const Environment& env, const KernelSpec& spec, int nx, int ny, std::uint64_t seed) {
  const EvaluationGrid g = synth_field(env, spec, lattice_points(env, nx, ny), seed);
  GridField f;
  f.xs = Eigen::VectorXd::LinSpaced(nx, env.bounds(0, 0), env.bounds(0, 1));
  f.ys = Eigen::VectorXd::LinSpaced(ny, env.bounds(1, 0), env.bounds(1, 1));
  f.values = Eigen::Map<const Eigen::MatrixXd>(g.labels->data(), nx, ny);
  return f;
}

Dataset line_integral_data(const GridField& field, const std::vector<LineSegment>& lines, int quad_points,
                           double noise_sd, std::uint64_t seed) {
  if (quad_points < 2) throw InvalidArgument("line_integral_data needs quad_points >= 2");
  if (!(noise_sd >= 0.0)) throw InvalidArgument("noise standard deviation must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, noise_sd > 0.0 ? noise_sd : 1.0);
  Dataset out;
  out.inputs.resize(static_cast<Eigen::Index>(lines.size()), 4);
  Eigen::VectorXd y(out.inputs.rows());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const LineSegment& seg = lines[i];
    const auto row = static_cast<Eigen::Index>(i);
    if (!field.contains(seg.start) || !field.contains(seg.start + seg.delta)) {
      throw InvalidArgument("line " + std::to_string(i) + " leaves the field extent");
    }
    double sum = 0.0;
    for (int q = 0; q < quad_points; ++q) sum += field.at(seg.start + seg.delta * ((q + 0.5) / quad_points));
    y(row) = seg.delta.norm() * sum / quad_points;
    if (noise_sd > 0.0) y(row) += normal(rng);
    out.inputs.row(row) << seg.start.x(), seg.start.y(), seg.delta.x(), seg.delta.y();
  }
  out.labels = y;
  return out;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("dataset file is empty: " + path.string(), 1);
  const std::vector<std::string> header = split_csv(line);
  std::size_t d = header.size();
  bool has_y = !header.empty() && header.back() == "y";
  if (has_y) --d;
  if (d == 0) throw ParseError("dataset header needs at least one x column", 1, 1);
  for (std::size_t c = 0; c < d; ++c) {
    if (header[c] != "x" + std::to_string(c + 1)) {
      throw ParseError("expected header column x" + std::to_string(c + 1) + ", found '" + header[c] + "'", 1, c + 1);
    }
  }

  std::vector<double> values;
  std::size_t row = 1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw ParseError("row has " + std::to_string(cells.size()) + " columns, header has " +
                           std::to_string(header.size()),
                       row);
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string& cell = cells[c];
      char* end = nullptr;
      const double v = cell.empty() ? 0.0 : std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v)) {
        throw ParseError("non-numeric or non-finite cell '" + cell + "'", row, c + 1);
      }
      values.push_back(v);
    }
    ++rows;
  }

  const Eigen::Index cols = static_cast<Eigen::Index>(header.size());
  const Eigen::MatrixXd all =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          values.data(), static_cast<Eigen::Index>(rows), cols);
  Dataset out;
  out.inputs = all.leftCols(static_cast<Eigen::Index>(d));
  if (has_y) out.labels = all.col(cols - 1);
  return out;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file: " + path.string());
  for (Eigen::Index c = 0; c < data.dim(); ++c) out << (c ? "," : "") << 'x' << c + 1;
  if (data.labeled()) out << ",y";
  out << '\n';
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index c = 0; c < data.dim(); ++c) out << (c ? "," : "") << format_double(data.inputs(i, c));
    if (data.labeled()) out << ',' << format_double((*data.labels)(i));
    out << '\n';
  }
  if (!out) throw IoError("failed while writing dataset file: " + path.string());
}

}  // namespace sgpplace
