#pragma once

// Reproducible point generation and preprocessing.

#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mavik/core.hpp"
#include "mavik/errors.hpp"

namespace mavik {

/// Counter-based generator: output i is splitmix64's finalizer applied to
/// seed + i * golden-gamma. Pure integer arithmetic, so streams are identical
/// across platforms and compilers; uniform and normal variates are derived
/// here rather than through <random> distributions for the same reason.
class CounterRng {
 public:
  static constexpr const char* kAlgorithm = "splitmix64-counter";

  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (one variate per call).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

enum class Variety { V1, V2, V3 };

inline std::string to_string(Variety v) {
  switch (v) {
    case Variety::V1: return "V1";
    case Variety::V2: return "V2";
    case Variety::V3: return "V3";
  }
  return "?";
}

inline Variety parse_variety(const std::string& s) {
  if (s == "V1" || s == "v1") return Variety::V1;
  if (s == "V2" || s == "v2") return Variety::V2;
  if (s == "V3" || s == "v3") return Variety::V3;
  throw ContractViolation("unknown variety '" + s + "'");
}

inline int variety_dim(Variety v) { return v == Variety::V1 ? 2 : 3; }

/// Residuals of the defining equations at each point (one column per
/// equation). V1 is the four-leaved rose r = cos 2theta, i.e.
/// (x^2+y^2)^3 - (x^2-y^2)^2 = 0.
inline Matrix variety_residuals(Variety v, const Matrix& P) {
  Matrix out(P.rows(), v == Variety::V2 ? 2 : 1);
  for (Index i = 0; i < P.rows(); ++i) {
    const double x = P(i, 0);
    const double y = P(i, 1);
    switch (v) {
      case Variety::V1: {
        const double r2 = x * x + y * y;
        const double d = x * x - y * y;
        out(i, 0) = r2 * r2 * r2 - d * d;
        break;
      }
      case Variety::V2: {
        const double z = P(i, 2);
        out(i, 0) = x + y - z;
        out(i, 1) = x * x * x - 9.0 * (x * x - 3.0 * y * y);
        break;
      }
      case Variety::V3: {
        const double z = P(i, 2);
        out(i, 0) = x * x - y * y * z * z + z * z * z;
        break;
      }
    }
  }
  return out;
}

inline std::string seed_tag(std::uint64_t seed) {
  return std::string("rng=") + CounterRng::kAlgorithm + " seed=" + std::to_string(seed);
}

/// count x dim points i.i.d. uniform on [-1, 1).
inline PointSet sample_generic(Index count, Index dim, std::uint64_t seed) {
  detail::require(count >= 1 && dim >= 1, "sample_generic: count and dim must be >= 1");
  CounterRng rng(seed);
  Matrix P(count, dim);
  for (Index i = 0; i < count; ++i)
    for (Index k = 0; k < dim; ++k) P(i, k) = rng.uniform(-1.0, 1.0);
  return PointSet(std::move(P), {"generic(" + std::to_string(count) + "x" + std::to_string(dim) + ") " + seed_tag(seed)});
}

/// Points on V1-V3 from their parametrizations, parameters uniform on
/// [-1,1) (V1), [-2.5,2.5) (V2), [-1,1)^2 (V3).
inline PointSet sample_variety(Variety which, Index count, std::uint64_t seed) {
  detail::require(count >= 1, "sample_variety: count must be >= 1");
  CounterRng rng(seed);
  Matrix P(count, variety_dim(which));
  for (Index i = 0; i < count; ++i) {
    switch (which) {
      case Variety::V1: {
        const double u = rng.uniform(-1.0, 1.0);
        P(i, 0) = std::cos(2 * u) * std::cos(u);
        P(i, 1) = std::cos(2 * u) * std::sin(u);
        break;
      }
      case Variety::V2: {
        const double u = rng.uniform(-2.5, 2.5);
        const double x = 3.0 * (3.0 - u * u);
        const double y = u * (3.0 - u * u);
        P(i, 0) = x;
        P(i, 1) = y;
        P(i, 2) = x + y;
        break;
      }
      case Variety::V3: {
        const double u = rng.uniform(-1.0, 1.0);
        const double v = rng.uniform(-1.0, 1.0);
        P(i, 0) = v * (u * u - v * v);
        P(i, 1) = u;
        P(i, 2) = u * u - v * v;
        break;
      }
    }
  }
  return PointSet(std::move(P), {"variety(" + to_string(which) + ", " + std::to_string(count) + ") " + seed_tag(seed)});
}

/// Gaussian noise matrix with per-coordinate standard deviation nu.
inline Matrix gaussian_noise(Index rows, Index cols, double nu, std::uint64_t seed) {
  CounterRng rng(seed);
  Matrix N(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index k = 0; k < cols; ++k) N(i, k) = nu * rng.normal();
  return N;
}

/// Adds N(0, nu^2) noise to each coordinate, then re-centers.
inline PointSet perturb(const PointSet& X, double nu, std::uint64_t seed) {
  detail::require(nu >= 0.0, "perturb: noise level must be >= 0");
  Matrix P = X.points() + gaussian_noise(X.size(), X.dim(), nu, seed);
  P.rowwise() -= P.colwise().mean();
  return X.derive(std::move(P), "perturb(nu=" + std::to_string(nu) + ") " + seed_tag(seed) + "; recenter");
}

/// Subtracts the mean and divides by the largest absolute coordinate.
inline PointSet center_and_unitbox(const PointSet& X) {
  Matrix P = X.points().rowwise() - X.points().colwise().mean();
  const double scale = P.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) throw DegenerateInput("center_and_unitbox: all points are identical");
  P /= scale;
  return X.derive(std::move(P), "center_and_unitbox(scale=" + std::to_string(scale) + ")");
}

struct PreprocessResult {
  Matrix U_F, U_G;
  Matrix V_F, V_G;
  Vector singular_values;
  Vector mean;
  PointSet Y;  // X * V_F
  bool fully_degenerate = false;
};

/// Splits the principal directions of the centered points by whether their
/// singular value exceeds epsilon; the fit can then run on Y = X V_F with
/// fewer variables while (x - mean) V_G are linear vanishing polynomials.
inline PreprocessResult svd_preprocess(const PointSet& X, double epsilon) {
  PreprocessResult out;
  out.mean = X.points().colwise().mean().transpose();
  const Matrix X0 = X.points().rowwise() - out.mean.transpose();
  Eigen::JacobiSVD<Matrix> svd(X0, Eigen::ComputeFullU | Eigen::ComputeFullV);
  out.singular_values = svd.singularValues();
  const Index n = X.dim();
  Index keep = 0;
  while (keep < out.singular_values.size() && out.singular_values(keep) > epsilon) ++keep;
  out.V_F = svd.matrixV().leftCols(keep);
  out.V_G = svd.matrixV().rightCols(n - keep);
  out.U_F = svd.matrixU().leftCols(keep);
  out.U_G = svd.matrixU().rightCols(svd.matrixU().cols() - keep);
  out.fully_degenerate = keep == 0;
  Matrix Y = X.points() * out.V_F;
  if (keep > 0)
    out.Y = X.derive(std::move(Y), "svd_preprocess(eps=" + std::to_string(epsilon) + ", m=" + std::to_string(keep) + ")");
  return out;
}

// ---------------------------------------------------------------------------
// Point files

inline PointSet read_points_csv(std::istream& in) {
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line_no == 1 && line.find_first_of("xX") != std::string::npos) continue;  // header
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw FormatError("points CSV line " + std::to_string(line_no) + ": cannot parse '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError("points CSV line " + std::to_string(line_no) + ": inconsistent column count");
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty()) throw FormatError("points CSV: no data rows");
  Matrix P(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].size(); ++k) P(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
  if (!P.allFinite()) throw FormatError("points CSV: non-finite coordinate");
  return PointSet(std::move(P), {"csv"});
}

inline void write_points_csv(std::ostream& out, const PointSet& X) {
  for (Index k = 0; k < X.dim(); ++k) out << (k ? "," : "") << "x" << (k + 1);
  out << "\n";
  char buf[32];
  for (Index i = 0; i < X.size(); ++i) {
    for (Index k = 0; k < X.dim(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", X.points()(i, k));
      out << (k ? "," : "") << buf;
    }
    out << "\n";
  }
}

inline nlohmann::json points_to_json(const PointSet& X) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < X.size(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (Index k = 0; k < X.dim(); ++k) r.push_back(X.points()(i, k));
    rows.push_back(std::move(r));
  }
  return {{"points", rows}, {"provenance", {{"steps", X.provenance()}}}};
}

inline PointSet points_from_json(const nlohmann::json& j) {
  try {
    const auto& rows = j.at("points");
    if (!rows.is_array() || rows.empty()) throw FormatError("points JSON: 'points' must be a non-empty array");
    const std::size_t n = rows.front().size();
    Matrix P(static_cast<Index>(rows.size()), static_cast<Index>(n));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != n) throw FormatError("points JSON: inconsistent row length");
      for (std::size_t k = 0; k < n; ++k) P(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k].get<double>();
    }
    std::vector<std::string> steps;
    if (j.contains("provenance") && j["provenance"].contains("steps"))
      steps = j["provenance"]["steps"].get<std::vector<std::string>>();
    return PointSet(std::move(P), std::move(steps));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("points JSON: ") + e.what());
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("points JSON: ") + e.what());
  }
}

/// Reads `.json` files as JSON points, anything else as CSV.
inline PointSet load_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open points file '" + path + "'");
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("points JSON: " + std::string(e.what()));
    }
    return points_from_json(j);
  }
  try {
    return read_points_csv(in);
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("points CSV: ") + e.what());
  }
}

}  // namespace mavik
