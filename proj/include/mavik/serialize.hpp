#pragma once

// JSON bundles written by the CLI: basis.json (provenance DAG, strata,
// extents), report.json (deterministic run record), timing.json.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <unordered_map>
#include <vector>

#include "mavik/coefficients.hpp"
#include "mavik/engine.hpp"

namespace mavik {

inline constexpr int kSchemaVersion = 1;

/// FNV-1a over the point count, dimension and coordinate bits.
inline std::string points_digest(const PointSet& X) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(X.size()));
  mix(static_cast<std::uint64_t>(X.dim()));
  for (Index i = 0; i < X.size(); ++i) {
    for (Index k = 0; k < X.dim(); ++k) {
      std::uint64_t bits;
      const double v = X.points()(i, k);
      std::memcpy(&bits, &v, sizeof bits);
      mix(bits);
    }
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string("fnv1a64:") + buf;
}

namespace detail {

/// Flattens provenance DAGs into a node list in dependency order.
class NodeTable {
 public:
  std::size_t id(const NodePtr& node) {
    if (auto it = ids_.find(node.get()); it != ids_.end()) return it->second;
    nlohmann::json entry = std::visit(
        [&](const auto& op) -> nlohmann::json {
          using T = std::decay_t<decltype(op)>;
          if constexpr (std::is_same_v<T, ConstantOp>) {
            return {{"op", "constant"}, {"value", op.value}};
          } else if constexpr (std::is_same_v<T, VariableOp>) {
            return {{"op", "variable"}, {"index", op.index}};
          } else if constexpr (std::is_same_v<T, ProductOp>) {
            const std::size_t l = id(op.left);
            const std::size_t r = id(op.right);
            return {{"op", "product"}, {"left", l}, {"right", r}};
          } else {
            std::vector<std::size_t> kids;
            kids.reserve(op.children.size());
            for (const auto& c : op.children) kids.push_back(id(c));
            return {{"op", "lincomb"}, {"children", kids}, {"weights", op.weights}};
          }
        },
        node->op);
    entry["degree"] = node->degree;
    const std::size_t k = nodes_.size();
    nodes_.push_back(std::move(entry));
    ids_.emplace(node.get(), k);
    return k;
  }

  nlohmann::json take() { return std::move(nodes_); }

 private:
  std::unordered_map<const ProvNode*, std::size_t> ids_;
  nlohmann::json nodes_ = nlohmann::json::array();
};

}  // namespace detail

/// Serializes a basis. With `with_coefficients`, the G polynomials' symbolic
/// expansions are embedded as well (may throw ResourceError).
inline nlohmann::json basis_to_json(const Basis& B, const PointSet& X, bool with_coefficients = false,
                                    std::size_t term_cap = kDefaultTermCap) {
  detail::NodeTable table;
  nlohmann::json F = nlohmann::json::array();
  nlohmann::json G = nlohmann::json::array();
  for (const auto& s : B.F) {
    nlohmann::json ids = nlohmann::json::array();
    for (const auto& p : s) ids.push_back(table.id(p.node()));
    F.push_back(std::move(ids));
  }
  for (const auto& s : B.G) {
    nlohmann::json ids = nlohmann::json::array();
    for (const auto& p : s) ids.push_back(table.id(p.node()));
    G.push_back(std::move(ids));
  }
  nlohmann::json j{{"schema_version", kSchemaVersion},
                   {"n", B.n},
                   {"num_points", X.size()},
                   {"points_digest", points_digest(X)},
                   {"nodes", table.take()},
                   {"F", F},
                   {"G", G},
                   {"extents", B.extents}};
  if (with_coefficients) {
    Expander ex(static_cast<int>(B.n), term_cap);
    nlohmann::json coeffs = nlohmann::json::array();
    for (const auto& s : B.G) {
      nlohmann::json row = nlohmann::json::array();
      for (const auto& p : s) row.push_back(ex(p.node()));
      coeffs.push_back(std::move(row));
    }
    j["coefficients"] = {{"G", coeffs}};
  }
  return j;
}

/// Rebuilds a basis from basis_to_json output and replays it on X. By default
/// X must be the point set the basis was fit on; pass check_points = false to
/// replay on other points of the same dimension.
inline Basis basis_from_json(const nlohmann::json& j, const PointSet& X, bool check_points = true) {
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) throw FormatError("basis: unsupported schema_version");
    const Index n = j.at("n").get<Index>();
    if (n != X.dim()) throw ContractViolation("basis: point dimension differs from the basis");
    if (check_points && (j.at("num_points").get<Index>() != X.size() ||
                         j.at("points_digest").get<std::string>() != points_digest(X)))
      throw ContractViolation("basis: points do not match the points the basis was fit on");
    std::vector<NodePtr> nodes;
    for (const auto& e : j.at("nodes")) {
      const auto op = e.at("op").get<std::string>();
      auto ref = [&](std::size_t k) {
        if (k >= nodes.size()) throw FormatError("basis: node refers forward or out of range");
        return nodes[k];
      };
      if (op == "constant") {
        nodes.push_back(ProvNode::constant(e.at("value").get<double>()));
      } else if (op == "variable") {
        const int k = e.at("index").get<int>();
        if (k < 0 || k >= n) throw FormatError("basis: variable index out of range");
        nodes.push_back(ProvNode::variable(k));
      } else if (op == "product") {
        nodes.push_back(ProvNode::product(ref(e.at("left").get<std::size_t>()), ref(e.at("right").get<std::size_t>())));
      } else if (op == "lincomb") {
        std::vector<NodePtr> kids;
        for (const auto& c : e.at("children")) kids.push_back(ref(c.get<std::size_t>()));
        nodes.push_back(ProvNode::lincomb(std::move(kids), e.at("weights").get<std::vector<double>>()));
      } else {
        throw FormatError("basis: unknown node op '" + op + "'");
      }
    }
    Replayer replay(X, true);
    auto strata = [&](const nlohmann::json& js) {
      std::vector<std::vector<Poly>> out;
      for (const auto& s : js) {
        auto& dst = out.emplace_back();
        for (const auto& id : s) {
          const auto k = id.get<std::size_t>();
          if (k >= nodes.size()) throw FormatError("basis: stratum refers to a missing node");
          dst.push_back(replay.poly(nodes[k]));
        }
      }
      return out;
    };
    Basis B;
    B.n = n;
    B.F = strata(j.at("F"));
    B.G = strata(j.at("G"));
    B.extents = j.at("extents").get<std::vector<std::vector<double>>>();
    if (B.extents.size() != B.G.size()) throw FormatError("basis: extents do not match G strata");
    return B;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("basis: ") + e.what());
  }
}

inline nlohmann::json config_to_json(const EngineConfig& c) {
  nlohmann::json j{{"epsilon", c.epsilon},
                   {"mode", c.mode.name()},
                   {"dedup_degree2", c.dedup_degree2},
                   {"rank_tol", c.rank_tol},
                   {"dimension_tol", c.dimension_tol},
                   {"term_cap", c.term_cap}};
  if (c.mode.kind == NormKind::Gradient) j["z"] = c.mode.z;
  j["m_constant"] = c.m_constant ? nlohmann::json(*c.m_constant) : nlohmann::json(nullptr);
  j["max_degree"] = c.max_degree ? nlohmann::json(*c.max_degree) : nlohmann::json(nullptr);
  j["d_max"] = c.d_max ? nlohmann::json(*c.d_max) : nlohmann::json(nullptr);
  j["d_min"] = c.d_min ? nlohmann::json(*c.d_min) : nlohmann::json(nullptr);
  return j;
}

/// Run record without wall time, so identical runs give identical files.
inline nlohmann::json report_to_json(const FitReport& r, const PointSet& X) {
  int g_total = 0;
  for (int c : r.g_counts) g_total += c;
  return {{"schema_version", kSchemaVersion},
          {"config", config_to_json(r.config)},
          {"m_constant", r.m_constant},
          {"num_points", r.num_points},
          {"dim", r.dim},
          {"points_digest", points_digest(X)},
          {"points_provenance", X.provenance()},
          {"g_size", g_total},
          {"g_counts", r.g_counts},
          {"f_counts", r.f_counts},
          {"candidate_counts", r.candidate_counts},
          {"retained_ranks", r.retained_ranks},
          {"spectra", r.spectra},
          {"termination", to_string(r.reason)},
          {"stable_epsilon_interval", {r.stable_low, std::isfinite(r.stable_high) ? nlohmann::json(r.stable_high) : nlohmann::json(nullptr)}}};
}

inline nlohmann::json timing_to_json(const FitReport& r) {
  return {{"schema_version", kSchemaVersion}, {"wall_seconds", r.wall_seconds}};
}

}  // namespace mavik
