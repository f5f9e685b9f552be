// mavik: command-line front end for fitting, evaluating and reducing
// approximate vanishing ideal bases, plus the benchmark harnesses.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mavik/mavik.hpp"

namespace fs = std::filesystem;
using namespace mavik;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitResource = 3;

std::string sig3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string join(const std::vector<int>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s + "]";
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

fs::path ensure_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

nlohmann::json matrix_rows(const Matrix& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (Index k = 0; k < M.cols(); ++k) r.push_back(M(i, k));
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<int> load_target(const std::string& path) {
  if (path.empty()) throw FormatError("retrieval-test: a target profile file is required (--target)");
  const auto j = read_json(path);
  try {
    auto p = j.at("profile").get<std::vector<int>>();
    if (p.size() < 2) throw FormatError("target profile must cover degrees 0..T with T >= 1");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("target '" + path + "': " + e.what());
  }
}

struct FitArgs {
  std::string points;
  double eps = 1e-6;
  std::string mode = "grad";
  double z = 1.0;
  std::optional<double> m;
  std::optional<int> max_degree;
  std::optional<int> dmax;
  std::optional<int> dmin;
  bool no_dedup = false;
  double scale = 1.0;
  double noise = 0.0;
  std::uint64_t seed = 0;
  bool coefficients = false;
  std::size_t term_cap = kDefaultTermCap;
  std::string out = "mavik-out";
};

int cmd_fit(const FitArgs& a) {
  PointSet X = load_points(a.points);
  if (a.noise > 0.0) X = perturb(X, a.noise, a.seed);
  if (a.scale != 1.0) X = X.scaled(a.scale);
  EngineConfig cfg;
  cfg.epsilon = a.eps;
  cfg.mode = NormalizationMode::parse(a.mode, a.z);
  cfg.m_constant = a.m;
  cfg.max_degree = a.max_degree;
  cfg.d_max = a.dmax;
  cfg.d_min = a.dmin;
  cfg.dedup_degree2 = !a.no_dedup;
  cfg.term_cap = a.term_cap;
  const auto r = fit(X, cfg);
  const auto dims = estimate_dimension(r.basis, X, cfg.dimension_tol);
  auto report = report_to_json(r.report, X);
  report["dimension_estimate"] = {{"d_min", dims.d_min}, {"d_max", dims.d_max}};

  const auto dir = ensure_dir(a.out);
  write_json(dir / "basis.json", basis_to_json(r.basis, X, a.coefficients, cfg.term_cap));
  write_json(dir / "report.json", report);
  write_json(dir / "timing.json", timing_to_json(r.report));
  std::cout << "mode " << cfg.mode.name() << "  eps " << sig3(cfg.epsilon) << "  points " << X.size() << "x" << X.dim()
            << "\n|G| = " << r.basis.g_size() << "  profile " << join(r.basis.g_profile())
            << "  max degree " << r.basis.max_g_degree() << "\n|F| = " << r.basis.f_size() << "  profile "
            << join(r.basis.f_profile()) << "\ntermination " << to_string(r.report.reason) << "  (d_min, d_max) = ("
            << dims.d_min << ", " << dims.d_max << ")\nwrote " << dir.string() << "/{basis,report,timing}.json\n";
  return 0;
}

int cmd_evaluate(const std::string& basis_path, const std::string& points_path, const std::string& out) {
  const PointSet X = load_points(points_path);
  const Basis B = basis_from_json(read_json(basis_path), X, false);
  const auto ev = evaluate(B, X);
  nlohmann::json j{{"schema_version", kSchemaVersion},
                   {"num_points", X.size()},
                   {"F", matrix_rows(ev.F)},
                   {"G", matrix_rows(ev.G)},
                   {"g_norms", std::vector<double>(ev.G.cols())}};
  for (Index c = 0; c < ev.G.cols(); ++c) j["g_norms"][static_cast<std::size_t>(c)] = ev.G.col(c).norm();
  write_json(out, j);
  std::cout << "evaluated " << ev.F.cols() << " F and " << ev.G.cols() << " G polynomials on " << X.size()
            << " points; wrote " << out << "\n";
  return 0;
}

int cmd_reduce(const std::string& basis_path, const std::string& points_path, double threshold, const std::string& out) {
  const PointSet X = load_points(points_path);
  const Basis B = basis_from_json(read_json(basis_path), X, true);
  const auto rep = reduce_basis(B, X, threshold);
  const auto dir = ensure_dir(out);
  auto j = reduction_to_json(rep);
  j["schema_version"] = kSchemaVersion;
  write_json(dir / "reduction.json", j);
  write_json(dir / "basis.json", basis_to_json(apply_reduction(B, rep), X));
  std::cout << "kept " << rep.kept.size() << " of " << B.g_size() << " (threshold " << sig3(threshold) << ")\n";
  for (const auto& rm : rep.removed)
    std::cout << "  removed G#" << rm.index << " degree " << rm.poly.degree() << "  residual " << sig3(rm.residual)
              << "\n";
  std::cout << "wrote " << dir.string() << "/{reduction,basis}.json\n";
  return 0;
}

int cmd_bench(const std::vector<int>& dims, int count, double eps, const std::vector<std::string>& modes,
              std::uint64_t seed, const std::string& out) {
  std::vector<Index> d(dims.begin(), dims.end());
  std::vector<NormalizationMode> ms;
  for (const auto& m : modes) ms.push_back(NormalizationMode::parse(m));
  const auto rows = bench_generic(d, count, eps, ms, seed);
  nlohmann::json j = nlohmann::json::array();
  std::printf("%-10s %-6s %6s %8s %10s  %s\n", "(|X|,n)", "mode", "|G|", "max deg", "runtime/s", "profile");
  for (const auto& r : rows) {
    j.push_back({{"count", r.count},
                 {"dim", r.dim},
                 {"mode", r.mode},
                 {"g_size", r.g_size},
                 {"profile", r.profile},
                 {"max_degree", r.max_degree},
                 {"runtime_seconds", r.runtime_seconds},
                 {"bounds_ok", r.bounds_ok}});
    const std::string tag = "(" + std::to_string(r.count) + "," + std::to_string(r.dim) + ")";
    std::printf("%-10s %-6s %6zu %8d %10s  %s\n", tag.c_str(), r.mode.c_str(), r.g_size, r.max_degree,
                sig3(r.runtime_seconds).c_str(), join(r.profile).c_str());
  }
  if (!out.empty()) {
    const auto dir = ensure_dir(out);
    write_json(dir / "bench.json", {{"schema_version", kSchemaVersion}, {"epsilon", eps}, {"seed", seed}, {"rows", j}});
  }
  return 0;
}

struct RetrievalArgs {
  std::string variety = "V1";
  double noise = 0.05;
  std::vector<double> scales{0.01, 0.1, 1.0, 10.0, 100.0};
  int runs = 20;
  std::string mode = "grad";
  std::string target;
  int count = 100;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_retrieval(const RetrievalArgs& a) {
  RetrievalSettings s;
  s.variety = parse_variety(a.variety);
  s.target = load_target(a.target);
  s.noise = a.noise;
  s.scales = a.scales;
  s.runs = a.runs;
  s.mode = NormalizationMode::parse(a.mode);
  s.count = a.count;
  s.seed = a.seed;
  s.threads = worker_count();
  const auto outcomes = retrieval_test(s);

  nlohmann::json rows = nlohmann::json::array();
  std::printf("%-4s %-6s %8s %9s %23s %10s\n", "var", "mode", "alpha", "success", "valid eps range", "e.v.");
  for (const auto& o : outcomes) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : o.runs)
      runs.push_back({{"success", r.success}, {"low", r.low}, {"high", r.high}, {"extent", r.extent},
                      {"contiguous", r.contiguous}, {"fits", r.fits}});
    nlohmann::json row{{"alpha", o.alpha},
                       {"success", o.success()},
                       {"successes", o.successes},
                       {"trials", o.trials},
                       {"valid_eps_range", o.valid_eps_range ? nlohmann::json{o.valid_eps_range->first, o.valid_eps_range->second}
                                                             : nlohmann::json(nullptr)},
                       {"extent_at_unperturbed", o.valid_eps_range ? nlohmann::json(o.extent_at_unperturbed) : nlohmann::json(nullptr)},
                       {"noncontiguous_warning", o.noncontiguous_warning},
                       {"runs", runs}};
    rows.push_back(std::move(row));
    const std::string rate = std::to_string(o.successes) + "/" + std::to_string(o.trials);
    const std::string range = o.valid_eps_range
                                  ? "[" + sig3(o.valid_eps_range->first) + ", " + sig3(o.valid_eps_range->second) + "]"
                                  : "-";
    const std::string ev = o.valid_eps_range ? sig3(o.extent_at_unperturbed) : "-";
    std::printf("%-4s %-6s %8s %9s %23s %10s\n", a.variety.c_str(), s.mode.name().c_str(), sig3(o.alpha).c_str(),
                rate.c_str(), range.c_str(), ev.c_str());
    if (o.noncontiguous_warning)
      std::fprintf(stderr, "warning: alpha=%s has a non-contiguous valid epsilon set; widest interval reported\n",
                   sig3(o.alpha).c_str());
  }
  if (!a.out.empty()) {
    const auto dir = ensure_dir(a.out);
    write_json(dir / "retrieval.json", {{"schema_version", kSchemaVersion},
                                        {"variety", a.variety},
                                        {"mode", s.mode.name()},
                                        {"noise", s.noise},
                                        {"runs", s.runs},
                                        {"count", s.count},
                                        {"seed", s.seed},
                                        {"target", s.target},
                                        {"grid_points", epsilon_grid_size()},
                                        {"rows", rows}});
  }
  return 0;
}

int cmd_sample(const std::string& variety, int dim, int count, double noise, std::uint64_t seed, const std::string& out) {
  PointSet X = variety.empty() ? sample_generic(count, dim, seed) : center_and_unitbox(sample_variety(parse_variety(variety), count, seed));
  if (noise > 0.0) X = perturb(X, noise, seed + 1);
  if (out.empty() || out == "-") {
    write_points_csv(std::cout, X);
  } else {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write '" + out + "'");
    write_points_csv(f, X);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mavik: approximate vanishing ideal bases by normalized VCA"};
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a basis and write basis.json, report.json, timing.json");
  fit_cmd->add_option("--points", fa.points, "Points file (CSV or JSON)")->required();
  fit_cmd->add_option("--eps", fa.eps, "Vanishing threshold epsilon");
  fit_cmd->add_option("--mode", fa.mode, "vca | coeff | grad")->check(CLI::IsMember({"vca", "coeff", "coefficient", "grad", "gradient"}));
  fit_cmd->add_option("--z", fa.z, "Gradient normalization constant Z");
  fit_cmd->add_option("--m", fa.m, "Constant polynomial value (default depends on mode)");
  fit_cmd->add_option("--max-degree", fa.max_degree, "Degree cap (default |X|)");
  fit_cmd->add_option("--dmax", fa.dmax, "Stop once the d_max estimate reaches this value (0 disables)");
  fit_cmd->add_option("--dmin", fa.dmin, "Stop once the d_min estimate reaches this value (0 disables)");
  fit_cmd->add_flag("--no-dedup", fa.no_dedup, "Keep both orders of degree-2 products");
  fit_cmd->add_option("--scale", fa.scale, "Multiply points by this factor before fitting");
  fit_cmd->add_option("--noise", fa.noise, "Add Gaussian noise (std) and recenter before fitting");
  fit_cmd->add_option("--seed", fa.seed, "Noise seed");
  fit_cmd->add_flag("--coefficients", fa.coefficients, "Embed symbolic expansions of G in basis.json");
  fit_cmd->add_option("--term-cap", fa.term_cap, "Coefficient expansion term cap");
  fit_cmd->add_option("--out", fa.out, "Output directory");

  std::string ev_basis, ev_points, ev_out = "evaluation.json";
  auto* ev_cmd = app.add_subcommand("evaluate", "Evaluate a saved basis on points");
  ev_cmd->add_option("--basis", ev_basis, "basis.json from fit")->required();
  ev_cmd->add_option("--points", ev_points, "Points to evaluate on")->required();
  ev_cmd->add_option("--out", ev_out, "Output JSON file");

  std::string rd_basis, rd_points, rd_out = "mavik-reduced";
  double rd_threshold = kDefaultReductionThreshold;
  auto* rd_cmd = app.add_subcommand("reduce", "Remove G polynomials explained by lower-degree gradients");
  rd_cmd->add_option("--basis", rd_basis, "basis.json from fit")->required();
  rd_cmd->add_option("--points", rd_points, "The points the basis was fit on")->required();
  rd_cmd->add_option("--threshold", rd_threshold, "Relative residual threshold");
  rd_cmd->add_option("--out", rd_out, "Output directory");

  std::vector<int> bg_dims{2, 3, 4, 5};
  int bg_count = 50;
  double bg_eps = 1e-6;
  std::vector<std::string> bg_modes{"vca", "coeff", "grad"};
  std::uint64_t bg_seed = 1;
  std::string bg_out;
  auto* bg_cmd = app.add_subcommand("bench-generic", "Basis sizes on uniform points in [-1,1]^n");
  bg_cmd->add_option("--dims", bg_dims, "Dimensions")->delimiter(',');
  bg_cmd->add_option("--count", bg_count, "Points per dataset");
  bg_cmd->add_option("--eps", bg_eps, "Epsilon");
  bg_cmd->add_option("--modes", bg_modes, "Normalization modes")->delimiter(',');
  bg_cmd->add_option("--seed", bg_seed, "Sampling seed");
  bg_cmd->add_option("--out", bg_out, "Output directory for bench.json");

  RetrievalArgs ra;
  auto* rt_cmd = app.add_subcommand("retrieval-test", "Configuration retrieval with a linear epsilon search");
  rt_cmd->add_option("--variety", ra.variety, "V1 | V2 | V3");
  rt_cmd->add_option("--noise", ra.noise, "Noise standard deviation on unit-box data");
  rt_cmd->add_option("--scale", ra.scales, "Scales alpha")->delimiter(',');
  rt_cmd->add_option("--runs", ra.runs, "Independent runs per scale");
  rt_cmd->add_option("--mode", ra.mode, "vca | coeff | grad");
  rt_cmd->add_option("--target", ra.target, "Target profile JSON");
  rt_cmd->add_option("--count", ra.count, "Points per sample");
  rt_cmd->add_option("--seed", ra.seed, "Base seed");
  rt_cmd->add_option("--out", ra.out, "Output directory for retrieval.json");

  std::string sp_variety, sp_out;
  int sp_dim = 2, sp_count = 100;
  double sp_noise = 0.0;
  std::uint64_t sp_seed = 0;
  auto* sp_cmd = app.add_subcommand("sample", "Write sampled points as CSV");
  sp_cmd->add_option("--variety", sp_variety, "V1 | V2 | V3 (centered, unit box); omit for uniform points");
  sp_cmd->add_option("--dim", sp_dim, "Dimension of uniform points");
  sp_cmd->add_option("--count", sp_count, "Number of points");
  sp_cmd->add_option("--noise", sp_noise, "Noise standard deviation");
  sp_cmd->add_option("--seed", sp_seed, "Seed");
  sp_cmd->add_option("--out", sp_out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitBadInput;
  }

  try {
    if (*fit_cmd) return cmd_fit(fa);
    if (*ev_cmd) return cmd_evaluate(ev_basis, ev_points, ev_out);
    if (*rd_cmd) return cmd_reduce(rd_basis, rd_points, rd_threshold, rd_out);
    if (*bg_cmd) return cmd_bench(bg_dims, bg_count, bg_eps, bg_modes, bg_seed, bg_out);
    if (*rt_cmd) return cmd_retrieval(ra);
    if (*sp_cmd) return cmd_sample(sp_variety, sp_dim, sp_count, sp_noise, sp_seed, sp_out);
  } catch (const ResourceError& e) {
    std::cerr << "mavik: resource limit: " << e.what() << "\n";
    return kExitResource;
  } catch (const FormatError& e) {
    std::cerr << "mavik: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const DegenerateInput& e) {
    std::cerr << "mavik: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const ContractViolation& e) {
    std::cerr << "mavik: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "mavik: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
