#pragma once

// Experiment drivers: the generic-point size/runtime benchmark and the
// configuration retrieval test with a linear epsilon search.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mavik/datasets.hpp"
#include "mavik/engine.hpp"

namespace mavik {

/// Worker count: MAVIK_THREADS if set and positive, else hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("MAVIK_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs job(i) for i in [0, count) on up to `threads` workers. Each job
/// writes only its own output slot, so results do not depend on scheduling.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        if (failed) return;
        try {
          job(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Generic-point benchmark

struct BenchRow {
  Index count = 0;
  Index dim = 0;
  std::string mode;
  std::size_t g_size = 0;
  std::vector<int> profile;
  int max_degree = 0;
  double runtime_seconds = 0.0;
  bool bounds_ok = true;
};

inline std::vector<BenchRow> bench_generic(const std::vector<Index>& dims, Index count, double epsilon,
                                           const std::vector<NormalizationMode>& modes, std::uint64_t seed) {
  std::vector<BenchRow> rows;
  for (Index dim : dims) {
    const auto X = sample_generic(count, dim, seed);
    for (const auto& mode : modes) {
      EngineConfig cfg;
      cfg.epsilon = epsilon;
      cfg.mode = mode;
      const auto r = fit(X, cfg);
      BenchRow row;
      row.count = count;
      row.dim = dim;
      row.mode = mode.name();
      row.g_size = r.basis.g_size();
      row.profile = r.basis.g_profile();
      row.max_degree = r.basis.max_g_degree();
      row.runtime_seconds = r.report.wall_seconds;
      row.bounds_ok = satisfies_size_bounds(r.basis, X.size());
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Configuration retrieval

/// Number of points in the epsilon grid [1e-5 a, a) with step 1e-3 a. Computed
/// in units of a, so it does not depend on the scale.
inline constexpr double kGridStart = 1e-5;
inline constexpr double kGridStep = 1e-3;

inline std::size_t epsilon_grid_size() {
  return static_cast<std::size_t>(std::ceil((1.0 - kGridStart) / kGridStep - 1e-9));
}

inline double epsilon_grid_value(double alpha, std::size_t k) {
  return alpha * (kGridStart + static_cast<double>(k) * kGridStep);
}

/// Mode constants used in the retrieval experiments: default m per mode and,
/// for gradient normalization, the root-mean-square gradient as normalizer
/// (the normalized polynomial has unit mean squared gradient over X).
inline EngineConfig retrieval_config(const NormalizationMode& mode, Index num_points, int target_degree) {
  EngineConfig cfg;
  cfg.mode = mode;
  if (mode.kind == NormKind::Gradient) cfg.mode.z = std::sqrt(static_cast<double>(num_points));
  cfg.max_degree = target_degree;
  return cfg;
}

/// True when the G profile matches `target` for every degree 0..T.
inline bool matches_profile(const std::vector<int>& profile, const std::vector<int>& target) {
  for (std::size_t t = 0; t < target.size(); ++t) {
    const int got = t < profile.size() ? profile[t] : 0;
    if (got != target[t]) return false;
  }
  return true;
}

struct EpsilonSearch {
  std::vector<bool> valid;  // per grid point
  std::size_t fits = 0;
  // widest run of consecutive valid grid points, as grid indices [first, last]
  std::optional<std::pair<std::size_t, std::size_t>> widest;
  bool contiguous = true;
  bool bounds_ok = true;  // every fit met the basis size bounds
};

/// Linear search over the grid. A fit at epsilon also certifies the interval
/// [stable_low, stable_high) on which every classification decision, and so
/// the whole run, is unchanged; grid points inside it are not refit.
inline EpsilonSearch search_epsilon(const PointSet& X, double alpha, const EngineConfig& base,
                                    const std::vector<int>& target) {
  EpsilonSearch out;
  const std::size_t K = epsilon_grid_size();
  out.valid.assign(K, false);
  std::size_t k = 0;
  while (k < K) {
    EngineConfig cfg = base;
    cfg.epsilon = epsilon_grid_value(alpha, k);
    const auto r = fit(X, cfg);
    ++out.fits;
    out.bounds_ok = out.bounds_ok && satisfies_size_bounds(r.basis, X.size());
    const bool ok = matches_profile(r.basis.g_profile(), target);
    std::size_t j = k;
    while (j < K && epsilon_grid_value(alpha, j) < r.report.stable_high) out.valid[j++] = ok;
    k = std::max(j, k + 1);
  }
  std::size_t runs = 0;
  for (std::size_t i = 0; i < K;) {
    if (!out.valid[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < K && out.valid[j + 1]) ++j;
    ++runs;
    if (!out.widest || j - i > out.widest->second - out.widest->first) out.widest = {i, j};
    i = j + 1;
  }
  out.contiguous = runs <= 1;
  return out;
}

struct RetrievalSettings {
  Variety variety = Variety::V1;
  double noise = 0.05;
  std::vector<double> scales{0.01, 0.1, 1.0, 10.0, 100.0};
  int runs = 20;
  NormalizationMode mode{};
  std::vector<int> target;  // |G_t| for t = 0..T
  Index count = 100;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct RetrievalRun {
  bool success = false;
  double low = 0.0;   // widest valid interval (grid values)
  double high = 0.0;
  double extent = 0.0;  // mean ||g(X*)|| over G at the interval midpoint
  bool contiguous = true;
  bool bounds_ok = true;
  std::size_t fits = 0;
};

struct RetrievalOutcome {
  double alpha = 1.0;
  int successes = 0;
  int trials = 0;
  std::optional<std::pair<double, double>> valid_eps_range;  // averaged over successful runs
  double extent_at_unperturbed = 0.0;
  bool noncontiguous_warning = false;
  std::vector<RetrievalRun> runs;

  bool success() const { return valid_eps_range.has_value(); }
};

/// Unperturbed and perturbed versions of one retrieval sample, both in the
/// unit-box frame and sharing the post-noise re-centering shift.
struct RetrievalSample {
  PointSet clean;
  PointSet noisy;
};

inline std::uint64_t run_seed(std::uint64_t seed, int run) {
  CounterRng mix(seed ^ (0xA24BAED4963EE407ULL * static_cast<std::uint64_t>(run + 1)));
  return mix.next();
}

inline RetrievalSample retrieval_sample(Variety v, Index count, double noise, std::uint64_t seed, int run) {
  const std::uint64_t s = run_seed(seed, run);
  const auto unit = center_and_unitbox(sample_variety(v, count, s));
  const auto noisy = perturb(unit, noise, s + 1);
  // perturb() re-centers; apply the same shift to the clean points.
  const Matrix noise_m = gaussian_noise(unit.size(), unit.dim(), noise, s + 1);
  const Vector mean_shift = (unit.points() + noise_m).colwise().mean().transpose();
  return {unit.translated(mean_shift), noisy};
}

inline std::vector<RetrievalOutcome> retrieval_test(const RetrievalSettings& s) {
  detail::require(!s.target.empty(), "retrieval_test: target profile required");
  detail::require(s.runs >= 1, "retrieval_test: runs must be >= 1");
  const int T = static_cast<int>(s.target.size()) - 1;
  detail::require(T >= 1, "retrieval_test: target must cover at least degree 1");

  std::vector<RetrievalSample> samples;
  for (int r = 0; r < s.runs; ++r) samples.push_back(retrieval_sample(s.variety, s.count, s.noise, s.seed, r));

  const std::size_t nscales = s.scales.size();
  const std::size_t nruns = static_cast<std::size_t>(s.runs);
  std::vector<RetrievalRun> results(nscales * nruns);
  parallel_for(results.size(), s.threads, [&](std::size_t job) {
    const double alpha = s.scales[job / nruns];
    const auto& sample = samples[job % nruns];
    const auto X = sample.noisy.scaled(alpha);
    const auto base = retrieval_config(s.mode, X.size(), T);
    const auto search = search_epsilon(X, alpha, base, s.target);
    RetrievalRun run;
    run.fits = search.fits;
    run.contiguous = search.contiguous;
    run.bounds_ok = search.bounds_ok;
    if (search.widest) {
      run.success = true;
      run.low = epsilon_grid_value(alpha, search.widest->first);
      run.high = epsilon_grid_value(alpha, search.widest->second);
      EngineConfig cfg = base;
      cfg.epsilon = epsilon_grid_value(alpha, (search.widest->first + search.widest->second) / 2);
      const auto r = fit(X, cfg);
      const auto G = evaluate(r.basis, sample.clean.scaled(alpha)).G;
      run.extent = G.cols() ? G.colwise().norm().mean() : 0.0;
    }
    results[job] = run;
  });

  std::vector<RetrievalOutcome> out;
  for (std::size_t a = 0; a < nscales; ++a) {
    RetrievalOutcome o;
    o.alpha = s.scales[a];
    o.trials = s.runs;
    double lo = 0.0, hi = 0.0, ext = 0.0;
    for (std::size_t r = 0; r < nruns; ++r) {
      const auto& run = results[a * nruns + r];
      o.runs.push_back(run);
      if (!run.contiguous) o.noncontiguous_warning = true;
      if (!run.success) continue;
      ++o.successes;
      lo += run.low;
      hi += run.high;
      ext += run.extent;
    }
    if (o.successes > 0) {
      o.valid_eps_range = std::make_pair(lo / o.successes, hi / o.successes);
      o.extent_at_unperturbed = ext / o.successes;
    }
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace mavik
