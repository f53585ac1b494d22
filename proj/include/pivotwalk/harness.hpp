#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pivotwalk/errors.hpp"
#include "pivotwalk/parallel.hpp"
#include "pivotwalk/pivotal.hpp"
#include "pivotwalk/rng.hpp"
#include "pivotwalk/schottky.hpp"
#include "pivotwalk/stats.hpp"
#include "pivotwalk/walks.hpp"
#include "pivotwalk/wide.hpp"

namespace pivotwalk {

// ---------------------------------------------------------------------------
// Run configuration.

struct RunConfig {
  std::string backend = "tree";  // tree | halfplane
  int rank = 2;
  double delta = 0.75;
  std::string precision = "double";  // halfplane only: double | wide

  std::string engine = "none";  // none | free | simple | refined
  double eta = 0.5;
  double C0 = 0.0;
  double D = 1.0;
  // Path to a certificate, "support" (the support of mu, verified at eta, C0, D)
  // or "search" (ping-pong search in the support). Needed by simple and refined.
  std::string certificate;

  std::string measure = "generators";
  std::string nu = "adversarial";  // free engine: a measure, or fixed adversarial words

  std::string flavor = "simple";  // simple | refined | gapped
  long N = 0;                     // 0 picks the shortest block the certificate allows
  double alpha = 0.0;             // 0 picks alpha_max / 2
  long A = 0;

  long n_max = 100;
  std::size_t trials = 1000;
  std::vector<double> r_grid{0.25};
  std::uint64_t seed = 1;
  unsigned workers = 1;
  long report_every = 1;
  long n_ref = 0;  // boundary proxy tail; 0 disables
  int bootstrap = 1000;

  std::vector<std::string> backoff_family;
  double backoff_epsilon = 0.1;
  std::vector<std::string> perturbations;  // "label=measure"
  double continuity_r = 0.0;

  bool paranoid = false;

  double space_delta() const { return backend == "tree" ? 0.0 : delta; }
  // Throws ConfigError on the first problem found.
  void validate() const;
};

// Reads "key = value" lines (TOML subset: strings, numbers, booleans, arrays).
RunConfig parse_run_config(std::istream& is);
RunConfig load_run_config(const std::string& path);
nlohmann::json config_to_json(const RunConfig& c);

// Calls fn(space) with the configured backend.
template <class Fn>
decltype(auto) with_space(const RunConfig& cfg, Fn&& fn);

// ---------------------------------------------------------------------------
// Prepared run: measure, certificate and decomposition resolved once.

template <SpaceModel Space>
struct RunContext {
  using Isometry = typename Space::Isometry;

  const Space* space = nullptr;
  RunConfig config;
  DiscreteMeasure<Space> mu;
  std::optional<SchottkySet<Space>> schottky;
  std::optional<DecompositionPlan<Space>> plan;
  PivotParams params;
  std::optional<DiscreteMeasure<Space>> nu;  // free engine
  std::vector<Isometry> fixed_words;         // free engine, adversarial words
  long horizon = 0;                          // max(n_max, n_ref)

  bool checkpoint(long n) const { return n <= config.n_max && n % config.report_every == 0; }
  bool tracks_pivots() const { return config.engine != "none"; }
};

namespace detail {

template <SpaceModel Space>
SchottkySet<Space> resolve_certificate(const Space& space, const RunConfig& cfg, const DiscreteMeasure<Space>& mu) {
  if (cfg.certificate.empty()) throw ConfigError("Schottky certificate missing");
  if (cfg.certificate == "search") return find_schottky_in_support(space, mu, cfg.eta, cfg.D).second;
  if (cfg.certificate == "support") {
    SchottkySet<Space> set;
    for (const auto& a : mu.atoms()) {
      set.elements.push_back(a.g);
      set.expressions.push_back(space.format(a.g));
    }
    set.eta = cfg.eta;
    set.C = cfg.C0;
    set.D = cfg.D;
    SchottkyLimits limits;
    limits.seed = cfg.seed;
    const auto sampler = default_sampler(space, set.elements, limits, cfg.seed);
    const auto rep = verify_schottky(space, set, sampler);
    if (!rep.passes(cfg.eta))
      throw ConfigError("the support of mu is not a Schottky set at the configured (eta, C0, D)");
    set.trials = rep.trials;
    set.sampler = rep.sampler;
    set.worst_bad_fraction = rep.worst_bad_fraction;
    set.translation_min = rep.translation_min;
    return set;
  }
  std::ifstream in(cfg.certificate);
  if (!in) throw ConfigError("cannot open certificate " + cfg.certificate);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("certificate is not JSON: " + std::string(e.what()));
  }
  return schottky_from_json(space, j);
}

}  // namespace detail

// Resolves everything a run needs. A certificate passed in takes precedence
// over config.certificate.
template <SpaceModel Space>
RunContext<Space> prepare_run(const Space& space, const RunConfig& cfg,
                              const SchottkySet<Space>* certificate = nullptr) {
  cfg.validate();
  RunContext<Space> ctx;
  ctx.space = &space;
  ctx.config = cfg;
  ctx.mu = parse_measure(space, cfg.measure);
  ctx.horizon = std::max(cfg.n_max, cfg.n_ref);

  if (cfg.engine == "free") {
    if constexpr (std::is_same_v<Space, FreeGroupSpace>) {
      if (cfg.nu == "adversarial") {
        // w_n is the inverse of the running prefix s_1^ref w_1 ... s_n^ref of a
        // reference path drawn once from the master seed, or "a" when trivial
        auto rng = stream_rng(cfg.seed, 0, Stream::engine);
        std::uniform_int_distribution<int> letter(0, 2 * space.rank() - 1);
        Word prefix;
        for (long k = 0; k < ctx.horizon; ++k) {
          prefix.multiply_right(Word::letter(Letter(static_cast<std::uint8_t>(letter(rng)))));
          Word w = prefix.empty() ? Word::letter(Letter::generator(0)) : invert_word(prefix);
          prefix.multiply_right(w);
          ctx.fixed_words.push_back(std::move(w));
        }
      } else {
        ctx.nu = parse_measure(space, cfg.nu);
        for (const auto& a : ctx.nu->atoms())
          if (a.g.empty()) throw ConfigError("the free engine needs nontrivial words; nu charges the identity");
      }
    } else {
      throw ConfigError("the free engine runs on the tree backend only");
    }
    return ctx;
  }
  if (cfg.engine == "none") return ctx;

  ctx.schottky = certificate ? *certificate : detail::resolve_certificate(space, cfg, ctx.mu);
  ctx.params = PivotParams{ctx.schottky->C, ctx.schottky->D};
  if (ctx.params.D < 20 * ctx.params.C0 + 100 * space.delta() + 1 - 1e-12)
    throw ConfigError("certificate constants violate D >= 20 C0 + 100 delta + 1");
  const auto flavor = parse_decomp_flavor(cfg.flavor);
  long N = cfg.N;
  if (N == 0) {
    const long M = std::max<long>(1, ctx.schottky->construction.support_power);
    N = flavor == DecompFlavor::refined ? 4 * M + 1 : 2 * M;
  }
  // alpha_max does not depend on alpha, so a negligible alpha reads it off
  const double alpha =
      cfg.alpha > 0.0 ? cfg.alpha : decompose(space, ctx.mu, N, *ctx.schottky, 1e-300, flavor, cfg.A).alpha_max / 2;
  ctx.plan = decompose(space, ctx.mu, N, *ctx.schottky, alpha, flavor, cfg.A);
  return ctx;
}

// ---------------------------------------------------------------------------
// Single trajectories.

template <SpaceModel Space>
struct Snapshot {
  long n = 0;
  const typename Space::Isometry* position = nullptr;  // Z_n
  double distance = 0.0;                                // d(o, Z_n o)
  std::size_t pivots = 0;
  double bound = 0.0;                                   // pivot_lower_bound
  const PivotEngine<Space>* engine = nullptr;           // simple and refined engines
};

struct TrajectoryChecks {
  std::size_t snapshots = 0;  // engine states examined
  std::size_t bound_failures = 0;
  std::size_t chain_failures = 0;
  std::size_t consistency_failures = 0;  // engine endpoint differs from the walk
  std::vector<std::string> messages;     // first few failures

  std::size_t failures() const { return bound_failures + chain_failures + consistency_failures; }
  void note(std::string m) {
    if (messages.size() < 5) messages.push_back(std::move(m));
  }
  void merge(const TrajectoryChecks& o) {
    snapshots += o.snapshots;
    bound_failures += o.bound_failures;
    chain_failures += o.chain_failures;
    consistency_failures += o.consistency_failures;
    for (const auto& m : o.messages) note(m);
  }
};

inline std::uint64_t trajectory_seed(std::uint64_t master, std::uint64_t index) {
  return stream_rng(master, index, Stream::walk)();
}

namespace detail {

template <SpaceModel Space>
void check_engine(const PivotEngine<Space>& e, bool full, TrajectoryChecks& checks, const std::string& where) {
  ++checks.snapshots;
  const double d = e.space().distance(e.space().basepoint(), e.endpoint());
  if (d < e.pivot_lower_bound() - kDefaultEps) {
    ++checks.bound_failures;
    checks.note(where + ": d(o, y^-) = " + std::to_string(d) + " < " + std::to_string(e.pivot_lower_bound()));
  }
  if (full) {
    const auto rep = e.validate(0);
    if (!rep.ok) {
      ++checks.chain_failures;
      checks.note(where + ": " + rep.violations.front());
    }
  }
}

}  // namespace detail

// Runs trajectory `index` and calls visit(snapshot) at every checkpoint n <= n_max
// and, when configured, once more at n_ref.
template <SpaceModel Space, class Visit>
void run_trajectory(const RunContext<Space>& ctx, std::uint64_t index, Visit&& visit, TrajectoryChecks& checks) {
  const Space& space = *ctx.space;
  const RunConfig& cfg = ctx.config;
  using Iso = typename Space::Isometry;
  auto wanted = [&](long n) { return ctx.checkpoint(n) || (cfg.n_ref > 0 && n == cfg.n_ref); };

  if (cfg.engine == "none") {
    auto rng = stream_rng(cfg.seed, index, Stream::walk);
    auto step = ctx.mu.index_distribution();
    Iso pos = space.identity();
    for (long n = 1; n <= ctx.horizon; ++n) {
      accumulate(space, pos, ctx.mu.atoms()[step(rng)].g);
      if (wanted(n)) visit(Snapshot<Space>{n, &pos, displacement(space, pos), 0, 0.0, nullptr});
    }
    return;
  }

  if (cfg.engine == "free") {
    if constexpr (std::is_same_v<Space, FreeGroupSpace>) {
      auto rng = stream_rng(cfg.seed, index, Stream::walk);
      std::uniform_int_distribution<int> letter(0, 2 * space.rank() - 1);
      std::optional<std::discrete_distribution<std::size_t>> nu_d;
      if (ctx.nu) nu_d = ctx.nu->index_distribution();
      FreePivotState state(space.rank());
      for (long n = 1; n <= ctx.horizon; ++n) {
        const Letter s(static_cast<std::uint8_t>(letter(rng)));
        const Word& w = nu_d ? ctx.nu->atoms()[(*nu_d)(rng)].g : ctx.fixed_words[static_cast<std::size_t>(n - 1)];
        const auto out = state.step(s, w);
        if (wanted(n)) visit(Snapshot<Space>{n, &state.current(), out.distance, out.pivots, out.bound, nullptr});
      }
    }
    return;
  }

  const auto& plan = *ctx.plan;
  const auto tr = schedule(space, plan, trajectory_seed(cfg.seed, index), ctx.horizon);
  const auto full = engine_input(space, plan, tr, ctx.horizon);
  const EngineFlavor flavor = plan.flavor == DecompFlavor::simple ? EngineFlavor::simple : EngineFlavor::refined;
  const EngineOptions opts{false, kDefaultEps};
  const long N = tr.N;

  std::optional<PivotEngine<Space>> committed;
  long done = 0;  // committed transitions
  long open = 0;  // index T of the transition w'(n) belongs to
  Iso pos = space.identity();
  Iso wprime = space.identity();
  long wprime_to = 0;
  auto run_step = [&](PivotEngine<Space>& e, const EngineStepInput<Iso>& s, const Iso& w) {
    if (flavor == EngineFlavor::simple) e.step_simple(s.a, s.b, w);
    else e.step_refined(s.a, s.b, s.r, s.c, s.d, w);
  };

  for (long n = 1; n <= ctx.horizon; ++n) {
    accumulate(space, pos, plan.mu.atoms()[tr.steps[static_cast<std::size_t>(n - 1)]].g);
    if (!wanted(n)) continue;
    const long T = tr.tau(n);
    const double d = tr.distance[static_cast<std::size_t>(n)];
    if (T == 0) {
      visit(Snapshot<Space>{n, &pos, d, 0, 0.0, nullptr});
      continue;
    }
    if (!committed) committed.emplace(space, flavor, ctx.params, full.w0, opts);
    while (done < T - 1) {
      const auto& s = full.steps[static_cast<std::size_t>(done)];
      run_step(*committed, s, s.w);
      ++done;
      detail::check_engine(*committed, cfg.paranoid, checks, "trajectory " + std::to_string(index) + " step " +
                                                                  std::to_string(done));
    }
    if (open != T) {
      open = T;
      wprime = space.identity();
      wprime_to = N * (tr.segment_end(static_cast<std::size_t>(T)) + 1);
    }
    for (; wprime_to < n; ++wprime_to)
      accumulate(space, wprime, plan.mu.atoms()[tr.steps[static_cast<std::size_t>(wprime_to)]].g);
    PivotEngine<Space> e = *committed;
    run_step(e, full.steps[static_cast<std::size_t>(T - 1)], wprime);
    const std::string where = "trajectory " + std::to_string(index) + " n " + std::to_string(n);
    detail::check_engine(e, cfg.paranoid, checks, where);
    const double de = space.distance(space.basepoint(), e.endpoint());
    if (std::abs(de - d) > 1e-6 * std::max(1.0, d)) {
      ++checks.consistency_failures;
      checks.note(where + ": engine endpoint at distance " + std::to_string(de) + ", walk at " + std::to_string(d));
    }
    visit(Snapshot<Space>{n, &pos, d, e.pivots(), e.pivot_lower_bound(), &e});
  }
}

// Engine trace of one trajectory: one row per committed transition up to n_max,
// in the pivotal module's export format.
template <SpaceModel Space>
std::vector<TraceRow> trajectory_trace(const RunContext<Space>& ctx, std::uint64_t index) {
  const Space& space = *ctx.space;
  std::vector<TraceRow> rows;
  if (ctx.config.engine == "free") {
    if constexpr (std::is_same_v<Space, FreeGroupSpace>) {
      auto rng = stream_rng(ctx.config.seed, index, Stream::walk);
      std::uniform_int_distribution<int> letter(0, 2 * space.rank() - 1);
      std::optional<std::discrete_distribution<std::size_t>> nu_d;
      if (ctx.nu) nu_d = ctx.nu->index_distribution();
      FreePivotState state(space.rank());
      for (long n = 1; n <= ctx.config.n_max; ++n) {
        const Letter s(static_cast<std::uint8_t>(letter(rng)));
        const Word& w = nu_d ? ctx.nu->atoms()[(*nu_d)(rng)].g : ctx.fixed_words[static_cast<std::size_t>(n - 1)];
        const auto out = state.step(s, w);
        rows.push_back({out.n, out.pivots, state.pivot_times(), out.distance, out.bound});
      }
    }
    return rows;
  }
  if (!ctx.plan) throw ConfigError("pivot traces need an engine");
  const auto& plan = *ctx.plan;
  const auto tr = schedule(space, plan, trajectory_seed(ctx.config.seed, index), ctx.config.n_max);
  const auto in = engine_input(space, plan, tr, ctx.config.n_max);
  const EngineFlavor flavor = plan.flavor == DecompFlavor::simple ? EngineFlavor::simple : EngineFlavor::refined;
  PivotEngine<Space> e(space, flavor, ctx.params, in.w0, EngineOptions{ctx.config.paranoid, kDefaultEps});
  for (const auto& s : in.steps) {
    const auto out = flavor == EngineFlavor::simple ? e.step_simple(s.a, s.b, s.w)
                                                    : e.step_refined(s.a, s.b, s.r, s.c, s.d, s.w);
    rows.push_back(trace_row(e, out));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Ensembles.

struct NRow {
  long n = 0;
  std::size_t trials = 0;
  double mean_d = 0.0;
  double sd_d = 0.0;
  double q10 = 0.0, q50 = 0.0, q90 = 0.0;
  double mean_pivots = 0.0;
  std::vector<std::size_t> events;        // d <= r n, per r
  std::vector<std::size_t> proxy_events;  // proxy <= r n, per r
  std::size_t proxy_above_distance = 0;   // proxy > d (must stay 0)
};

struct EnsembleStats {
  std::string engine;
  std::vector<double> r_grid;
  long n_max = 0;
  long n_ref = 0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  bool has_pivots = false;
  std::vector<NRow> rows;
  std::vector<double> final_distance;  // d(o, Z_{n_max} o) per trajectory
  std::vector<long> final_pivots;      // |P| at n_max per trajectory
  TrajectoryChecks checks;
};

namespace detail {

struct Accumulator {
  struct Cell {
    std::size_t count = 0;
    double sum = 0.0, sum2 = 0.0, pivots = 0.0;
    std::map<long long, std::size_t> hist;
    std::vector<std::size_t> events, proxy_events;
    std::size_t proxy_above = 0;
  };
  std::vector<Cell> cells;
  std::vector<double> final_distance;
  std::vector<long> final_pivots;
  TrajectoryChecks checks;
};

inline double quantile_from(const std::map<long long, std::size_t>& hist, std::size_t total, double q,
                            double resolution) {
  const auto need = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(q * static_cast<double>(total))));
  std::size_t acc = 0;
  for (const auto& [k, c] : hist) {
    acc += c;
    if (acc >= need) return static_cast<double>(k) * resolution;
  }
  return hist.empty() ? 0.0 : static_cast<double>(hist.rbegin()->first) * resolution;
}

inline constexpr std::size_t kChunk = 512;

}  // namespace detail

template <SpaceModel Space>
EnsembleStats run_ensemble(const RunContext<Space>& ctx) {
  const Space& space = *ctx.space;
  const RunConfig& cfg = ctx.config;
  const std::size_t R = cfg.r_grid.size();
  const long cps = cfg.n_max / cfg.report_every;
  const double resolution = std::is_same_v<Space, FreeGroupSpace> ? 1.0 : 1e-3;
  const bool boundary = cfg.n_ref > 0;
  using Iso = typename Space::Isometry;

  auto chunk_fn = [&](std::size_t begin, std::size_t end) {
    detail::Accumulator acc;
    acc.cells.resize(static_cast<std::size_t>(cps));
    for (auto& c : acc.cells) {
      c.events.assign(R, 0);
      c.proxy_events.assign(R, 0);
    }
    std::vector<Iso> kept;
    std::vector<double> kept_d;
    for (std::size_t t = begin; t < end; ++t) {
      kept.clear();
      kept_d.clear();
      double last_d = 0.0;
      long last_p = 0;
      run_trajectory(
          ctx, t,
          [&](const Snapshot<Space>& s) {
            if (ctx.checkpoint(s.n)) {
              auto& c = acc.cells[static_cast<std::size_t>(s.n / cfg.report_every - 1)];
              ++c.count;
              c.sum += s.distance;
              c.sum2 += s.distance * s.distance;
              c.pivots += static_cast<double>(s.pivots);
              ++c.hist[std::llround(s.distance / resolution)];
              for (std::size_t i = 0; i < R; ++i)
                if (s.distance <= cfg.r_grid[i] * static_cast<double>(s.n) + 1e-12) ++c.events[i];
              if (boundary) {
                kept.push_back(*s.position);
                kept_d.push_back(s.distance);
              }
              if (s.n == cfg.n_max) {
                last_d = s.distance;
                last_p = static_cast<long>(s.pivots);
              }
            }
            if (boundary && s.n == cfg.n_ref) {
              const auto o = space.basepoint();
              const auto tail = space.orbit_point(*s.position);
              for (std::size_t k = 0; k < kept.size(); ++k) {
                const long n = static_cast<long>(k + 1) * cfg.report_every;
                const double proxy =
                    boundary_product_proxy(space, space.orbit_point(kept[k]), std::span(&tail, 1), o);
                auto& c = acc.cells[k];
                if (proxy > kept_d[k] + 1e-9) ++c.proxy_above;
                for (std::size_t i = 0; i < R; ++i)
                  if (proxy <= cfg.r_grid[i] * static_cast<double>(n) + 1e-12) ++c.proxy_events[i];
              }
            }
          },
          acc.checks);
      acc.final_distance.push_back(last_d);
      acc.final_pivots.push_back(last_p);
    }
    return acc;
  };

  const auto parts = parallel_chunks<detail::Accumulator>(cfg.trials, detail::kChunk, cfg.workers, chunk_fn);

  EnsembleStats st;
  st.engine = cfg.engine;
  st.r_grid = cfg.r_grid;
  st.n_max = cfg.n_max;
  st.n_ref = cfg.n_ref;
  st.trials = cfg.trials;
  st.seed = cfg.seed;
  st.has_pivots = ctx.tracks_pivots();
  detail::Accumulator total;
  total.cells.resize(static_cast<std::size_t>(cps));
  for (auto& c : total.cells) {
    c.events.assign(R, 0);
    c.proxy_events.assign(R, 0);
  }
  for (const auto& p : parts) {
    for (std::size_t k = 0; k < p.cells.size(); ++k) {
      auto& c = total.cells[k];
      const auto& q = p.cells[k];
      c.count += q.count;
      c.sum += q.sum;
      c.sum2 += q.sum2;
      c.pivots += q.pivots;
      c.proxy_above += q.proxy_above;
      for (const auto& [key, cnt] : q.hist) c.hist[key] += cnt;
      for (std::size_t i = 0; i < R; ++i) {
        c.events[i] += q.events[i];
        c.proxy_events[i] += q.proxy_events[i];
      }
    }
    st.final_distance.insert(st.final_distance.end(), p.final_distance.begin(), p.final_distance.end());
    st.final_pivots.insert(st.final_pivots.end(), p.final_pivots.begin(), p.final_pivots.end());
    st.checks.merge(p.checks);
  }
  for (std::size_t k = 0; k < total.cells.size(); ++k) {
    const auto& c = total.cells[k];
    NRow row;
    row.n = static_cast<long>(k + 1) * cfg.report_every;
    row.trials = c.count;
    if (c.count == 0) throw InvariantViolation("checkpoint without observations");
    const double T = static_cast<double>(c.count);
    row.mean_d = c.sum / T;
    row.sd_d = c.count > 1 ? std::sqrt(std::max(0.0, (c.sum2 - c.sum * c.sum / T) / (T - 1))) : 0.0;
    row.q10 = detail::quantile_from(c.hist, c.count, 0.1, resolution);
    row.q50 = detail::quantile_from(c.hist, c.count, 0.5, resolution);
    row.q90 = detail::quantile_from(c.hist, c.count, 0.9, resolution);
    row.mean_pivots = c.pivots / T;
    row.events = c.events;
    row.proxy_events = c.proxy_events;
    row.proxy_above_distance = c.proxy_above;
    st.rows.push_back(std::move(row));
  }
  return st;
}

// ---------------------------------------------------------------------------
// Derived series.

std::size_t r_index(const EnsembleStats& st, double r);

// Empirical P(d(o, Z_n o) <= r n) with Wilson intervals.
std::vector<DeviationPoint> deviation_curve(const EnsembleStats& st, double r);

struct EscapeRate {
  long n = 0;
  MeanEstimate ell;  // mean of d(o, Z_n o) / n at n_max, bootstrap interval
  std::vector<std::pair<long, double>> subadditive;  // (n, E d / n)
  // E d / n should not increase; counts rises beyond three standard errors
  std::size_t subadditive_rises = 0;
};

EscapeRate escape_rate(const EnsembleStats& st, int resamples = 1000);

struct BoundaryDeviation {
  double r = 0.0;
  std::vector<DeviationPoint> series;
  std::optional<DecayFit> fit;
  std::string fit_error;
  double gap_bound = 0.0;  // 2 C0 + 9 delta
  std::size_t proxy_above_distance = 0;
};

BoundaryDeviation boundary_deviation(const EnsembleStats& st, double r, double C0, double delta);

// CSV writers; the stats file is per r.
void write_stats_csv(std::ostream& os, const EnsembleStats& st, double r);
void write_boundary_csv(std::ostream& os, const BoundaryDeviation& b);
void write_deviation_csv(std::ostream& os, const std::vector<DeviationPoint>& series);
nlohmann::json fit_to_json(const DecayFit& f);
nlohmann::json checks_to_json(const TrajectoryChecks& c);
nlohmann::json domination_to_json(const DominationReport& r);

// ---------------------------------------------------------------------------
// Uniform back-off: how far g Z_n o may fall back towards o.

struct BackoffRow {
  std::string name;
  double displacement = 0.0;  // d(o, g o)
  double C = 0.0;             // empirical (1 - epsilon) quantile of the back-off
  double worst = 0.0;         // largest back-off seen
};

struct BackoffTable {
  double epsilon = 0.0;
  long horizon = 0;
  std::size_t trials = 0;
  std::vector<BackoffRow> rows;
  double max_C = 0.0;
};

template <SpaceModel Space>
BackoffTable uniform_backoff_experiment(const Space& space, const DiscreteMeasure<Space>& mu,
                                        const std::vector<typename Space::Isometry>& family,
                                        const std::vector<std::string>& names, double epsilon, long horizon,
                                        std::size_t trials, std::uint64_t seed, unsigned workers = 1) {
  if (family.size() != names.size()) throw InputError("one name per family element");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InputError("epsilon must lie in [0, 1]");
  if (trials == 0 || horizon < 1) throw InputError("back-off needs trials and a positive horizon");
  using Iso = typename Space::Isometry;
  BackoffTable table;
  table.epsilon = epsilon;
  table.horizon = horizon;
  table.trials = trials;
  const auto o = space.basepoint();
  std::vector<double> base;
  for (const auto& g : family) base.push_back(space.distance(o, space.orbit_point(g)));

  // back-off[t][i] = max over n <= horizon of d(o, g_i o) - d(o, g_i Z_n o), at least 0
  using Part = std::vector<std::vector<double>>;
  const auto parts = parallel_chunks<Part>(trials, detail::kChunk, workers, [&](std::size_t b, std::size_t e) {
    Part out;
    for (std::size_t t = b; t < e; ++t) {
      auto rng = stream_rng(seed, t, Stream::backoff);
      auto step = mu.index_distribution();
      std::vector<Iso> pos(family);
      std::vector<double> worst(family.size(), 0.0);
      for (long n = 1; n <= horizon; ++n) {
        const auto& g = mu.atoms()[step(rng)].g;
        for (std::size_t i = 0; i < family.size(); ++i) {
          accumulate(space, pos[i], g);
          worst[i] = std::max(worst[i], base[i] - space.distance(o, space.orbit_point(pos[i])));
        }
      }
      out.push_back(std::move(worst));
    }
    return out;
  });
  std::vector<std::vector<double>> by_g(family.size());
  for (const auto& p : parts)
    for (const auto& w : p)
      for (std::size_t i = 0; i < w.size(); ++i) by_g[i].push_back(w[i]);
  for (std::size_t i = 0; i < family.size(); ++i) {
    auto& v = by_g[i];
    std::sort(v.begin(), v.end());
    BackoffRow row;
    row.name = names[i];
    row.displacement = base[i];
    row.worst = v.back();
    // smallest C with at least (1 - epsilon) of the paths never backing off more
    const auto need = static_cast<std::size_t>(std::ceil((1.0 - epsilon) * static_cast<double>(v.size()) - 1e-9));
    row.C = need == 0 ? 0.0 : v[need - 1];
    table.max_C = std::max(table.max_C, row.C);
    table.rows.push_back(row);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Continuity of the escape rate under perturbations of mu.

struct ContinuityRow {
  std::string label;
  bool feasible = false;
  double alpha_max = 0.0;
  std::string note;
  MeanEstimate ell;
  bool above = false;  // ell + 3 stderr >= r
};

struct ContinuityTable {
  double r = 0.0;
  std::vector<ContinuityRow> rows;
  double min_ell = 0.0;
  bool pass = true;  // every feasible row has ell >= r - 3 stderr
};

// Each perturbation is decomposed against the same certificate at the configured
// (N, alpha, flavor) and its escape rate estimated by a plain walk.
template <SpaceModel Space>
ContinuityTable continuity_sweep(const Space& space, const SchottkySet<Space>& cert, const RunConfig& cfg,
                                 const std::vector<std::pair<std::string, DiscreteMeasure<Space>>>& measures,
                                 double r, long N, double alpha) {
  ContinuityTable table;
  table.r = r;
  table.min_ell = std::numeric_limits<double>::infinity();
  const auto flavor = parse_decomp_flavor(cfg.flavor);
  for (const auto& [label, m] : measures) {
    ContinuityRow row;
    row.label = label;
    try {
      const auto plan = decompose(space, m, N, cert, alpha, flavor, cfg.A);
      row.feasible = true;
      row.alpha_max = plan.alpha_max;
    } catch (const InfeasibleError& e) {
      row.alpha_max = e.alpha_max();
      row.note = e.what();
    }
    RunConfig c = cfg;
    c.engine = "none";
    c.n_ref = 0;
    c.report_every = c.n_max;
    RunContext<Space> ctx;
    ctx.space = &space;
    ctx.config = c;
    ctx.mu = m;
    ctx.horizon = c.n_max;
    const auto st = run_ensemble(ctx);
    row.ell = escape_rate(st, cfg.bootstrap).ell;
    row.above = row.ell.mean + 3 * row.ell.stderr >= r;
    if (row.feasible) {
      table.min_ell = std::min(table.min_ell, row.ell.mean);
      if (!row.above) table.pass = false;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------

template <class Fn>
decltype(auto) with_space(const RunConfig& cfg, Fn&& fn) {
  if (cfg.backend == "tree") {
    const FreeGroupSpace space(cfg.rank);
    return fn(space);
  }
  if (cfg.precision == "wide") {
    const WideSpace space(cfg.delta);
    return fn(space);
  }
  const HalfPlaneSpace<double> space(cfg.delta);
  return fn(space);
}

}  // namespace pivotwalk
