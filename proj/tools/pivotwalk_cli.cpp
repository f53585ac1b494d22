// pivotwalk: command-line front end for ensembles, pivot traces, Schottky
// certificates and the statistical checks.
//
// Exit codes: 0 success, 1 configuration error, 2 infeasible decomposition,
// 3 failed check under --paranoid.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pivotwalk/harness.hpp"

using namespace pivotwalk;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::string out = "out";
  bool paranoid = false;
};

class CheckFailure : public Error {
 public:
  using Error::Error;
};

std::string r_tag(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", r);
  return buf;
}

std::ofstream open_out(const Options& o, const std::string& name) {
  fs::create_directories(o.out);
  std::ofstream f(fs::path(o.out) / name);
  if (!f) throw ConfigError("cannot write " + (fs::path(o.out) / name).string());
  return f;
}

void write_json(const Options& o, const std::string& name, const nlohmann::json& j) {
  open_out(o, name) << j.dump(2) << '\n';
}

RunConfig load(const Options& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.workers) c.workers = *o.workers;
  if (o.paranoid) c.paranoid = true;
  c.validate();
  return c;
}

template <SpaceModel Space>
nlohmann::json context_json(const Space& space, const RunContext<Space>& ctx) {
  nlohmann::json j{{"config", config_to_json(ctx.config)}, {"seed", ctx.config.seed}};
  if (ctx.schottky) j["certificate"] = schottky_to_json(space, *ctx.schottky);
  if (ctx.plan)
    j["decomposition"] = {{"flavor", to_string(ctx.plan->flavor)},
                          {"N", ctx.plan->N},
                          {"A", ctx.plan->A},
                          {"alpha", ctx.plan->alpha},
                          {"alpha_max", ctx.plan->alpha_max},
                          {"residual", ctx.plan->residual}};
  return j;
}

void require_checks(const RunConfig& c, const TrajectoryChecks& checks) {
  if (c.paranoid && checks.failures() > 0)
    throw CheckFailure("runtime checks failed: " + std::to_string(checks.failures()) + " (" +
                       (checks.messages.empty() ? "" : checks.messages.front()) + ")");
}

template <SpaceModel Space>
void write_backoff(const Options& o, const Space& space, const RunContext<Space>& ctx, nlohmann::json& summary) {
  const auto& c = ctx.config;
  if (c.backoff_family.empty()) return;
  std::vector<typename Space::Isometry> fam;
  for (const auto& g : c.backoff_family) fam.push_back(space.parse(g));
  const auto t = uniform_backoff_experiment(space, ctx.mu, fam, c.backoff_family, c.backoff_epsilon, c.n_max,
                                            c.trials, c.seed, c.workers);
  auto f = open_out(o, "backoff.csv");
  f << std::setprecision(17) << "g,displacement,C,worst\n";
  for (const auto& r : t.rows) f << '"' << r.name << "\"," << r.displacement << ',' << r.C << ',' << r.worst << '\n';
  summary["backoff"] = {{"epsilon", t.epsilon}, {"max_C", t.max_C}};
}

int cmd_simulate(const Options& o) {
  const RunConfig c = load(o);
  return with_space(c, [&](const auto& space) {
    const auto ctx = prepare_run(space, c);
    const auto st = run_ensemble(ctx);
    auto summary = context_json(space, ctx);
    for (double r : c.r_grid) {
      auto f = open_out(o, "stats_r" + r_tag(r) + ".csv");
      write_stats_csv(f, st, r);
    }
    if (c.n_ref > 0) {
      for (double r : c.r_grid) {
        const auto b = boundary_deviation(st, r, ctx.params.C0, space.delta());
        auto f = open_out(o, "boundary_r" + r_tag(r) + ".csv");
        write_boundary_csv(f, b);
      }
    }
    write_backoff(o, space, ctx, summary);
    summary["checks"] = checks_to_json(st.checks);
    write_json(o, "summary_simulate.json", summary);
    std::cout << "simulated " << st.trials << " trajectories to n = " << st.n_max << "; mean d(o, Z_n o) = "
              << st.rows.back().mean_d << "\n";
    require_checks(c, st.checks);
    return 0;
  });
}

int cmd_pivots(const Options& o, std::uint64_t trajectory) {
  const RunConfig c = load(o);
  if (c.engine == "none") throw ConfigError("pivot traces need engine = free, simple or refined");
  return with_space(c, [&](const auto& space) {
    const auto ctx = prepare_run(space, c);
    const auto rows = trajectory_trace(ctx, trajectory);
    auto f = open_out(o, "trace.csv");
    write_trace_csv(f, rows);
    std::cout << "trajectory " << trajectory << ": " << rows.size() << " transitions, "
              << (rows.empty() ? 0 : rows.back().pivots) << " pivots at the end\n";
    return 0;
  });
}

int cmd_deviations(const Options& o) {
  const RunConfig c = load(o);
  return with_space(c, [&](const auto& space) {
    const auto ctx = prepare_run(space, c);
    const auto st = run_ensemble(ctx);
    auto summary = context_json(space, ctx);
    nlohmann::json fits = nlohmann::json::array();
    for (double r : c.r_grid) {
      const auto series = deviation_curve(st, r);
      {
        auto f = open_out(o, "deviation_r" + r_tag(r) + ".csv");
        write_deviation_csv(f, series);
      }
      {
        auto f = open_out(o, "deviation_r" + r_tag(r) + ".dat");
        f << std::setprecision(17);
        for (const auto& d : series) f << d.n << ' ' << d.p << '\n';
      }
      nlohmann::json entry{{"r", r}};
      try {
        const auto fit = decay_fit(series, r);
        entry["fit"] = fit_to_json(fit);
        std::cout << "r = " << r << ": kappa_hat = " << fit.kappa_hat << " [" << fit.ci_lo << ", " << fit.ci_hi
                  << "]" << (fit.flagged ? " (interval includes 0)" : "") << "\n";
      } catch (const FitError& e) {
        entry["fit_error"] = e.what();
        std::cout << "r = " << r << ": " << e.what() << "\n";
      }
      if (c.n_ref > 0) {
        const auto b = boundary_deviation(st, r, ctx.params.C0, space.delta());
        auto f = open_out(o, "boundary_r" + r_tag(r) + ".csv");
        write_boundary_csv(f, b);
        nlohmann::json bj{{"gap_bound", b.gap_bound}, {"proxy_above_distance", b.proxy_above_distance}};
        if (b.fit) bj["fit"] = fit_to_json(*b.fit);
        else bj["fit_error"] = b.fit_error;
        entry["boundary"] = bj;
      }
      fits.push_back(entry);
    }
    summary["deviations"] = fits;
    summary["checks"] = checks_to_json(st.checks);
    write_json(o, "summary_deviations.json", summary);
    require_checks(c, st.checks);
    return 0;
  });
}

int cmd_escape_rate(const Options& o) {
  const RunConfig c = load(o);
  return with_space(c, [&](const auto& space) {
    const auto ctx = prepare_run(space, c);
    const auto st = run_ensemble(ctx);
    const auto e = escape_rate(st, c.bootstrap);
    {
      auto f = open_out(o, "escape.csv");
      f << std::setprecision(17) << "n,mean_d_over_n\n";
      for (const auto& [n, v] : e.subadditive) f << n << ',' << v << '\n';
    }
    auto summary = context_json(space, ctx);
    summary["escape_rate"] = {{"n", e.n},
                              {"ell_hat", e.ell.mean},
                              {"ci", {e.ell.lo, e.ell.hi}},
                              {"stderr", e.ell.stderr},
                              {"subadditive_rises", e.subadditive_rises}};
    summary["checks"] = checks_to_json(st.checks);
    write_json(o, "summary_escape_rate.json", summary);
    std::cout << "ell_hat = " << e.ell.mean << " [" << e.ell.lo << ", " << e.ell.hi << "] at n = " << e.n << "\n";
    if (e.subadditive_rises > 0)
      std::cout << "note: E d / n rose beyond three standard errors " << e.subadditive_rises << " times\n";
    require_checks(c, st.checks);
    return 0;
  });
}

int cmd_domination(const Options& o, long steps) {
  const RunConfig c = load(o);
  if (c.engine == "none") throw ConfigError("domination needs engine = free, simple or refined");
  return with_space(c, [&](const auto& space) {
    const auto ctx = prepare_run(space, c);
    std::vector<long> samples;
    std::size_t skipped = 0;
    ULaw law;
    long n = steps > 0 ? steps : c.n_max;
    if (c.engine == "free") {
      if (n > c.n_max) throw ConfigError("--steps exceeds n_max");
      RunContext<std::decay_t<decltype(space)>> at_n = ctx;
      at_n.config.n_max = n;
      at_n.config.report_every = 1;
      at_n.config.n_ref = 0;
      at_n.horizon = n;
      samples = run_ensemble(at_n).final_pivots;
      law = free_u_law(c.rank);
    } else {
      // pivots after n transitions of the engine, on trajectories that reach n
      using P = std::vector<long>;
      const auto parts = parallel_chunks<std::pair<P, std::size_t>>(
          c.trials, 512, c.workers, [&](std::size_t b, std::size_t e) {
            std::pair<P, std::size_t> out{};
            for (std::size_t t = b; t < e; ++t) {
              const auto rows = trajectory_trace(ctx, t);
              if (static_cast<long>(rows.size()) >= n) out.first.push_back(static_cast<long>(rows[n - 1].pivots));
              else ++out.second;
            }
            return out;
          });
      for (const auto& [p, s] : parts) {
        samples.insert(samples.end(), p.begin(), p.end());
        skipped += s;
      }
      law = c.engine == "simple" ? simple_u_law() : refined_u_law(ctx.schottky->eta);
      if (samples.empty()) throw ConfigError("no trajectory reached " + std::to_string(n) + " transitions");
    }
    const auto rep = domination_check(samples, law, static_cast<int>(n));
    {
      auto f = open_out(o, "domination.csv");
      f << std::setprecision(17) << "i,law_tail,empirical_tail,sigma\n";
      for (const auto& r : rep.rows) f << r.i << ',' << r.law_tail << ',' << r.empirical_tail << ',' << r.sigma << '\n';
    }
    auto summary = context_json(space, ctx);
    summary["domination"] = domination_to_json(rep);
    summary["domination"]["skipped"] = skipped;
    write_json(o, "summary_domination.json", summary);
    std::cout << "domination against " << rep.law << " at n = " << n << " over " << rep.samples
              << " samples: " << (rep.pass ? "pass" : "FAIL") << " (worst excess " << rep.worst_excess << " at i = "
              << rep.worst_i << ")\n";
    if (c.paranoid && !rep.pass) throw CheckFailure("domination check failed");
    return 0;
  });
}

int cmd_continuity(const Options& o) {
  const RunConfig c = load(o);
  if (c.perturbations.empty()) throw ConfigError("continuity needs a perturbations list");
  return with_space(c, [&](const auto& space) {
    using Space = std::decay_t<decltype(space)>;
    const auto mu = parse_measure(space, c.measure);
    const auto cert = detail::resolve_certificate(space, c, mu);
    const auto flavor = parse_decomp_flavor(c.flavor);
    long N = c.N;
    if (N == 0) {
      const long M = std::max<long>(1, cert.construction.support_power);
      N = flavor == DecompFlavor::refined ? 4 * M + 1 : 2 * M;
    }
    const double alpha =
        c.alpha > 0.0 ? c.alpha : decompose(space, mu, N, cert, 1e-300, flavor, c.A).alpha_max / 2;
    std::vector<std::pair<std::string, DiscreteMeasure<Space>>> rows{{"mu", mu}};
    for (const auto& p : c.perturbations) {
      const auto eq = p.find('=');
      if (eq == std::string::npos) throw ConfigError("perturbation needs label=measure: " + p);
      rows.emplace_back(p.substr(0, eq), parse_measure(space, p.substr(eq + 1)));
    }
    const double r = c.continuity_r > 0 ? c.continuity_r : c.r_grid.front();
    const auto t = continuity_sweep(space, cert, c, rows, r, N, alpha);
    {
      auto f = open_out(o, "continuity.csv");
      f << std::setprecision(17) << "label,feasible,alpha_max,ell_hat,ci_lo,ci_hi,above_r\n";
      for (const auto& row : t.rows)
        f << '"' << row.label << "\"," << row.feasible << ',' << row.alpha_max << ',' << row.ell.mean << ','
          << row.ell.lo << ',' << row.ell.hi << ',' << row.above << '\n';
    }
    nlohmann::json summary{{"config", config_to_json(c)},
                           {"certificate", schottky_to_json(space, cert)},
                           {"N", N},
                           {"alpha", alpha},
                           {"r", r},
                           {"min_ell", t.min_ell},
                           {"pass", t.pass}};
    write_json(o, "summary_continuity.json", summary);
    for (const auto& row : t.rows)
      std::cout << row.label << ": " << (row.feasible ? "feasible" : "infeasible") << ", ell_hat = " << row.ell.mean
                << "\n";
    std::cout << "min ell_hat over feasible rows = " << t.min_ell << " against r = " << r << ": "
              << (t.pass ? "pass" : "FAIL") << "\n";
    if (c.paranoid && !t.pass) throw CheckFailure("continuity sweep fell below r");
    return 0;
  });
}

int cmd_schottky_verify(const Options& o, const std::string& cert_path, std::size_t trials, int radius) {
  RunConfig c = load(o);
  c.certificate = cert_path;
  return with_space(c, [&](const auto& space) {
    const auto mu = parse_measure(space, c.measure);
    const auto set = detail::resolve_certificate(space, c, mu);
    SchottkyLimits limits;
    limits.trials = trials;
    limits.tree_radius = radius;
    // a stream distinct from construction-time samples
    const auto sampler = default_sampler(space, set.elements, limits, trajectory_seed(c.seed, 0x5c077));
    const auto rep = verify_schottky(space, set, sampler, c.workers);
    const bool ok = rep.passes(set.eta);
    std::cout << "sampler: " << rep.sampler << "\nworst bad fraction " << rep.worst_bad_fraction << " (eta "
              << set.eta << "), translation min " << rep.translation_min << " (D " << set.D << ")\n"
              << (ok ? "verified" : "NOT verified") << "\n";
    write_json(o, "summary_schottky_verify.json",
               {{"certificate", schottky_to_json(space, set)},
                {"trials", rep.trials},
                {"worst_bad_fraction", rep.worst_bad_fraction},
                {"translation_min", rep.translation_min},
                {"short_elements", rep.short_elements},
                {"pass", ok}});
    if (c.paranoid && !ok) throw CheckFailure("certificate does not verify");
    return 0;
  });
}

int cmd_schottky_construct(const Options& o, const std::string& u, const std::string& v, bool search) {
  const RunConfig c = load(o);
  return with_space(c, [&](const auto& space) {
    SchottkyLimits limits;
    limits.seed = c.seed;
    limits.threads = c.workers;
    using Set = SchottkySet<std::decay_t<decltype(space)>>;
    Set set;
    long M = 1;
    if (search) {
      std::tie(M, set) = find_schottky_in_support(space, parse_measure(space, c.measure), c.eta, c.D, limits);
    } else {
      if (u.empty() || v.empty()) throw ConfigError("construct needs --u and --v, or --search");
      set = pingpong_construct(space, space.parse(u), space.parse(v), c.eta, c.D, limits, u, v);
    }
    write_json(o, "certificate.json", schottky_to_json(space, set));
    std::cout << set.size() << " elements at (eta, C, D) = (" << set.eta << ", " << set.C << ", " << set.D
              << "); support power " << M << "\n";
    return 0;
  });
}

int cmd_report(const Options& o) {
  if (!fs::is_directory(o.out)) throw ConfigError("no output directory " + o.out);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(o.out))
    if (e.path().extension() == ".json" && e.path().filename().string().rfind("summary_", 0) == 0)
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no run summaries in " + o.out);
  for (const auto& p : files) {
    std::ifstream in(p);
    nlohmann::json j;
    in >> j;
    std::cout << "== " << p.filename().string() << "\n";
    if (j.contains("config")) {
      const auto& c = j["config"];
      std::cout << "  backend " << c.value("backend", "?") << ", engine " << c.value("engine", "?") << ", measure "
                << c.value("measure", "?") << ", n_max " << c.value("n_max", 0) << ", trials "
                << c.value("trials", 0) << ", seed " << c.value("seed", 0) << "\n";
    }
    for (const char* key : {"decomposition", "escape_rate", "domination", "deviations", "checks", "backoff"})
      if (j.contains(key)) std::cout << "  " << key << ": " << j[key].dump() << "\n";
    for (const char* key : {"min_ell", "pass", "worst_bad_fraction"})
      if (j.contains(key)) std::cout << "  " << key << ": " << j[key].dump() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pivotal-time random walk simulator"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "Run configuration (key = value file)");
  app.add_option("--seed", o.seed, "Master seed (overrides the config)");
  app.add_option("--workers", o.workers, "Worker threads (overrides the config)")->check(CLI::PositiveNumber);
  app.add_option("--out", o.out, "Output directory")->capture_default_str();
  app.add_flag("--paranoid", o.paranoid, "Re-validate every pivot stack and fail on any check");

  auto* simulate = app.add_subcommand("simulate", "Run an ensemble and write per-n statistics");
  std::uint64_t trajectory = 0;
  auto* pivots = app.add_subcommand("pivots", "Write the pivot trace of one trajectory");
  pivots->add_option("--trajectory", trajectory, "Trajectory index");
  auto* schottky = app.add_subcommand("schottky", "Schottky certificates");
  schottky->require_subcommand(1);
  std::string cert_path, u, v;
  std::size_t verify_trials = 10000;
  int verify_radius = 4;
  bool search = false;
  auto* verify = schottky->add_subcommand("verify", "Verify a certificate on fresh samples");
  verify->add_option("--cert", cert_path, "Certificate file, or support")->required();
  verify->add_option("--trials", verify_trials, "Sampled pairs (half-plane)");
  verify->add_option("--radius", verify_radius, "Enumeration radius (tree)");
  auto* construct = schottky->add_subcommand("construct", "Ping-pong construction from two loxodromics");
  construct->add_option("--u", u, "First element");
  construct->add_option("--v", v, "Second element");
  construct->add_flag("--search", search, "Search the support of the configured measure instead");
  auto* deviations = app.add_subcommand("deviations", "Lower deviation probabilities and decay fits");
  auto* escape = app.add_subcommand("escape-rate", "Escape rate with a bootstrap interval");
  long steps = 0;
  auto* domination = app.add_subcommand("domination", "Pivot counts against the increment law");
  domination->add_option("--steps", steps, "Number of transitions (default n_max)");
  auto* continuity = app.add_subcommand("continuity", "Escape rate under perturbations of the measure");
  auto* report = app.add_subcommand("report", "Summarize the run summaries in --out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(o);
    if (pivots->parsed()) return cmd_pivots(o, trajectory);
    if (verify->parsed()) return cmd_schottky_verify(o, cert_path, verify_trials, verify_radius);
    if (construct->parsed()) return cmd_schottky_construct(o, u, v, search);
    if (deviations->parsed()) return cmd_deviations(o);
    if (escape->parsed()) return cmd_escape_rate(o);
    if (domination->parsed()) return cmd_domination(o, steps);
    if (continuity->parsed()) return cmd_continuity(o);
    if (report->parsed()) return cmd_report(o);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << " (alpha_max = " << e.alpha_max() << ")\n";
    return 2;
  } catch (const CheckFailure& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return 3;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violated: " << e.what() << "\n";
    return o.paranoid ? 3 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
