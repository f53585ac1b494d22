#include "pivotwalk/harness.hpp"

#include <iomanip>
#include <sstream>

#include "CLI11.hpp"

namespace pivotwalk {

void RunConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(backend == "tree" || backend == "halfplane", "backend must be tree or halfplane");
  need(backend != "tree" || rank >= 1, "rank must be positive");
  need(backend != "halfplane" || delta >= 0.0, "delta must be nonnegative");
  need(precision == "double" || precision == "wide", "precision must be double or wide");
  need(engine == "none" || engine == "free" || engine == "simple" || engine == "refined",
       "engine must be none, free, simple or refined");
  need(engine != "free" || backend == "tree", "the free engine runs on the tree backend only");
  need(flavor == "simple" || flavor == "refined" || flavor == "gapped", "flavor must be simple, refined or gapped");
  need(engine != "simple" || flavor == "simple", "the simple engine needs the simple flavor");
  need(engine != "refined" || flavor != "simple", "the refined engine needs the refined or gapped flavor");
  need(eta > 0.0 && eta < 1.0, "eta must lie in (0, 1)");
  need(C0 >= 0.0, "C0 must be nonnegative");
  need(D >= 20 * C0 + 100 * space_delta() + 1 - 1e-12, "D must be at least 20 C0 + 100 delta + 1");
  need(N >= 0, "N must be nonnegative");
  need(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
  need(A >= 0, "A must be nonnegative");
  need(flavor != "gapped" || A >= 1, "the gapped flavor needs A >= 1");
  need(flavor == "gapped" || A == 0, "A only applies to the gapped flavor");
  need(n_max >= 1, "n_max must be positive");
  need(trials >= 1, "trials must be positive");
  need(!r_grid.empty(), "r_grid must not be empty");
  for (double r : r_grid) need(r >= 0.0 && std::isfinite(r), "r_grid entries must be nonnegative");
  need(workers >= 1, "workers must be positive");
  need(report_every >= 1 && n_max % report_every == 0, "report_every must divide n_max");
  need(n_ref == 0 || n_ref > n_max, "n_ref must exceed n_max");
  need(bootstrap >= 10, "bootstrap needs at least 10 resamples");
  need(backoff_epsilon >= 0.0 && backoff_epsilon <= 1.0, "backoff_epsilon must lie in [0, 1]");
  need(continuity_r >= 0.0, "continuity_r must be nonnegative");
}

namespace {

std::string joined(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

template <class T>
T number(const std::string& key, const std::vector<std::string>& in) {
  if (in.size() != 1) throw ConfigError(key + " takes a single value");
  std::istringstream is(in[0]);
  T v{};
  is >> v;
  if (!is || !is.eof()) throw ConfigError("bad value for " + key + ": " + in[0]);
  return v;
}

std::string text(const std::string& key, const std::vector<std::string>& in) {
  if (in.size() != 1) throw ConfigError(key + " takes a single value");
  return in[0];
}

bool boolean(const std::string& key, const std::vector<std::string>& in) {
  const auto v = text(key, in);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean for " + key + ": " + v);
}

}  // namespace

RunConfig parse_run_config(std::istream& is) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(is);
  } catch (const CLI::Error& e) {
    throw ConfigError(std::string("unreadable config: ") + e.what());
  }
  RunConfig c;
  for (const auto& item : items) {
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == "default"))
      throw ConfigError("sections are not supported: " + joined(item.parents));
    const auto& k = item.name;
    const auto& in = item.inputs;
    if (k == "backend") c.backend = text(k, in);
    else if (k == "rank") c.rank = number<int>(k, in);
    else if (k == "delta") c.delta = number<double>(k, in);
    else if (k == "precision") c.precision = text(k, in);
    else if (k == "engine") c.engine = text(k, in);
    else if (k == "eta") c.eta = number<double>(k, in);
    else if (k == "C0") c.C0 = number<double>(k, in);
    else if (k == "D") c.D = number<double>(k, in);
    else if (k == "certificate") c.certificate = text(k, in);
    else if (k == "measure") c.measure = text(k, in);
    else if (k == "nu") c.nu = text(k, in);
    else if (k == "flavor") c.flavor = text(k, in);
    else if (k == "N") c.N = number<long>(k, in);
    else if (k == "alpha") c.alpha = number<double>(k, in);
    else if (k == "A") c.A = number<long>(k, in);
    else if (k == "n_max") c.n_max = number<long>(k, in);
    else if (k == "trials") c.trials = number<std::size_t>(k, in);
    else if (k == "r_grid") {
      c.r_grid.clear();
      for (const auto& x : in) c.r_grid.push_back(number<double>(k, {x}));
    } else if (k == "seed") c.seed = number<std::uint64_t>(k, in);
    else if (k == "workers") c.workers = number<unsigned>(k, in);
    else if (k == "report_every") c.report_every = number<long>(k, in);
    else if (k == "n_ref") c.n_ref = number<long>(k, in);
    else if (k == "bootstrap") c.bootstrap = number<int>(k, in);
    else if (k == "backoff_family") c.backoff_family = in;
    else if (k == "backoff_epsilon") c.backoff_epsilon = number<double>(k, in);
    else if (k == "perturbations") c.perturbations = in;
    else if (k == "continuity_r") c.continuity_r = number<double>(k, in);
    else if (k == "paranoid") c.paranoid = boolean(k, in);
    else throw ConfigError("unknown config key: " + k);
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_run_config(in);
}

nlohmann::json config_to_json(const RunConfig& c) {
  return {{"backend", c.backend},
          {"rank", c.rank},
          {"delta", c.delta},
          {"precision", c.precision},
          {"engine", c.engine},
          {"eta", c.eta},
          {"C0", c.C0},
          {"D", c.D},
          {"certificate", c.certificate},
          {"measure", c.measure},
          {"nu", c.nu},
          {"flavor", c.flavor},
          {"N", c.N},
          {"alpha", c.alpha},
          {"A", c.A},
          {"n_max", c.n_max},
          {"trials", c.trials},
          {"r_grid", c.r_grid},
          {"seed", c.seed},
          {"report_every", c.report_every},
          {"n_ref", c.n_ref},
          {"bootstrap", c.bootstrap},
          {"backoff_family", c.backoff_family},
          {"backoff_epsilon", c.backoff_epsilon},
          {"perturbations", c.perturbations},
          {"continuity_r", c.continuity_r},
          {"paranoid", c.paranoid}};
}

std::size_t r_index(const EnsembleStats& st, double r) {
  for (std::size_t i = 0; i < st.r_grid.size(); ++i)
    if (std::abs(st.r_grid[i] - r) <= 1e-12) return i;
  throw InputError("r = " + std::to_string(r) + " is not in the r grid");
}

std::vector<DeviationPoint> deviation_curve(const EnsembleStats& st, double r) {
  const auto i = r_index(st, r);
  std::vector<DeviationPoint> out;
  for (const auto& row : st.rows) out.push_back(deviation_point(row.n, row.trials, row.events[i]));
  return out;
}

EscapeRate escape_rate(const EnsembleStats& st, int resamples) {
  if (st.rows.empty() || st.final_distance.empty()) throw InputError("escape rate of an empty ensemble");
  EscapeRate e;
  e.n = st.n_max;
  std::vector<double> per(st.final_distance.size());
  for (std::size_t i = 0; i < per.size(); ++i) per[i] = st.final_distance[i] / static_cast<double>(st.n_max);
  e.ell = bootstrap_mean(per, st.seed, resamples);
  double prev = std::numeric_limits<double>::infinity(), prev_se = 0.0;
  for (const auto& row : st.rows) {
    const double n = static_cast<double>(row.n);
    const double v = row.mean_d / n;
    const double se = row.sd_d / n / std::sqrt(static_cast<double>(row.trials));
    e.subadditive.emplace_back(row.n, v);
    if (v > prev + 3 * std::hypot(se, prev_se)) ++e.subadditive_rises;
    prev = v;
    prev_se = se;
  }
  return e;
}

BoundaryDeviation boundary_deviation(const EnsembleStats& st, double r, double C0, double delta) {
  if (st.n_ref <= st.n_max) throw ConfigError("boundary deviation needs n_ref > n_max");
  BoundaryDeviation b;
  b.r = r;
  b.gap_bound = 2 * C0 + 9 * delta;
  const auto i = r_index(st, r);
  for (const auto& row : st.rows) {
    b.series.push_back(deviation_point(row.n, row.trials, row.proxy_events[i]));
    b.proxy_above_distance += row.proxy_above_distance;
  }
  try {
    b.fit = decay_fit(b.series, r);
  } catch (const FitError& e) {
    b.fit_error = e.what();
  }
  return b;
}

namespace {

std::ostream& full_precision(std::ostream& os) { return os << std::setprecision(17); }

}  // namespace

void write_stats_csv(std::ostream& os, const EnsembleStats& st, double r) {
  const auto i = r_index(st, r);
  full_precision(os) << "n,trials,mean_d,q10,q50,q90,mean_pivots,p_le_rn,ci_lo,ci_hi\n";
  for (const auto& row : st.rows) {
    const auto d = deviation_point(row.n, row.trials, row.events[i]);
    os << row.n << ',' << row.trials << ',' << row.mean_d << ',' << row.q10 << ',' << row.q50 << ',' << row.q90
       << ',';
    if (st.has_pivots) os << row.mean_pivots;
    os << ',' << d.p << ',' << d.lo << ',' << d.hi << '\n';
  }
}

void write_boundary_csv(std::ostream& os, const BoundaryDeviation& b) {
  full_precision(os) << "n,proxy_p,ci_lo,ci_hi\n";
  for (const auto& d : b.series) os << d.n << ',' << d.p << ',' << d.lo << ',' << d.hi << '\n';
}

void write_deviation_csv(std::ostream& os, const std::vector<DeviationPoint>& series) {
  full_precision(os) << "n,trials,events,p,ci_lo,ci_hi,censored\n";
  for (const auto& d : series)
    os << d.n << ',' << d.trials << ',' << d.events << ',' << d.p << ',' << d.lo << ',' << d.hi << ','
       << (d.censored ? 1 : 0) << '\n';
}

nlohmann::json fit_to_json(const DecayFit& f) {
  return {{"r", f.r},          {"kappa_hat", f.kappa_hat}, {"stderr", f.stderr},   {"ci", {f.ci_lo, f.ci_hi}},
          {"window", {f.n0, f.n1}}, {"points", f.points}, {"censored", f.censored}, {"flagged", f.flagged}};
}

nlohmann::json checks_to_json(const TrajectoryChecks& c) {
  return {{"snapshots", c.snapshots},
          {"bound_failures", c.bound_failures},
          {"chain_failures", c.chain_failures},
          {"consistency_failures", c.consistency_failures},
          {"messages", c.messages}};
}

nlohmann::json domination_to_json(const DominationReport& r) {
  return {{"law", r.law},           {"n", r.n},           {"samples", r.samples},
          {"k_sigma", r.k_sigma},   {"worst_excess", r.worst_excess}, {"worst_i", r.worst_i},
          {"pass", r.pass}};
}

}  // namespace pivotwalk
