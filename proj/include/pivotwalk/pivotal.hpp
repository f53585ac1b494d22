#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "pivotwalk/errors.hpp"
#include "pivotwalk/free_group.hpp"
#include "pivotwalk/geometry.hpp"

namespace pivotwalk {

// ---------------------------------------------------------------------------
// Free group engine: s_1 w_1 ... s_n w_n with single-letter s_i.

struct FreePivotRecord {
  long time = 0;
  Word guard;  // Z_{k-1} s_k
};

struct StepOutcome {
  long n = 0;               // index of the step just taken
  bool pivotal = false;     // n was added
  std::size_t popped = 0;   // records removed during the step
  std::size_t pivots = 0;   // stack size afterwards
  double distance = 0.0;    // d(o, current endpoint)
  double bound = 0.0;       // pivot_lower_bound afterwards

  long increment() const { return (pivotal ? 1 : 0) - static_cast<long>(popped); }
};

class FreePivotState {
 public:
  explicit FreePivotState(int rank);

  // Appends s then w to the path. w must be nontrivial.
  StepOutcome step(Letter s, const Word& w);

  const Word& current() const { return current_; }
  const std::vector<FreePivotRecord>& stack() const { return stack_; }
  long time() const { return time_; }
  std::size_t pivots() const { return stack_.size(); }
  std::vector<long> pivot_times() const;
  int rank() const { return rank_; }

 private:
  int rank_;
  long time_ = 0;
  Word current_;
  std::vector<FreePivotRecord> stack_;
};

// ---------------------------------------------------------------------------
// Simple and refined models over a hyperbolic space.

enum class EngineFlavor { simple, refined };

inline const char* to_string(EngineFlavor f) { return f == EngineFlavor::simple ? "simple" : "refined"; }

struct PivotParams {
  double C0 = 0.0;
  double D = 1.0;
};

struct EngineOptions {
  // Re-check the stack tail after every step and throw InvariantViolation on failure.
  bool check_each_step = true;
  double eps = kDefaultEps;
};

template <class P>
struct PivotRecord {
  long time = 0;
  P entry;      // y_k^-
  P pivot;      // y_k
  P direction;  // y_k^+
  P mid;        // y_k (simple) or y_k^(1) (refined): the point used to extend the record below
  double rho_jump = 0.0;  // d(o, r_k o), refined only
  ChainShadowCertificate<P> cert;
};

struct StackReport {
  bool ok = true;
  std::vector<std::string> violations;
  double worst_o_chain_product = 0.0;
  double worst_cross_product = 0.0;
};

template <SpaceModel Space>
class PivotEngine {
 public:
  using Point = typename Space::Point;
  using Isometry = typename Space::Isometry;
  using Record = PivotRecord<Point>;

  PivotEngine(const Space& space, EngineFlavor flavor, PivotParams params, const Isometry& w0,
              EngineOptions options = {})
      : space_(space), flavor_(flavor), params_(params), options_(options), origin_(space.basepoint()) {
    const double delta = space.delta();
    if (params.C0 < 0) throw InputError("C0 must be nonnegative");
    if (params.D < 20 * params.C0 + 100 * delta + 1 - options.eps)
      throw ContractError("pivotal engines need D >= 20 C0 + 100 delta + 1");
    position_ = w0;
    endpoint_ = space_.orbit_point(position_);
  }

  PivotEngine(const Space& space, EngineFlavor flavor, PivotParams params, EngineOptions options = {})
      : PivotEngine(space, flavor, params, space.identity(), options) {}

  EngineFlavor flavor() const { return flavor_; }
  const PivotParams& params() const { return params_; }
  const Space& space() const { return space_; }

  // One transition s = a b followed by w.
  StepOutcome step_simple(const Isometry& a, const Isometry& b, const Isometry& w) {
    if (flavor_ != EngineFlavor::simple) throw ContractError("step_simple on a refined engine");
    check_jump(a);
    check_jump(b);
    const Isometry ga = space_.compose(position_, a);
    const Isometry gab = space_.compose(ga, b);
    const Isometry next = space_.compose(gab, w);
    std::vector<Point> m{endpoint_, space_.orbit_point(ga), space_.orbit_point(gab)};
    return advance(std::move(m), next, 0.0);
  }

  // One transition s = a b r c d followed by w; r is unconstrained.
  StepOutcome step_refined(const Isometry& a, const Isometry& b, const Isometry& r, const Isometry& c,
                           const Isometry& d, const Isometry& w) {
    if (flavor_ != EngineFlavor::refined) throw ContractError("step_refined on a simple engine");
    for (const Isometry* s : {&a, &b, &c, &d}) check_jump(*s);
    std::vector<Point> m{endpoint_};
    Isometry g = position_;
    for (const Isometry* s : {&a, &b, &r, &c, &d}) {
      g = space_.compose(g, *s);
      m.push_back(space_.orbit_point(g));
    }
    const double rho = space_.distance(origin_, space_.orbit_point(r));
    return advance(std::move(m), space_.compose(g, w), rho);
  }

  const std::vector<Record>& stack() const { return stack_; }
  std::size_t pivots() const { return stack_.size(); }
  std::vector<long> pivot_times() const {
    std::vector<long> t;
    for (const auto& r : stack_) t.push_back(r.time);
    return t;
  }
  long time() const { return time_; }
  const Point& endpoint() const { return endpoint_; }
  const Isometry& position() const { return position_; }
  // Markers of the last step: y^-, y, y^+ or y^(0..5), followed by y_{n+1}^-.
  const std::vector<Point>& last_markers() const { return markers_; }

  // |P_n| for the simple model, sum of d(o, r o) over the stack for the refined model.
  double pivot_lower_bound() const {
    if (flavor_ == EngineFlavor::simple) return static_cast<double>(stack_.size());
    return rho_sum_;
  }

  const Point& anchor_point(std::size_t index) const {
    if (index >= stack_.size()) throw InputError("anchor index beyond the pivot stack");
    return stack_[index].pivot;
  }

  // Checks every stack invariant from record `from` upward (0 = everything).
  StackReport validate(std::size_t from = 0) const {
    StackReport rep;
    const double eps = options_.eps;
    const double C0 = params_.C0, D = params_.D, delta = space_.delta();
    auto fail = [&](std::string why) {
      rep.ok = false;
      rep.violations.push_back(std::move(why));
    };
    const std::size_t p = stack_.size();
    if (from >= p) from = p == 0 ? 0 : p - 1;

    for (std::size_t i = from; i < p; ++i) {
      const auto& r = stack_[i];
      if (i > 0 && stack_[i - 1].time >= r.time) fail("pivot times not increasing at record " + std::to_string(i));
      const auto cr = validate_certificate(space_, r.cert, eps);
      if (!cr.ok) fail("certificate of time " + std::to_string(r.time) + ": " + cr.reason);
      if (std::abs(r.cert.C - (C0 + delta)) > eps) fail("certificate slack differs from C0 + delta");
      const Point& expected_tip = i + 1 < p ? stack_[i + 1].entry : endpoint_;
      if (space_.distance(r.cert.tip(), expected_tip) > 1e-6)
        fail("certificate of time " + std::to_string(r.time) + " does not end at the next entry point");
      if (flavor_ == EngineFlavor::refined && space_.distance(r.entry, r.pivot) < r.rho_jump + D - eps)
        fail("d(y^-, y) < d(o, r o) + D at time " + std::to_string(r.time));
    }

    const AlignParams cross{2 * C0 + 3 * delta, D - 2 * C0 - 3 * delta, delta};
    const AlignParams ochain{2 * C0 + 4 * delta, D - 2 * C0 - 3 * delta, delta};
    if (p > 0) {
      // cross chain from record `from`, preceded by the pivot below it
      Chain<Point> c{{}, cross};
      if (from > 0) c.points.push_back(stack_[from - 1].pivot);
      for (std::size_t i = from; i < p; ++i) {
        c.points.push_back(stack_[i].entry);
        c.points.push_back(stack_[i].pivot);
      }
      c.points.push_back(endpoint_);
      const auto cr = validate_chain(space_, c, eps);
      rep.worst_cross_product = cr.worst_product;
      if (!cr.ok) fail("cross-pivot chain invalid (product " + std::to_string(cr.worst_product) + ", gap " +
                       std::to_string(cr.worst_gap) + ")");

      if (from <= 1) {
        Chain<Point> o{{origin_}, ochain};
        for (std::size_t i = 0; i < p; ++i) {
          if (i > 0) o.points.push_back(stack_[i].entry);
          o.points.push_back(stack_[i].pivot);
        }
        o.points.push_back(endpoint_);
        // only the head is new when validating a tail
        if (from == 1 && o.points.size() > 4) o.points.resize(4);
        const auto orep = validate_chain(space_, o, eps);
        rep.worst_o_chain_product = orep.worst_product;
        if (!orep.ok) fail("o-prefixed chain invalid (product " + std::to_string(orep.worst_product) + ", gap " +
                           std::to_string(orep.worst_gap) + ")");
      }
      if (flavor_ == EngineFlavor::refined &&
          space_.distance(origin_, stack_[0].pivot) < stack_[0].rho_jump + D - C0 - 3 * delta - eps)
        fail("first pivot too close to the origin");
    }
    const double d = space_.distance(origin_, endpoint_);
    if (d < pivot_lower_bound() - eps) fail("d(o, y_{n+1}^-) below the pivot lower bound");
    return rep;
  }

 private:
  void check_jump(const Isometry& s) const {
    if (space_.distance(origin_, space_.orbit_point(s)) < params_.D - options_.eps)
      throw ContractError("Schottky element moves the basepoint less than D");
  }

  // m holds y_n^- followed by the transition markers; next is the isometry of y_{n+1}^-.
  StepOutcome advance(std::vector<Point> m, const Isometry& next, double rho) {
    ++time_;
    const Point next_point = space_.orbit_point(next);
    const double C0 = params_.C0, eps = options_.eps;

    // y_k, markers..., y_{n+1}^-
    std::vector<Point> seq;
    seq.reserve(m.size() + 2);
    seq.push_back(stack_.empty() ? origin_ : stack_.back().pivot);
    seq.insert(seq.end(), m.begin(), m.end());
    seq.push_back(next_point);
    bool local = check_alignment<Space>(space_, seq, C0, eps);
    if (local && flavor_ == EngineFlavor::refined)
      local = space_.gromov_product(m[1], m[4], m[3]) <= C0 + eps;

    StepOutcome out;
    out.n = time_;
    const std::size_t before = stack_.size();
    if (local) {
      Record r;
      r.time = time_;
      r.entry = m[0];
      r.pivot = m[m.size() - 2];
      r.direction = m.back();
      r.mid = m[1];
      r.rho_jump = rho;
      r.cert = two_point_certificate(space_, r.pivot, r.direction, next_point, C0 + space_.delta());
      stack_.push_back(std::move(r));
      rho_sum_ += rho;
      out.pivotal = true;
    } else {
      // extend the top witness through this step's mid marker; on failure pop and
      // retry one level down through the popped record's mid marker
      Point mid = m[1];
      while (!stack_.empty()) {
        if (try_extend(space_, stack_.back().cert, next_point, mid, C0, eps)) break;
        mid = stack_.back().mid;
        rho_sum_ -= stack_.back().rho_jump;
        stack_.pop_back();
      }
      if (stack_.empty()) rho_sum_ = 0.0;
      out.popped = before - stack_.size();
    }
    position_ = next;
    endpoint_ = next_point;
    m.push_back(next_point);
    markers_ = std::move(m);
    out.pivots = stack_.size();
    out.distance = space_.distance(origin_, endpoint_);
    out.bound = pivot_lower_bound();
    if (options_.check_each_step) {
      const auto rep = validate(stack_.size() >= 2 ? stack_.size() - 2 : 0);
      if (!rep.ok) throw InvariantViolation("pivot stack invariant failed at step " + std::to_string(time_) + ": " +
                                            rep.violations.front());
    }
    return out;
  }

  const Space& space_;
  EngineFlavor flavor_;
  PivotParams params_;
  EngineOptions options_;
  Point origin_;
  Isometry position_;
  Point endpoint_;
  long time_ = 0;
  double rho_sum_ = 0.0;
  std::vector<Record> stack_;
  std::vector<Point> markers_;
};

// ---------------------------------------------------------------------------
// Trace export.

struct TraceRow {
  long n = 0;
  std::size_t pivots = 0;
  std::vector<long> pivot_times;
  double distance = 0.0;
  double bound = 0.0;
};

template <class Engine>
TraceRow trace_row(const Engine& engine, const StepOutcome& out) {
  return {out.n, out.pivots, engine.pivot_times(), out.distance, out.bound};
}

// Header: n,pivots,pivot_times,distance,bound; pivot times are space-separated.
void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows);

}  // namespace pivotwalk
