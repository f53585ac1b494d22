#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "pivotwalk/pivotal.hpp"
#include "pivotwalk/schottky.hpp"
#include "pivotwalk/wide.hpp"

using namespace pivotwalk;

namespace {

// ---- free engine oracle: walk the whole path vertex by vertex ----------------

using Raw = std::vector<int>;  // letter codes, inverse = code ^ 1

Raw raw_mul(Raw u, const Raw& v) {
  for (int x : v) {
    if (!u.empty() && u.back() == (x ^ 1)) u.pop_back();
    else u.push_back(x);
  }
  return u;
}

// Appends the vertices strictly after p on the tree geodesic from p to q.
void walk_to(std::vector<Raw>& path, const Raw& q) {
  Raw p = path.back();
  std::size_t c = 0;
  while (c < p.size() && c < q.size() && p[c] == q[c]) ++c;
  while (p.size() > c) {
    p.pop_back();
    path.push_back(p);
  }
  while (p.size() < q.size()) {
    p.push_back(q[p.size()]);
    path.push_back(p);
  }
}

// Pivotal times straight from the definition: local geodesic at Z_{k-1}, and the
// path never visits Z_{k-1}s_k again.
std::vector<long> oracle_pivots(const std::vector<int>& s, const std::vector<Raw>& w) {
  std::vector<Raw> path{{}};
  std::vector<std::size_t> guard_at;
  std::vector<bool> local;
  Raw z;
  for (std::size_t k = 0; k < s.size(); ++k) {
    local.push_back((z.empty() || z.back() != (s[k] ^ 1)) && w[k].front() != (s[k] ^ 1));
    z = raw_mul(z, {s[k]});
    walk_to(path, z);
    guard_at.push_back(path.size() - 1);
    z = raw_mul(z, w[k]);
    walk_to(path, z);
  }
  std::vector<long> out;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (!local[k]) continue;
    const Raw& g = path[guard_at[k]];
    if (std::none_of(path.begin() + static_cast<long>(guard_at[k]) + 1, path.end(),
                     [&](const Raw& v) { return v == g; }))
      out.push_back(static_cast<long>(k) + 1);
  }
  return out;
}

Word to_word(const Raw& r) {
  std::vector<Letter> l;
  for (int x : r) l.push_back(Letter(static_cast<std::uint8_t>(x)));
  return Word::reduce(l);
}

Raw random_reduced(std::mt19937_64& rng, int rank, int len) {
  std::uniform_int_distribution<int> letter(0, 2 * rank - 1);
  Raw r;
  while (static_cast<int>(r.size()) < len) {
    const int x = letter(rng);
    if (r.empty() || r.back() != (x ^ 1)) r.push_back(x);
  }
  return r;
}

bool subset_of_previous_plus_new(const std::vector<long>& before, const std::vector<long>& after, long n) {
  const std::set<long> allowed(before.begin(), before.end());
  return std::all_of(after.begin(), after.end(), [&](long t) { return t == n || allowed.count(t); });
}

}  // namespace

TEST(FreePivots, MatchesPathOracle) {
  std::mt19937_64 rng(2024);
  for (int rank : {2, 3}) {
    for (int trial = 0; trial < 300; ++trial) {
      const int n = 1 + static_cast<int>(rng() % 40);
      std::vector<int> s;
      std::vector<Raw> w;
      FreePivotState state(rank);
      std::vector<long> prev;
      for (int k = 0; k < n; ++k) {
        s.push_back(static_cast<int>(rng() % (2 * rank)));
        // short words so that backtracking is frequent
        w.push_back(random_reduced(rng, rank, 1 + static_cast<int>(rng() % 4)));
        const auto out = state.step(Letter(static_cast<std::uint8_t>(s.back())), to_word(w.back()));
        const auto now = state.pivot_times();
        ASSERT_EQ(now, oracle_pivots(s, w)) << "rank " << rank << " trial " << trial << " step " << k + 1;
        ASSERT_TRUE(subset_of_previous_plus_new(prev, now, k + 1));
        ASSERT_TRUE(std::is_sorted(now.begin(), now.end()));
        ASSERT_EQ(static_cast<long>(now.size()) - static_cast<long>(prev.size()), out.increment());
        ASSERT_GE(out.distance, out.bound);
        prev = now;
      }
    }
  }
}

TEST(FreePivots, StraightRayIsAlwaysPivotal) {
  FreePivotState state(2);
  const Letter a = Letter::generator(0);
  const Word b = parse_word("b", 2);
  for (int n = 1; n <= 25; ++n) {
    const auto out = state.step(a, b);
    EXPECT_TRUE(out.pivotal);
    EXPECT_EQ(state.current().size(), static_cast<std::size_t>(2 * n));
    EXPECT_EQ(state.pivots(), static_cast<std::size_t>(n));
  }
}

TEST(FreePivots, ImmediateCancellation) {
  FreePivotState state(2);
  const auto out = state.step(Letter::generator(1), parse_word("B", 2));
  EXPECT_FALSE(out.pivotal);
  EXPECT_TRUE(state.current().empty());
  EXPECT_EQ(state.pivots(), 0u);
}

TEST(FreePivots, AdversarialWordsReturnToIdentity) {
  std::mt19937_64 rng(5);
  FreePivotState state(3);
  for (int n = 0; n < 50; ++n) {
    const Letter s(static_cast<std::uint8_t>(rng() % 6));
    const Word w = invert_word(concat_reduce(state.current(), Word::letter(s)));
    state.step(s, w);
    EXPECT_TRUE(state.current().empty());
    EXPECT_EQ(state.pivots(), 0u);
  }
}

TEST(FreePivots, InputErrors) {
  FreePivotState state(2);
  EXPECT_THROW(state.step(Letter::generator(0), Word{}), InputError);
  EXPECT_THROW(state.step(Letter::generator(2), parse_word("a", 2)), InputError);
  EXPECT_THROW(FreePivotState(0), InputError);
}

// ---- simple and refined engines on the tree ---------------------------------

namespace {

struct TreeFixture {
  FreeGroupSpace space{2};
  std::vector<Word> S{parse_word("a^3", 2), parse_word("b^3", 2), parse_word("a^-3", 2), parse_word("b^-3", 2)};
  PivotParams params{0.0, 1.0};

  const Word& draw(std::mt19937_64& rng) const { return S[rng() % S.size()]; }
  Word random_word(std::mt19937_64& rng, int max_len) const {
    return to_word(random_reduced(rng, 2, static_cast<int>(rng() % (max_len + 1))));
  }
};

}  // namespace

TEST(SimpleEngine, NonCancellingDrawsAreAllPivotal) {
  TreeFixture f;
  std::mt19937_64 rng(11);
  PivotEngine<FreeGroupSpace> eng(f.space, EngineFlavor::simple, f.params);
  Word last;
  for (int n = 1; n <= 60; ++n) {
    Word a, b;
    do a = f.draw(rng); while (!last.empty() && a == invert_word(last));
    do b = f.draw(rng); while (b == invert_word(a));
    last = b;
    const auto out = eng.step_simple(a, b, Word{});
    ASSERT_TRUE(out.pivotal) << "step " << n;
    EXPECT_EQ(eng.pivots(), static_cast<std::size_t>(n));
    EXPECT_EQ(out.distance, 6.0 * n);
    EXPECT_GE(out.distance - eng.pivot_lower_bound(), 0.0);
  }
  EXPECT_TRUE(eng.validate().ok);
}

TEST(SimpleEngine, InverseOfPrefixEmptiesStack) {
  TreeFixture f;
  PivotEngine<FreeGroupSpace> eng(f.space, EngineFlavor::simple, f.params);
  for (int n = 0; n < 5; ++n) eng.step_simple(f.S[0], f.S[1], Word{});
  ASSERT_EQ(eng.pivots(), 5u);
  const Word back = invert_word(concat_reduce(concat_reduce(eng.position(), f.S[0]), f.S[1]));
  const auto out = eng.step_simple(f.S[0], f.S[1], back);
  EXPECT_FALSE(out.pivotal);
  EXPECT_EQ(out.popped, 5u);
  EXPECT_EQ(eng.pivots(), 0u);
  EXPECT_TRUE(eng.endpoint().empty());
  EXPECT_EQ(eng.pivot_lower_bound(), 0.0);
}

TEST(SimpleEngine, RandomTreeRunsKeepEveryInvariant) {
  TreeFixture f;
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    PivotEngine<FreeGroupSpace> eng(f.space, EngineFlavor::simple, f.params, f.random_word(rng, 3));
    std::vector<long> prev;
    for (int n = 1; n <= 60; ++n) {
      const auto out = eng.step_simple(f.draw(rng), f.draw(rng), f.random_word(rng, 7));
      const auto now = eng.pivot_times();
      ASSERT_TRUE(subset_of_previous_plus_new(prev, now, n));
      ASSERT_EQ(static_cast<long>(now.size()) - static_cast<long>(prev.size()), out.increment());
      ASSERT_GE(out.distance, static_cast<double>(now.size()));
      prev = now;
    }
    const auto rep = eng.validate();
    ASSERT_TRUE(rep.ok) << rep.violations.front();
  }
}

TEST(SimpleEngine, LaterPositionsStayInAnchorShadow) {
  TreeFixture f;
  std::mt19937_64 rng(3);
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    PivotEngine<FreeGroupSpace> eng(f.space, EngineFlavor::simple, f.params);
    for (int n = 0; n < 20; ++n) eng.step_simple(f.draw(rng), f.draw(rng), f.random_word(rng, 4));
    if (eng.pivots() < 2) continue;
    const std::size_t idx = eng.pivots() / 2;
    const long t = eng.stack()[idx].time;
    const ShadowSpec<Word> spec{Word{}, eng.anchor_point(idx), 2 * f.params.C0};
    for (int n = 0; n < 40; ++n) {
      eng.step_simple(f.draw(rng), f.draw(rng), f.random_word(rng, 4));
      if (eng.pivots() <= idx || eng.stack()[idx].time != t) {
        EXPECT_THROW(eng.anchor_point(eng.pivots()), InputError);
        break;
      }
      ASSERT_TRUE(shadow_contains(f.space, spec, eng.endpoint()));
      ++checked;
    }
  }
  EXPECT_GT(checked, 200);
}

TEST(SimpleEngine, ContractErrors) {
  TreeFixture f;
  EXPECT_THROW(PivotEngine<FreeGroupSpace>(f.space, EngineFlavor::simple, PivotParams{1.0, 20.0}), ContractError);
  PivotEngine<FreeGroupSpace> eng(f.space, EngineFlavor::simple, PivotParams{0.0, 4.0});
  EXPECT_THROW(eng.step_simple(f.S[0], f.S[1], Word{}), ContractError);
  EXPECT_THROW(eng.step_refined(f.S[0], f.S[1], Word{}, f.S[0], f.S[1], Word{}), ContractError);
  EXPECT_THROW(eng.anchor_point(0), InputError);
  EXPECT_EQ(eng.pivot_lower_bound(), 0.0);
}

TEST(SimpleEngine, TraceCsv) {
  TreeFixture f;
  PivotEngine<FreeGroupSpace> eng(f.space, EngineFlavor::simple, f.params);
  std::vector<TraceRow> rows;
  for (int n = 0; n < 2; ++n) rows.push_back(trace_row(eng, eng.step_simple(f.S[0], f.S[1], Word{})));
  std::ostringstream os;
  write_trace_csv(os, rows);
  EXPECT_EQ(os.str(), "n,pivots,pivot_times,distance,bound\n1,1,1,6,1\n2,2,1 2,12,2\n");
}

TEST(RefinedEngine, IdentityRhoBehavesLikeSimple) {
  TreeFixture f;
  std::mt19937_64 rng(21);
  PivotEngine<FreeGroupSpace> eng(f.space, EngineFlavor::refined, f.params);
  for (int n = 0; n < 80; ++n) {
    eng.step_refined(f.draw(rng), f.draw(rng), Word{}, f.draw(rng), f.draw(rng), f.random_word(rng, 8));
    ASSERT_EQ(eng.pivot_lower_bound(), 0.0);
  }
  const auto rep = eng.validate();
  EXPECT_TRUE(rep.ok) << (rep.ok ? "" : rep.violations.front());
}

TEST(RefinedEngine, RhoSumBoundsDistance) {
  TreeFixture f;
  std::mt19937_64 rng(31);
  int pushes = 0, pops = 0;
  for (int trial = 0; trial < 60; ++trial) {
    PivotEngine<FreeGroupSpace> eng(f.space, EngineFlavor::refined, f.params);
    std::vector<long> prev;
    for (int n = 1; n <= 50; ++n) {
      const Word r = f.random_word(rng, 12);
      const auto out = eng.step_refined(f.draw(rng), f.draw(rng), r, f.draw(rng), f.draw(rng), f.random_word(rng, 20));
      pushes += out.pivotal;
      pops += static_cast<int>(out.popped);
      double sum = 0;
      for (const auto& rec : eng.stack()) sum += rec.rho_jump;
      ASSERT_EQ(eng.pivot_lower_bound(), sum);
      ASSERT_LE(eng.pivot_lower_bound(), static_cast<double>(eng.endpoint().size()));
      ASSERT_TRUE(subset_of_previous_plus_new(prev, eng.pivot_times(), n));
      prev = eng.pivot_times();
    }
    ASSERT_TRUE(eng.validate().ok);
  }
  EXPECT_GT(pushes, 0);
  EXPECT_GT(pops, 0);
}

TEST(RefinedEngine, BacktrackPastOnePivot) {
  TreeFixture f;
  std::mt19937_64 rng(8);
  int exercised = 0;
  for (int trial = 0; trial < 300; ++trial) {
    PivotEngine<FreeGroupSpace> eng(f.space, EngineFlavor::refined, f.params);
    for (int n = 0; n < 10; ++n)
      eng.step_refined(f.draw(rng), f.draw(rng), f.random_word(rng, 5), f.draw(rng), f.draw(rng), Word{});
    if (eng.pivots() < 2) continue;
    const auto before = eng.pivots();
    // land next to the entry point of the top pivot
    const Word a = f.draw(rng), b = f.draw(rng), c = f.draw(rng), d = f.draw(rng);
    Word g = eng.position();
    for (const Word* x : {&a, &b, &c, &d}) g = concat_reduce(g, *x);
    const Word target = concat_reduce(eng.stack().back().entry, f.random_word(rng, 2));
    const auto out = eng.step_refined(a, b, Word{}, c, d, concat_reduce(invert_word(g), target));
    ASSERT_FALSE(out.pivotal);
    ASSERT_GE(out.popped, 1u);
    ASSERT_EQ(eng.pivots(), before - out.popped);
    const auto rep = eng.validate();
    ASSERT_TRUE(rep.ok) << rep.violations.front();
    ++exercised;
  }
  EXPECT_GT(exercised, 10);
}

// ---- hyperbolic plane -------------------------------------------------------

TEST(SimpleEngine, HalfPlaneRevalidationOverThousandSteps) {
  const WideSpace h2;
  using MW = Moebius<Wide>;
  const MW u = convert_moebius<Wide>(Moebius<double>{2, 0, 0, 0.5});
  const MW v = convert_moebius<Wide>(Moebius<double>{1.25, -0.75, -0.75, 1.25});
  const std::vector<MW> S{isometry_power(h2, u, 70), isometry_power(h2, v, 70), isometry_power(h2, u, -70),
                          isometry_power(h2, v, -70)};
  const double D = 20 * 1.0 + 100 * h2.delta() + 1;
  PivotEngine<WideSpace> eng(h2, EngineFlavor::simple, PivotParams{1.0, D});
  std::mt19937_64 rng(4242);
  std::size_t max_stack = 0, total_pops = 0;
  for (int n = 1; n <= 1000; ++n) {
    const MW& a = S[rng() % 4];
    const MW& b = S[rng() % 4];
    const MW gab = h2.compose(h2.compose(eng.position(), a), b);
    MW w = h2.identity();
    const double far = h2.distance(h2.basepoint(), h2.orbit_point(gab));
    // keep the walk inside the working precision: return to o when far out,
    // otherwise sometimes undo the transition
    if (far > 1200) w = h2.inverse(gab);
    else if (rng() % 5 == 0) w = h2.inverse(h2.compose(a, b));
    const auto out = eng.step_simple(a, b, w);
    total_pops += out.popped;
    max_stack = std::max(max_stack, eng.pivots());
    const auto rep = eng.validate();
    ASSERT_TRUE(rep.ok) << "step " << n << ": " << rep.violations.front();
    ASSERT_GE(out.distance, eng.pivot_lower_bound() - 1e-9);
  }
  EXPECT_GE(max_stack, 4u);
  EXPECT_GT(total_pops, 0u);
}
