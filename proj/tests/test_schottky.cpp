#include <gtest/gtest.h>

#include <numbers>

#include "pivotwalk/schottky.hpp"
#include "pivotwalk/wide.hpp"

using namespace pivotwalk;

namespace {

std::vector<Word> all_letters(const FreeGroupSpace& space) {
  std::vector<Word> out;
  for (Letter l : space.alphabet()) out.push_back(Word::from_reduced({l}));
  return out;
}

// First letter of s y for a single letter s, or nullopt when s y = e.
std::optional<Letter> first_of_product(Letter s, const Word& y) {
  if (y.empty() || y[0] != s.inverse()) return s;
  if (y.size() == 1) return std::nullopt;
  return y[1];
}

// (x, s y)_e > 0 exactly when x and s y start with the same letter.
double first_letter_oracle(const std::vector<Word>& ball, const std::vector<Letter>& S) {
  double worst = 0.0;
  for (const Word& x : ball)
    for (const Word& y : ball) {
      if (x.empty()) continue;
      int bad_f = 0, bad_b = 0;
      for (Letter s : S) {
        bad_f += first_of_product(s, y) == x[0];
        bad_b += first_of_product(s.inverse(), y) == x[0];
      }
      worst = std::max(worst, static_cast<double>(std::max(bad_f, bad_b)) / static_cast<double>(S.size()));
    }
  return worst;
}

using M = Moebius<double>;
const M kU{2, 0, 0, 0.5};
// quarter-turn conjugate of kU, fixed points +-1
const M kV{1.25, -0.75, -0.75, 1.25};

}  // namespace

TEST(VerifySchottky, FreeGeneratorsExhaustive) {
  for (int d : {2, 3}) {
    const FreeGroupSpace space(d);
    const auto S = all_letters(space);
    for (int radius : {3, 4}) {
      const ExhaustiveTreeSampler sampler(space, radius);
      const auto rep = verify_schottky(space, S, 0.0, 1.0, sampler);
      EXPECT_DOUBLE_EQ(rep.worst_bad_fraction, first_letter_oracle(space.ball(radius), space.alphabet()));
      EXPECT_LE(rep.worst_bad_fraction, 2.0 / (2 * d));
      EXPECT_TRUE(rep.passes(1.0 / d));
      EXPECT_EQ(rep.translation_min, 1.0);
    }
  }
}

TEST(VerifySchottky, F3GeneratorsAtLengthThree) {
  const FreeGroupSpace space(3);
  const auto rep = verify_schottky(space, all_letters(space), 0.0, 1.0, ExhaustiveTreeSampler(space, 3));
  EXPECT_DOUBLE_EQ(rep.worst_bad_fraction, 1.0 / 3.0);
  ASSERT_FALSE(rep.witnesses.empty());
  const auto& w = rep.witnesses.front();
  EXPECT_EQ(std::max(w.bad_forward.size(), w.bad_inverse.size()), 2u);
}

TEST(VerifySchottky, ElementFixingBasepointFailsTranslation) {
  const FreeGroupSpace space(2);
  const std::vector<Word> S{parse_word("a", 2), Word{}};
  const auto rep = verify_schottky(space, S, 0.0, 1.0, ExhaustiveTreeSampler(space, 2));
  EXPECT_EQ(rep.translation_min, 0.0);
  EXPECT_FALSE(rep.translation_ok());
  EXPECT_FALSE(rep.passes(1.0));
  ASSERT_EQ(rep.short_elements.size(), 1u);
  EXPECT_EQ(rep.short_elements[0], 1u);
}

TEST(VerifySchottky, LargeSlackHasNoBadElements) {
  const HalfPlaneSpace<double> h2;
  const std::vector<M> S{kU, kV};
  StratifiedHalfPlaneSampler<double> sampler({}, 8.0, 2000, 3);
  const auto rep = verify_schottky(h2, S, 1e6, 0.0, sampler);
  EXPECT_EQ(rep.worst_bad_fraction, 0.0);
  EXPECT_TRUE(rep.witnesses.empty());
}

TEST(VerifySchottky, EmptySetIsInputError) {
  const FreeGroupSpace space(2);
  EXPECT_THROW(verify_schottky(space, std::vector<Word>{}, 0.0, 1.0, ExhaustiveTreeSampler(space, 1)), InputError);
}

TEST(VerifySchottky, RequiredCIsTheThreshold) {
  const FreeGroupSpace space(2);
  const std::vector<Word> S{parse_word("aab", 2), parse_word("bba", 2), parse_word("ABB", 2), parse_word("BAA", 2)};
  const ExhaustiveTreeSampler sampler(space, 4);
  const double eta = 0.25;
  const auto rep = verify_schottky(space, S, 0.0, 1.0, sampler, VerifyOptions{eta});
  ASSERT_TRUE(std::isfinite(rep.required_C));
  EXPECT_TRUE(verify_schottky(space, S, rep.required_C, 1.0, sampler).fraction_ok(eta));
  EXPECT_FALSE(verify_schottky(space, S, rep.required_C - 0.5, 1.0, sampler).fraction_ok(eta));
}

// Raising eta or C and lowering D never turns a pass into a failure.
TEST(VerifySchottky, MonotoneInParameters) {
  const HalfPlaneSpace<double> h2;
  std::vector<M> S;
  for (const M& g : {kU, kV}) {
    const M g3 = isometry_power(h2, g, 3);
    S.push_back(g3);
    S.push_back(h2.inverse(g3));
  }
  StratifiedHalfPlaneSampler<double> sampler({BoundaryPoint<double>::finite(1.0)}, 10.0, 3000, 4);
  double prev_fraction = 2.0;
  for (double C : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    const auto rep = verify_schottky(h2, S, C, 4.0, sampler);
    EXPECT_LE(rep.worst_bad_fraction, prev_fraction);
    prev_fraction = rep.worst_bad_fraction;
    for (double eta : {0.25, 0.5, 0.75})
      if (rep.passes(eta)) {
        EXPECT_TRUE(rep.passes(eta + 0.1));
        EXPECT_TRUE(verify_schottky(h2, S, C + 0.5, 3.0, sampler).passes(eta));
      }
  }
}

TEST(VerifySchottky, ThreadCountDoesNotChangeReport) {
  const FreeGroupSpace space(2);
  const std::vector<Word> S{parse_word("aab", 2), parse_word("bba", 2), parse_word("ABB", 2)};
  const ExhaustiveTreeSampler sampler(space, 4);
  const auto one = verify_schottky(space, S, 1.0, 1.0, sampler, VerifyOptions{0.3, 1});
  const auto four = verify_schottky(space, S, 1.0, 1.0, sampler, VerifyOptions{0.3, 4});
  EXPECT_EQ(one.worst_bad_fraction, four.worst_bad_fraction);
  EXPECT_EQ(one.required_C, four.required_C);
  ASSERT_EQ(one.witnesses.size(), four.witnesses.size());
  for (std::size_t i = 0; i < one.witnesses.size(); ++i) {
    EXPECT_EQ(one.witnesses[i].x, four.witnesses[i].x);
    EXPECT_EQ(one.witnesses[i].y, four.witnesses[i].y);
  }
}

TEST(PingPong, HalfPlaneExampleCertifiesOnFreshSample) {
  const HalfPlaneSpace<double> h2;
  const auto set = pingpong_construct(h2, kU, kV, 0.25, 5.0);
  // 2^(1-m) < 1/4 needs m = 4
  EXPECT_EQ(set.construction.m, 4);
  EXPECT_EQ(set.size(), 16u);
  EXPECT_GE(set.translation_min, 5.0);
  EXPECT_NEAR(set.C, set.construction.K + h2.delta(), 1e-12);
  EXPECT_GE(set.construction.K, set.construction.K_min);
  SchottkyLimits fresh;
  const auto sampler = default_sampler(h2, set.elements, fresh, 987654321);
  ASSERT_EQ(sampler.size(), 10000u);
  const auto rep = verify_schottky(h2, set, sampler);
  EXPECT_TRUE(rep.short_elements.empty());
  EXPECT_LE(rep.worst_bad_fraction, set.eta);
}

TEST(PingPong, IdenticalInputsAreInputError) {
  const HalfPlaneSpace<double> h2;
  EXPECT_THROW(pingpong_construct(h2, kU, kU, 0.25, 5.0), InputError);
  EXPECT_THROW(pingpong_construct(h2, kU, h2.inverse(kU), 0.25, 5.0), InputError);
  EXPECT_THROW(pingpong_construct(h2, kU, M{1, 1, 0, 1}, 0.25, 5.0), InputError);
}

TEST(PingPong, TreeGeneratorsGiveExhaustivelyVerifiedPowers) {
  const FreeGroupSpace space(2);
  const auto set = pingpong_construct(space, parse_word("a", 2), parse_word("b", 2), 0.5, 3.0);
  EXPECT_EQ(set.construction.m, 3);
  EXPECT_EQ(set.size(), 8u);
  for (const Word& s : set.elements) EXPECT_GE(s.size(), 3u);
  for (int radius : {4, 5}) {
    const auto rep = verify_schottky(space, set, ExhaustiveTreeSampler(space, radius));
    EXPECT_TRUE(rep.passes(set.eta)) << "radius " << radius;
  }
}

TEST(PingPong, WideBackendReachesLargeD) {
  const WideSpace h2;
  const auto u = convert_moebius<Wide>(kU), v = convert_moebius<Wide>(kV);
  SchottkyLimits limits;
  limits.trials = 2000;
  const auto set = pingpong_construct(h2, u, v, 0.25, 120.0, limits);
  EXPECT_GE(set.translation_min, 120.0);
  const auto rep = verify_schottky(h2, set, default_sampler(h2, set.elements, limits, 77));
  EXPECT_TRUE(rep.passes(set.eta));
}

TEST(FindSchottky, FreeGroupUniformMeasureAtPowerOne) {
  const FreeGroupSpace space(2);
  const auto atoms = all_letters(space);
  const std::vector<std::string> names{"a", "A", "b", "B"};
  const auto [M_total, set] = find_schottky_in_support(space, atoms, names, 0.5, 3.0);
  EXPECT_EQ(M_total, set.construction.n * set.construction.m * set.construction.p);
  // every element is a product of M_total support elements
  for (const Word& s : set.elements) EXPECT_LE(static_cast<long>(s.size()), M_total);
  EXPECT_TRUE(verify_schottky(space, set, ExhaustiveTreeSampler(space, 4)).passes(set.eta));
}

TEST(FindSchottky, ElementarySupportFails) {
  const FreeGroupSpace space(2);
  const std::vector<Word> atoms{parse_word("ab", 2), parse_word("BA", 2)};
  SchottkyLimits limits;
  limits.max_power = 3;
  try {
    find_schottky_in_support(space, atoms, {"g", "G"}, 0.5, 3.0, limits);
    FAIL() << "expected a search failure";
  } catch (const ConstructionError& e) {
    EXPECT_NE(std::string(e.what()).find("deepest power reached 3"), std::string::npos);
  }
}

TEST(FindSchottky, TwoTransvections) {
  const HalfPlaneSpace<double> h2;
  const auto [M_total, set] = find_schottky_in_support(h2, {kU, kV}, {"u", "v"}, 0.25, 5.0);
  EXPECT_GE(M_total, 4);
  EXPECT_EQ(set.expressions.size(), set.size());
  const auto rep = verify_schottky(h2, set, default_sampler(h2, set.elements, SchottkyLimits{}, 55));
  EXPECT_TRUE(rep.passes(set.eta));
}

TEST(SchottkyCertificate, JsonRoundTrip) {
  const FreeGroupSpace tree(2);
  const auto set = pingpong_construct(tree, parse_word("a", 2), parse_word("b", 2), 0.5, 3.0);
  const auto back = schottky_from_json(tree, schottky_to_json(tree, set));
  EXPECT_EQ(back.elements, set.elements);
  EXPECT_EQ(back.C, set.C);
  EXPECT_EQ(back.construction.p, set.construction.p);

  const HalfPlaneSpace<double> h2;
  const auto hset = pingpong_construct(h2, kU, kV, 0.25, 5.0);
  const auto hback = schottky_from_json(h2, schottky_to_json(h2, hset));
  ASSERT_EQ(hback.size(), hset.size());
  for (std::size_t i = 0; i < hset.size(); ++i) EXPECT_TRUE(h2.same(hback.elements[i], hset.elements[i]));

  EXPECT_THROW(schottky_from_json(h2, schottky_to_json(tree, set)), InputError);
  EXPECT_THROW(schottky_from_json(tree, nlohmann::json{{"type", "schottky-set"}}), InputError);
}
