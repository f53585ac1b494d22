#include <gtest/gtest.h>

#include <random>

#include "pivotwalk/free_group.hpp"

using namespace pivotwalk;

namespace {

// Independent reduction: rescan for adjacent inverse pairs until none remain.
std::vector<Letter> naive_reduce(std::vector<Letter> w) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      if (w[i + 1] == w[i].inverse()) {
        w.erase(w.begin() + static_cast<std::ptrdiff_t>(i), w.begin() + static_cast<std::ptrdiff_t>(i) + 2);
        changed = true;
        break;
      }
    }
  }
  return w;
}

Word random_word(std::mt19937_64& rng, int rank, int max_len) {
  std::uniform_int_distribution<int> len(0, max_len);
  std::uniform_int_distribution<int> code(0, 2 * rank - 1);
  std::vector<Letter> raw;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) raw.emplace_back(static_cast<std::uint8_t>(code(rng)));
  return Word::reduce(raw);
}

bool is_reduced(const Word& w) {
  for (std::size_t i = 0; i + 1 < w.size(); ++i)
    if (w[i + 1] == w[i].inverse()) return false;
  return true;
}

Word w(const char* s) { return parse_word(s, 3); }

}  // namespace

TEST(Letter, InverseIsFixedPointFreeInvolution) {
  for (int c = 0; c < 2 * kMaxRank; ++c) {
    const Letter l(static_cast<std::uint8_t>(c));
    EXPECT_NE(l.inverse(), l);
    EXPECT_EQ(l.inverse().inverse(), l);
  }
}

TEST(ConcatReduce, FullCancellation) { EXPECT_TRUE(concat_reduce(w("a"), w("A")).empty()); }

TEST(ConcatReduce, OneCancellationStep) { EXPECT_EQ(concat_reduce(w("ab"), w("Bc")), w("ac")); }

TEST(ConcatReduce, SuperscriptInverseNotation) { EXPECT_EQ(parse_word("ab⁻¹", 2), parse_word("aB", 2)); }

TEST(ConcatReduce, MatchesNaiveCancellationOracle) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 10000; ++t) {
    const Word u = random_word(rng, 2, 12);
    const Word v = random_word(rng, 2, 12);
    std::vector<Letter> joined(u.letters().begin(), u.letters().end());
    joined.insert(joined.end(), v.letters().begin(), v.letters().end());
    const Word got = concat_reduce(u, v);
    const auto expect = naive_reduce(joined);
    ASSERT_TRUE(std::equal(got.letters().begin(), got.letters().end(), expect.begin(), expect.end()));
    ASSERT_TRUE(is_reduced(got));
    ASSERT_LE(got.size(), u.size() + v.size());
  }
}

TEST(ConcatReduce, IdentityIsNeutral) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 1000; ++t) {
    const Word u = random_word(rng, 3, 20);
    EXPECT_EQ(concat_reduce(u, Word{}), u);
    EXPECT_EQ(concat_reduce(Word{}, u), u);
  }
}

TEST(InvertWord, Examples) {
  EXPECT_TRUE(invert_word(Word{}).empty());
  EXPECT_EQ(invert_word(w("ab")), w("BA"));
}

TEST(InvertWord, ProductWithInverseIsIdentity) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 1000; ++t) {
    const Word u = random_word(rng, 3, 20);
    EXPECT_TRUE(concat_reduce(u, invert_word(u)).empty());
    EXPECT_TRUE(concat_reduce(invert_word(u), u).empty());
  }
}

TEST(TreeDist, Examples) {
  EXPECT_EQ(tree_dist(Word{}, w("ab")), 2);
  EXPECT_EQ(tree_dist(w("a"), w("b")), 2);
}

TEST(TreeDist, EqualsLengthOfQuotient) {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 5000; ++t) {
    const Word u = random_word(rng, 2, 15);
    const Word v = random_word(rng, 2, 15);
    EXPECT_EQ(tree_dist(u, v), static_cast<long>(concat_reduce(invert_word(u), v).size()));
    EXPECT_EQ(tree_dist(u, v), tree_dist(v, u));
  }
}

TEST(TreeDist, LeftMultiplicationIsAnIsometry) {
  std::mt19937_64 rng(15);
  for (int t = 0; t < 5000; ++t) {
    const Word g = random_word(rng, 2, 10);
    const Word u = random_word(rng, 2, 10);
    const Word v = random_word(rng, 2, 10);
    EXPECT_EQ(tree_dist(concat_reduce(g, u), concat_reduce(g, v)), tree_dist(u, v));
  }
}

// Every base point can be moved to the identity by an isometry, so checking the
// four-point condition at base e over all x, y, z in the ball covers the ball.
TEST(TreeDist, FourPointConditionExhaustiveLengthSix) {
  const FreeGroupSpace space(2);
  const auto words = space.ball(6);
  const std::size_t n = words.size();
  ASSERT_EQ(n, 1457u);
  std::vector<std::uint8_t> prod(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const long d = tree_dist(words[i], words[j]);
      const long twice = static_cast<long>(words[i].size() + words[j].size()) - d;
      ASSERT_EQ(twice % 2, 0);
      prod[i * n + j] = static_cast<std::uint8_t>(twice / 2);
    }
  std::size_t violations = 0;
  for (std::size_t x = 0; x < n; ++x) {
    const std::uint8_t* px = &prod[x * n];
    for (std::size_t z = 0; z < n; ++z) {
      const std::uint8_t* pz = &prod[z * n];
      const std::uint8_t xz = px[z];
      for (std::size_t y = 0; y < n; ++y) violations += std::min(px[y], pz[y]) > xz;
    }
  }
  EXPECT_EQ(violations, 0u);
}

TEST(TreeDist, FourPointConditionRandomBases) {
  const FreeGroupSpace space(3);
  std::mt19937_64 rng(16);
  for (int t = 0; t < 20000; ++t) {
    const Word a = random_word(rng, 3, 12), x = random_word(rng, 3, 12);
    const Word y = random_word(rng, 3, 12), z = random_word(rng, 3, 12);
    EXPECT_GE(space.gromov_product(x, z, a),
              std::min(space.gromov_product(x, y, a), space.gromov_product(y, z, a)));
  }
}

TEST(Word, ParseAndFormatRoundTrip) {
  std::mt19937_64 rng(17);
  for (int rank : {2, 5, 40}) {
    for (int t = 0; t < 200; ++t) {
      const Word u = random_word(rng, rank, 10);
      EXPECT_EQ(parse_word(format_word(u, rank), rank), u);
    }
  }
  EXPECT_EQ(format_word(Word{}, 2), "1");
  EXPECT_EQ(parse_word("a^3B^-2", 2), parse_word("aaabb", 2));
  EXPECT_THROW(parse_word("c", 2), std::exception);
}

TEST(FreeGroupSpace, FixedEndsOfConjugate) {
  const FreeGroupSpace space(2);
  // g = b a b^-1 moves along the axis through b with period a
  const auto ends = space.fixed_ends(parse_word("baB", 2));
  ASSERT_TRUE(ends.has_value());
  EXPECT_EQ(ends->first.prefix, parse_word("b", 2));
  EXPECT_EQ(ends->first.period, parse_word("a", 2));
  EXPECT_EQ(ends->second.period, parse_word("A", 2));
  EXPECT_EQ(space.end_product(ends->first, ends->second), 1.0);
  EXPECT_FALSE(space.fixed_ends(Word{}).has_value());
}

TEST(FreeGroupSpace, CommutingElementsShareEnds) {
  const FreeGroupSpace space(2);
  const auto e1 = space.fixed_ends(parse_word("ab", 2));
  const auto e2 = space.fixed_ends(parse_word("abab", 2));
  const auto e3 = space.fixed_ends(parse_word("ba", 2));
  EXPECT_TRUE(std::isinf(space.end_product(e1->first, e2->first)));
  EXPECT_FALSE(std::isinf(space.end_product(e1->first, e3->first)));
}

TEST(FreeGroupSpace, OrbitIteratesApproachAttractingEnd) {
  const FreeGroupSpace space(2);
  const Word g = parse_word("bAbba", 2);
  const auto ends = space.fixed_ends(g);
  Word p;
  for (int k = 1; k <= 6; ++k) {
    p = space.act(g, p);
    std::size_t agree = 0;
    while (agree < p.size() && p[agree] == ends->first.at(agree)) ++agree;
    EXPECT_GE(agree + 5, p.size());
  }
}
