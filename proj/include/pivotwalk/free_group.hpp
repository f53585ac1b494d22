#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pivotwalk {

// Generator i has code 2i, its inverse 2i+1.
class Letter {
 public:
  constexpr Letter() = default;
  constexpr explicit Letter(std::uint8_t code) : code_(code) {}

  static constexpr Letter generator(int index) { return Letter(static_cast<std::uint8_t>(2 * index)); }

  constexpr std::uint8_t code() const { return code_; }
  constexpr Letter inverse() const { return Letter(static_cast<std::uint8_t>(code_ ^ 1u)); }
  constexpr int generator_index() const { return code_ >> 1; }
  constexpr bool is_inverse_generator() const { return (code_ & 1u) != 0; }

  friend constexpr auto operator<=>(Letter, Letter) = default;

 private:
  std::uint8_t code_ = 0;
};

inline constexpr int kMaxRank = 127;

// Freely reduced word; the empty word is the identity.
class Word {
 public:
  Word() = default;

  // Freely reduces the given letter sequence.
  static Word reduce(std::span<const Letter> letters);
  static Word from_reduced(std::vector<Letter> letters);
  static Word letter(Letter l) { return from_reduced({l}); }

  std::span<const Letter> letters() const { return letters_; }
  std::size_t size() const { return letters_.size(); }
  bool empty() const { return letters_.empty(); }
  Letter operator[](std::size_t i) const { return letters_[i]; }
  Letter front() const { return letters_.front(); }
  Letter back() const { return letters_.back(); }

  // In-place u <- reduce(u v), amortized O(|v|).
  Word& multiply_right(const Word& v);

  friend auto operator<=>(const Word&, const Word&) = default;
  friend bool operator==(const Word&, const Word&) = default;

 private:
  std::vector<Letter> letters_;
};

Word concat_reduce(const Word& u, const Word& v);
Word invert_word(const Word& w);
Word word_power(const Word& w, long k);
std::size_t common_prefix(const Word& u, const Word& v);
long tree_dist(const Word& u, const Word& v);
// True iff v lies on the tree geodesic from p to q.
bool on_geodesic(const Word& p, const Word& q, const Word& v);

// Letters 'a'.. for generators and 'A'.. for inverses when rank <= 26,
// otherwise '.'-separated tokens g<i> / G<i>. The identity prints as "1".
std::string format_word(const Word& w, int rank);
// Also accepts "x^k" powers (k may be negative) and "1" or "" for the identity.
Word parse_word(std::string_view text, int rank);

// Infinite reduced word prefix * period^infinity; a point of the tree boundary.
struct TreeEnd {
  Word prefix;
  Word period;

  Letter at(std::size_t i) const;
};

// Cayley tree of the free group of the given rank, acted on by left multiplication.
class FreeGroupSpace {
 public:
  using Point = Word;
  using Isometry = Word;
  using End = TreeEnd;

  explicit FreeGroupSpace(int rank);

  int rank() const { return rank_; }
  Point basepoint() const { return {}; }
  double delta() const { return 0.0; }
  double distance(const Point& p, const Point& q) const { return static_cast<double>(tree_dist(p, q)); }
  double gromov_product(const Point& x, const Point& z, const Point& base) const;
  Point act(const Isometry& g, const Point& p) const { return concat_reduce(g, p); }
  Isometry compose(const Isometry& g, const Isometry& h) const { return concat_reduce(g, h); }
  Isometry inverse(const Isometry& g) const { return invert_word(g); }
  Isometry identity() const { return {}; }
  Point orbit_point(const Isometry& g) const { return g; }
  bool same(const Isometry& g, const Isometry& h) const { return g == h; }
  bool same_point(const Point& p, const Point& q, double) const { return p == q; }

  // Attracting and repelling ends; every nontrivial element is loxodromic.
  std::optional<std::pair<End, End>> fixed_ends(const Isometry& g) const;
  // Gromov product of two ends at the identity (common prefix length), +inf if equal.
  double end_product(const End& a, const End& b) const;

  std::string format(const Isometry& g) const { return format_word(g, rank_); }
  Isometry parse(std::string_view text) const { return parse_word(text, rank_); }

  std::vector<Letter> alphabet() const;
  // All reduced words of length <= radius, shortest first.
  std::vector<Word> ball(int radius) const;

 private:
  int rank_;
};

}  // namespace pivotwalk
