#include "pivotwalk/free_group.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <limits>

#include "pivotwalk/errors.hpp"

namespace pivotwalk {

Word Word::reduce(std::span<const Letter> letters) {
  std::vector<Letter> out;
  out.reserve(letters.size());
  for (Letter l : letters) {
    if (!out.empty() && out.back() == l.inverse()) {
      out.pop_back();
    } else {
      out.push_back(l);
    }
  }
  return from_reduced(std::move(out));
}

Word Word::from_reduced(std::vector<Letter> letters) {
  Word w;
  w.letters_ = std::move(letters);
  return w;
}

Word concat_reduce(const Word& u, const Word& v) {
  const auto a = u.letters();
  const auto b = v.letters();
  std::size_t k = 0;
  const std::size_t limit = std::min(a.size(), b.size());
  while (k < limit && a[a.size() - 1 - k] == b[k].inverse()) ++k;
  std::vector<Letter> out;
  out.reserve(a.size() + b.size() - 2 * k);
  out.insert(out.end(), a.begin(), a.end() - static_cast<std::ptrdiff_t>(k));
  out.insert(out.end(), b.begin() + static_cast<std::ptrdiff_t>(k), b.end());
  return Word::from_reduced(std::move(out));
}

Word& Word::multiply_right(const Word& v) {
  std::size_t k = 0;
  while (k < v.size() && !letters_.empty() && letters_.back() == v[k].inverse()) {
    letters_.pop_back();
    ++k;
  }
  letters_.insert(letters_.end(), v.letters_.begin() + static_cast<std::ptrdiff_t>(k), v.letters_.end());
  return *this;
}

Word invert_word(const Word& w) {
  std::vector<Letter> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[w.size() - 1 - i] = w[i].inverse();
  return Word::from_reduced(std::move(out));
}

Word word_power(const Word& w, long k) {
  const Word base = k < 0 ? invert_word(w) : w;
  Word out;
  for (long i = 0; i < std::labs(k); ++i) out = concat_reduce(out, base);
  return out;
}

std::size_t common_prefix(const Word& u, const Word& v) {
  const auto a = u.letters();
  const auto b = v.letters();
  const std::size_t n = std::min(a.size(), b.size());
  const auto mm = std::mismatch(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(n), b.begin());
  return static_cast<std::size_t>(mm.first - a.begin());
}

long tree_dist(const Word& u, const Word& v) {
  const std::size_t p = common_prefix(u, v);
  return static_cast<long>(u.size() + v.size() - 2 * p);
}

bool on_geodesic(const Word& p, const Word& q, const Word& v) {
  return tree_dist(p, v) + tree_dist(v, q) == tree_dist(p, q);
}

namespace {

void append_power(std::vector<Letter>& out, Letter l, long k) {
  const Letter base = k < 0 ? l.inverse() : l;
  for (long i = 0; i < std::labs(k); ++i) out.push_back(base);
}

long parse_exponent(std::string_view text, std::size_t& pos) {
  static constexpr std::string_view kSuperInverse = "⁻¹";  // superscript minus one
  if (text.substr(pos, kSuperInverse.size()) == kSuperInverse) {
    pos += kSuperInverse.size();
    return -1;
  }
  if (pos >= text.size() || text[pos] != '^') return 1;
  ++pos;
  long value = 0;
  const char* first = text.data() + pos;
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{}) throw InputError("bad exponent in word: " + std::string(text));
  pos = static_cast<std::size_t>(ptr - text.data());
  return value;
}

}  // namespace

std::string format_word(const Word& w, int rank) {
  if (w.empty()) return "1";
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Letter l = w[i];
    if (rank <= 26) {
      const char base = l.is_inverse_generator() ? 'A' : 'a';
      out.push_back(static_cast<char>(base + l.generator_index()));
    } else {
      if (i) out.push_back('.');
      out.push_back(l.is_inverse_generator() ? 'G' : 'g');
      out += std::to_string(l.generator_index());
    }
  }
  return out;
}

Word parse_word(std::string_view text, int rank) {
  std::vector<Letter> raw;
  std::size_t pos = 0;
  auto check = [&](int index) {
    if (index < 0 || index >= rank) throw InputError("letter outside rank in word: " + std::string(text));
  };
  while (pos < text.size()) {
    const char ch = text[pos];
    if (std::isspace(static_cast<unsigned char>(ch)) || ch == '.') {
      ++pos;
      continue;
    }
    if (ch == '1') {
      ++pos;
      continue;
    }
    Letter l;
    if (rank <= 26) {
      if (ch >= 'a' && ch <= 'z') {
        check(ch - 'a');
        l = Letter::generator(ch - 'a');
      } else if (ch >= 'A' && ch <= 'Z') {
        check(ch - 'A');
        l = Letter::generator(ch - 'A').inverse();
      } else {
        throw InputError("unexpected character in word: " + std::string(text));
      }
      ++pos;
    } else {
      if (ch != 'g' && ch != 'G') throw InputError("expected g<i> or G<i> token in word: " + std::string(text));
      ++pos;
      int index = 0;
      const auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), index);
      if (ec != std::errc{}) throw InputError("bad generator index in word: " + std::string(text));
      pos = static_cast<std::size_t>(ptr - text.data());
      check(index);
      l = Letter::generator(index);
      if (ch == 'G') l = l.inverse();
    }
    append_power(raw, l, parse_exponent(text, pos));
  }
  return Word::reduce(raw);
}

Letter TreeEnd::at(std::size_t i) const {
  if (i < prefix.size()) return prefix[i];
  return period[(i - prefix.size()) % period.size()];
}

FreeGroupSpace::FreeGroupSpace(int rank) : rank_(rank) {
  if (rank < 1 || rank > kMaxRank) throw InputError("free group rank must be in [1, 127]");
}

double FreeGroupSpace::gromov_product(const Point& x, const Point& z, const Point& base) const {
  const long dxy = tree_dist(x, base);
  const long dyz = tree_dist(base, z);
  const long dxz = tree_dist(x, z);
  return static_cast<double>(dxy + dyz - dxz) / 2.0;
}

std::optional<std::pair<TreeEnd, TreeEnd>> FreeGroupSpace::fixed_ends(const Isometry& g) const {
  if (g.empty()) return std::nullopt;
  const std::size_t n = g.size();
  std::size_t k = 0;
  while (2 * k + 1 < n && g[k] == g[n - 1 - k].inverse()) ++k;
  const auto letters = g.letters();
  std::vector<Letter> conj(letters.begin(), letters.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<Letter> core(letters.begin() + static_cast<std::ptrdiff_t>(k),
                           letters.end() - static_cast<std::ptrdiff_t>(k));
  const Word t = Word::from_reduced(conj);
  const Word r = Word::from_reduced(core);
  return std::make_pair(TreeEnd{t, r}, TreeEnd{t, invert_word(r)});
}

double FreeGroupSpace::end_product(const End& a, const End& b) const {
  // Two eventually periodic sequences agreeing this far agree forever.
  const std::size_t bound = std::max(a.prefix.size(), b.prefix.size()) + a.period.size() + b.period.size();
  for (std::size_t i = 0; i < bound; ++i) {
    if (a.at(i) != b.at(i)) return static_cast<double>(i);
  }
  return std::numeric_limits<double>::infinity();
}

std::vector<Letter> FreeGroupSpace::alphabet() const {
  std::vector<Letter> out;
  for (int i = 0; i < 2 * rank_; ++i) out.emplace_back(static_cast<std::uint8_t>(i));
  return out;
}

std::vector<Word> FreeGroupSpace::ball(int radius) const {
  std::vector<Word> out{Word{}};
  std::size_t layer_begin = 0;
  for (int len = 1; len <= radius; ++len) {
    const std::size_t layer_end = out.size();
    for (std::size_t i = layer_begin; i < layer_end; ++i) {
      const Word w = out[i];
      for (Letter l : alphabet()) {
        if (!w.empty() && w.back() == l.inverse()) continue;
        std::vector<Letter> next(w.letters().begin(), w.letters().end());
        next.push_back(l);
        out.push_back(Word::from_reduced(std::move(next)));
      }
    }
    layer_begin = layer_end;
  }
  return out;
}

}  // namespace pivotwalk
