#include <iomanip>
#include <sstream>

#include "pivotwalk/pivotal.hpp"

namespace pivotwalk {

FreePivotState::FreePivotState(int rank) : rank_(rank) {
  if (rank < 1) throw InputError("free group rank must be positive");
}

StepOutcome FreePivotState::step(Letter s, const Word& w) {
  if (w.empty()) throw InputError("free pivot step needs a nontrivial word w");
  if (s.generator_index() >= rank_) throw InputError("letter outside the alphabet");
  for (Letter l : w.letters())
    if (l.generator_index() >= rank_) throw InputError("word uses letters outside the alphabet");

  const Word zs = concat_reduce(current_, Word::letter(s));
  const Word zsw = concat_reduce(zs, w);

  StepOutcome out;
  out.n = ++time_;
  // the path never returns above a surviving guard, so hits are a top segment of the stack
  std::size_t keep = stack_.size();
  for (std::size_t i = 0; i < stack_.size(); ++i) {
    const Word& g = stack_[i].guard;
    if (on_geodesic(current_, zs, g) || on_geodesic(zs, zsw, g)) {
      keep = i;
      break;
    }
  }
  out.popped = stack_.size() - keep;
  stack_.resize(keep);

  const bool local = (current_.empty() || s != current_.back().inverse()) && w.front() != s.inverse();
  if (local) {
    stack_.push_back({time_, zs});
    out.pivotal = true;
  }
  current_ = zsw;
  out.pivots = stack_.size();
  out.distance = static_cast<double>(current_.size());
  out.bound = static_cast<double>(stack_.size());
  return out;
}

std::vector<long> FreePivotState::pivot_times() const {
  std::vector<long> t;
  t.reserve(stack_.size());
  for (const auto& r : stack_) t.push_back(r.time);
  return t;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
  os << "n,pivots,pivot_times,distance,bound\n";
  std::ostringstream line;
  for (const auto& r : rows) {
    line.str({});
    line << r.n << ',' << r.pivots << ',';
    for (std::size_t i = 0; i < r.pivot_times.size(); ++i) line << (i ? " " : "") << r.pivot_times[i];
    line << ',' << std::setprecision(17) << r.distance << ',' << r.bound << '\n';
    os << line.str();
  }
}

}  // namespace pivotwalk
