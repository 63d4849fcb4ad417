#include "esspec/intervals.hpp"

#include <algorithm>

namespace esspec {

void IntervalSet::insert(double lo, double hi) {
  if (std::isnan(lo) || std::isnan(hi)) return;
  if (hi < lo) std::swap(lo, hi);
  Interval nv{lo, hi};
  std::vector<Interval> out;
  out.reserve(iv_.size() + 1);
  bool placed = false;
  for (const Interval& iv : iv_) {
    if (iv.hi < nv.lo - merge_tol(nv.lo)) {
      out.push_back(iv);  // entirely left of the new interval
    } else if (iv.lo > nv.hi + merge_tol(nv.hi)) {
      if (!placed) {
        out.push_back(nv);
        placed = true;
      }
      out.push_back(iv);
    } else {  // touching or overlapping: absorb
      nv.lo = std::min(nv.lo, iv.lo);
      nv.hi = std::max(nv.hi, iv.hi);
    }
  }
  if (!placed) out.push_back(nv);
  iv_ = std::move(out);
}

bool IntervalSet::contains(double x, double tol) const {
  for (const Interval& iv : iv_)
    if (x >= iv.lo - tol && x <= iv.hi + tol) return true;
  return false;
}

double IntervalSet::distance(double x) const {
  double d = std::numeric_limits<double>::infinity();
  for (const Interval& iv : iv_) {
    if (x >= iv.lo && x <= iv.hi) return 0.0;
    d = std::min(d, std::min(std::abs(x - iv.lo), std::abs(x - iv.hi)));
  }
  return d;
}

double IntervalSet::sup_abs() const {
  double m = 0.0;
  for (const Interval& iv : iv_)
    m = std::max(m, std::max(std::abs(iv.lo), std::abs(iv.hi)));
  return m;
}

bool IntervalSet::unbounded() const {
  return !iv_.empty() && (std::isinf(iv_.front().lo) || std::isinf(iv_.back().hi));
}

IntervalSet IntervalSet::merge(const IntervalSet& a, const IntervalSet& b) {
  IntervalSet out = a;
  for (const Interval& iv : b.intervals()) out.insert(iv);
  return out;
}

}  // namespace esspec
