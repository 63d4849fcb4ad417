#pragma once

#include <cmath>
#include <limits>
#include <vector>

namespace esspec {

// A closed interval of the real line; endpoints may be +-infinity for rays.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool degenerate() const { return lo == hi; }
};

// Sorted union of disjoint closed intervals.  Inserting keeps the invariant:
// intervals whose gap is below the merge tolerance coalesce, so spectra
// assembled from many nearby pieces come out as clean bands.
class IntervalSet {
 public:
  // Tolerance under which two endpoints count as touching.
  static double merge_tol(double endpoint) {
    return 1e-9 * (1.0 + std::abs(endpoint));
  }

  void insert(double lo, double hi);
  void insert(const Interval& iv) { insert(iv.lo, iv.hi); }
  void insert_point(double x) { insert(x, x); }

  bool empty() const { return iv_.empty(); }
  std::size_t size() const { return iv_.size(); }
  const Interval& operator[](std::size_t i) const { return iv_[i]; }
  const std::vector<Interval>& intervals() const { return iv_; }

  bool contains(double x, double tol = 0.0) const;

  // Distance from x to the set (0 inside); +inf for the empty set.
  double distance(double x) const;

  double inf() const {
    return iv_.empty() ? std::numeric_limits<double>::infinity() : iv_.front().lo;
  }
  double sup() const {
    return iv_.empty() ? -std::numeric_limits<double>::infinity() : iv_.back().hi;
  }

  // sup |x| over the set; 0 for the empty set, +inf when a ray is present.
  double sup_abs() const;
  bool unbounded() const;

  // Union of two sets under the same merge rule.
  static IntervalSet merge(const IntervalSet& a, const IntervalSet& b);

 private:
  std::vector<Interval> iv_;
};

}  // namespace esspec
