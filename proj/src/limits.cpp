#include "esspec/limits.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "esspec/errors.hpp"

namespace esspec {

const char* limit_status_name(LimitStatus s) {
  switch (s) {
    case LimitStatus::ok: return "ok";
    case LimitStatus::diverged: return "diverged";
    case LimitStatus::oscillatory: return "oscillatory";
  }
  return "?";
}

std::vector<double> limit_nodes(double alpha, double beta,
                                const LimitOptions& opt) {
  if (!(opt.q > 0.0 && opt.q < 1.0))
    throw NumericError("extrapolation ratio must lie in (0, 1)");
  if (opt.levels < 3) throw NumericError("extrapolation needs >= 3 levels");
  std::vector<double> ts(opt.levels);
  if (std::isfinite(beta)) {
    double h0 = opt.h0 > 0.0 ? opt.h0 : (beta - alpha) / 8.0;
    h0 = std::min(h0, (beta - alpha) / 2.0);
    double h = h0;
    for (int k = 0; k < opt.levels; ++k, h *= opt.q) ts[k] = beta - h;
  } else {
    // approach infinity on a schedule geometric in s = 1/t
    double t0 = std::max(8.0, alpha + 8.0);
    double t = t0;
    for (int k = 0; k < opt.levels; ++k, t /= opt.q) ts[k] = t;
  }
  return ts;
}

namespace {

// Raw-value divergence tests: through the ceiling with a rising tail, or
// sustained geometric growth (a converging sequence has step ratios -> 1).
bool looks_divergent(const std::vector<double>& f, double threshold) {
  std::size_t n = f.size();
  auto rising = [&](std::size_t count) {
    if (n < count) return false;
    for (std::size_t i = n - count + 1; i < n; ++i)
      if (!(std::abs(f[i]) > std::abs(f[i - 1]))) return false;
    return true;
  };
  if (rising(3) && std::abs(f.back()) > threshold) return true;
  if (rising(5)) {
    bool geometric = true;
    for (std::size_t i = n - 3; i < n; ++i)
      if (!(std::abs(f[i]) >= 1.3 * std::abs(f[i - 1]))) geometric = false;
    if (geometric) return true;
  }
  return false;
}

}  // namespace

LimitResult limit_extrapolate(const std::function<double(double)>& f,
                              double alpha, double beta,
                              const LimitOptions& opt) {
  std::vector<double> ts = limit_nodes(alpha, beta, opt);
  std::vector<double> raw;
  raw.reserve(ts.size());
  for (double t : ts) {
    double v = f(t);
    if (!std::isfinite(v)) {
      LimitResult r;
      r.status = LimitStatus::diverged;
      r.value = raw.empty() ? v : raw.back();
      return r;
    }
    raw.push_back(v);
    if (looks_divergent(raw, opt.diverge_threshold)) {
      LimitResult r;
      r.status = LimitStatus::diverged;
      r.value = raw.back();
      return r;
    }
  }

  // Richardson tableau over the geometric schedule.
  int n = static_cast<int>(raw.size());
  std::vector<std::vector<double>> T(n);
  std::vector<double> diag(n);
  for (int k = 0; k < n; ++k) {
    T[k].resize(k + 1);
    T[k][0] = raw[k];
    double qj = 1.0;
    for (int j = 1; j <= k; ++j) {
      qj *= opt.q;
      T[k][j] = (T[k][j - 1] - qj * T[k - 1][j - 1]) / (1.0 - qj);
    }
    diag[k] = T[k][k];
  }

  LimitResult r;
  r.level = 1;
  for (int k = 1; k < n; ++k) {
    double e = std::abs(diag[k] - diag[k - 1]);
    if (e < r.err) {
      r.err = e;
      r.value = diag[k];
      r.level = k;
    }
  }

  // Convergent samples have raw step differences that keep shrinking; a
  // bounded oscillation keeps them at the same size (and lets the tableau
  // extrapolate to values outside the sampled range).  Compare the head
  // and tail of the difference sequence, with a fast path for sequences
  // already converged to roundoff.
  double max_raw = 0.0;
  for (double v : raw) max_raw = std::max(max_raw, std::abs(v));
  double scale = 1.0 + std::max(std::abs(r.value), max_raw);
  if (r.err <= 1e-9 * scale) return r;

  std::vector<double> d(n - 1);
  for (int k = 1; k < n; ++k) d[k - 1] = std::abs(raw[k] - raw[k - 1]);
  auto median3 = [](double a, double b, double c) {
    return std::max(std::min(a, b), std::min(std::max(a, b), c));
  };
  if (d.size() >= 6) {
    double head = median3(d[0], d[1], d[2]);
    double tail = median3(d[d.size() - 3], d[d.size() - 2], d[d.size() - 1]);
    if (tail > 0.3 * head && r.err > 1e-6 * scale) {
      r.status = LimitStatus::oscillatory;
      return r;
    }
  }
  if (r.err > 0.05 * scale) r.status = LimitStatus::oscillatory;
  return r;
}

GrowthProbe growth_probe(const std::function<double(double)>& f, double alpha,
                         double beta, double threshold, int levels) {
  LimitOptions opt;
  opt.levels = levels;
  std::vector<double> ts = limit_nodes(alpha, beta, opt);
  std::vector<double> raw;
  GrowthProbe g;
  for (double t : ts) {
    double v = f(t);
    if (!std::isfinite(v)) {  // blew past double range: certainly divergent
      g.diverges = true;
      break;
    }
    raw.push_back(v);
    if (looks_divergent(raw, threshold)) {
      g.diverges = true;
      break;
    }
  }
  if (raw.empty()) return g;
  g.sign = raw.back() > 0.0 ? 1 : (raw.back() < 0.0 ? -1 : 0);

  // slope of log|f| against log h over the deepest usable nodes
  int used = 0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int first = std::max(0, static_cast<int>(raw.size()) - 8);
  for (int k = first; k < static_cast<int>(raw.size()); ++k) {
    if (raw[k] == 0.0) continue;
    double h = std::isfinite(beta) ? beta - ts[k] : 1.0 / ts[k];
    double x = std::log(h), y = std::log(std::abs(raw[k]));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++used;
  }
  if (used >= 2 && sxx * used - sx * sx > 0.0)
    g.exponent = (sxy * used - sx * sy) / (sxx * used - sx * sx);
  return g;
}

}  // namespace esspec
