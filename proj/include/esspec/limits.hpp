#pragma once

#include <functional>
#include <limits>

namespace esspec {

// ---------------------------------------------------------------------------
// Boundary limits by Richardson extrapolation
// ---------------------------------------------------------------------------
//
// Values f(t) are sampled on a geometric schedule t_k = beta - h0 q^k
// approaching the singular endpoint and extrapolated through the classical
// tableau
//
//   T[k][j] = (T[k][j-1] - q^j T[k-1][j-1]) / (1 - q^j),
//
// which removes the h, h^2, ... error terms of any asymptotic expansion in
// h = beta - t.  The reported value is the tableau diagonal entry with the
// smallest step-to-step change, so deep levels polluted by roundoff are
// passed over automatically; err is that change.  For beta = +infinity the
// schedule is geometric in s = 1/t and the same tableau applies.

struct LimitOptions {
  double h0 = 0.0;   // initial offset from beta; 0 = auto ((beta - alpha) / 8)
  double q = 0.5;    // schedule ratio in (0, 1)
  int levels = 12;
  double diverge_threshold = 1e12;
};

enum class LimitStatus { ok, diverged, oscillatory };

const char* limit_status_name(LimitStatus s);

struct LimitResult {
  LimitStatus status = LimitStatus::ok;
  double value = 0.0;  // extrapolated limit when ok, deepest raw value otherwise
  double err = std::numeric_limits<double>::infinity();
  int level = 0;       // tableau diagonal chosen
};

LimitResult limit_extrapolate(const std::function<double(double)>& f,
                              double alpha, double beta,
                              const LimitOptions& opt = {});

// Deep geometric growth probe toward beta, for divergence classification
// only (no extrapolation accuracy needed).  `diverges` is set when |f|
// grows monotonically into the threshold or keeps growing geometrically;
// `sign` is the sign of f at the deepest node and `exponent` the fitted
// slope of log |f| against log(beta - t) (or log(1/t) for beta = inf).
struct GrowthProbe {
  bool diverges = false;
  int sign = 0;
  double exponent = 0.0;
};

GrowthProbe growth_probe(const std::function<double(double)>& f, double alpha,
                         double beta, double threshold = 1e12,
                         int levels = 26);

// The sample schedule shared by the routines above (exposed for callers
// that align their own probes with the extrapolation nodes).
std::vector<double> limit_nodes(double alpha, double beta,
                                const LimitOptions& opt);

}  // namespace esspec
