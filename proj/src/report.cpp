#include "esspec/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "esspec/asymptotics.hpp"
#include "esspec/errors.hpp"
#include "esspec/expr.hpp"

namespace esspec {

std::string json_number(double v) {
  if (std::isnan(v)) return "\"nan\"";
  if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

using nlohmann::json;

// --- JSON writing ------------------------------------------------------------
//
// The report layout is fixed: keys in a set order, two-space indentation,
// numbers through json_number.  A hand-rolled writer keeps full control of
// the bytes, which is what makes reports byte-identical across runs.

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", ch);
          out += buf;
        } else {
          out += ch;
        }
    }
  }
  out += '"';
  return out;
}

class Doc {
 public:
  Doc& begin(char bracket) {
    sep();
    out_ += bracket;
    lv_.push_back({true, false});
    return *this;
  }
  Doc& end(char bracket) {
    const bool empty = lv_.back().first;
    lv_.pop_back();
    if (!empty) {
      out_ += '\n';
      indent();
    }
    out_ += bracket;
    return *this;
  }
  Doc& key(const char* k) {
    sep();
    out_ += quoted(k);
    out_ += ": ";
    lv_.back().after_key = true;
    return *this;
  }
  Doc& raw(const std::string& token) {
    sep();
    out_ += token;
    return *this;
  }
  Doc& num(double v) { return raw(json_number(v)); }
  Doc& integer(long long v) { return raw(std::to_string(v)); }
  Doc& boolean(bool b) { return raw(b ? "true" : "false"); }
  Doc& str(const std::string& s) { return raw(quoted(s)); }
  Doc& null() { return raw("null"); }
  std::string take() {
    out_ += '\n';
    return std::move(out_);
  }

 private:
  struct Level {
    bool first;
    bool after_key;
  };
  void indent() { out_.append(2 * lv_.size(), ' '); }
  void sep() {
    if (lv_.empty()) return;
    Level& l = lv_.back();
    if (l.after_key) {
      l.after_key = false;
      return;
    }
    if (!l.first) out_ += ',';
    l.first = false;
    out_ += '\n';
    indent();
  }
  std::string out_;
  std::vector<Level> lv_;
};

// Compact single-line tokens for the small numeric aggregates, so interval
// lists read as [[0, 4]] instead of one endpoint per line.
std::string pair_token(double a, double b) {
  return "[" + json_number(a) + ", " + json_number(b) + "]";
}

std::string nums_token(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += json_number(v[i]);
  }
  return out + "]";
}

std::string set_token(const IntervalSet& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += pair_token(s[i].lo, s[i].hi);
  }
  return out + "]";
}

void write_strings(Doc& d, const std::vector<std::string>& v) {
  d.begin('[');
  for (const std::string& s : v) d.str(s);
  d.end(']');
}

// --- configuration parsing ----------------------------------------------------

[[noreturn]] void cfg_fail(const std::string& key, const std::string& what) {
  throw ModelError("config error at " + key + ": " + what);
}

std::string join_key(const std::string& prefix, const std::string& k) {
  return prefix.empty() ? k : prefix + "." + k;
}

void expect_object(const json& j, const std::string& key) {
  if (!j.is_object()) cfg_fail(key, "expected an object");
}

void check_keys(const json& obj, const std::string& prefix,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed) known = known || item.key() == k;
    if (!known) cfg_fail(join_key(prefix, item.key()), "unknown key");
  }
}

double get_num(const json& obj, const char* k, double dflt,
               const std::string& prefix) {
  if (!obj.contains(k)) return dflt;
  const json& v = obj.at(k);
  if (!v.is_number()) cfg_fail(join_key(prefix, k), "expected a number");
  return v.get<double>();
}

int get_int(const json& obj, const char* k, int dflt,
            const std::string& prefix) {
  if (!obj.contains(k)) return dflt;
  const json& v = obj.at(k);
  if (!v.is_number_integer()) cfg_fail(join_key(prefix, k), "expected an integer");
  return v.get<int>();
}

bool get_bool(const json& obj, const char* k, bool dflt,
              const std::string& prefix) {
  if (!obj.contains(k)) return dflt;
  const json& v = obj.at(k);
  if (!v.is_boolean()) cfg_fail(join_key(prefix, k), "expected true or false");
  return v.get<bool>();
}

std::string get_str(const json& obj, const char* k, const std::string& dflt,
                    const std::string& prefix) {
  if (!obj.contains(k)) return dflt;
  const json& v = obj.at(k);
  if (!v.is_string()) cfg_fail(join_key(prefix, k), "expected a string");
  return v.get<std::string>();
}

// A number, or the strings "inf" / "-inf" (JSON itself cannot spell them).
double get_extended(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  cfg_fail(key, "expected a number or \"inf\" / \"-inf\"");
}

std::array<std::string, 2> get_entry(const json& v, const std::string& key) {
  if (v.is_string()) return {v.get<std::string>(), "0"};
  if (v.is_array() && v.size() == 2 && v[0].is_string() && v[1].is_string())
    return {v[0].get<std::string>(), v[1].get<std::string>()};
  cfg_fail(key, "expected an expression string or a [re, im] pair of strings");
}

std::vector<std::array<std::string, 2>> get_components(const json& obj,
                                                       const char* k, int dim,
                                                       const std::string& prefix) {
  std::vector<std::array<std::string, 2>> out(
      static_cast<std::size_t>(dim), std::array<std::string, 2>{"0", "0"});
  if (!obj.contains(k)) return out;
  const json& v = obj.at(k);
  const std::string key = join_key(prefix, k);
  if (!v.is_array() || static_cast<int>(v.size()) != dim)
    cfg_fail(key, "expected an array with one entry per component");
  for (int i = 0; i < dim; ++i)
    out[static_cast<std::size_t>(i)] =
        get_entry(v[static_cast<std::size_t>(i)],
                  key + "[" + std::to_string(i) + "]");
  return out;
}

void parse_model(const json& jm, ModelConfig& mc) {
  expect_object(jm, "model");
  check_keys(jm, "model", {"name", "params"});
  if (!jm.contains("name")) cfg_fail("model.name", "required");
  if (!jm.at("name").is_string()) cfg_fail("model.name", "expected a string");
  mc.name = jm.at("name").get<std::string>();

  json jp = json::object();
  if (jm.contains("params")) {
    jp = jm.at("params");
    expect_object(jp, "model.params");
  }
  const std::string pfx = "model.params";

  if (mc.name == "example-a") {
    check_keys(jp, pfx, {"rho", "m", "psi_re", "psi_im", "phi"});
    mc.a.rho = get_str(jp, "rho", mc.a.rho, pfx);
    mc.a.m = get_str(jp, "m", mc.a.m, pfx);
    mc.a.psi_re = get_str(jp, "psi_re", mc.a.psi_re, pfx);
    mc.a.psi_im = get_str(jp, "psi_im", mc.a.psi_im, pfx);
    mc.a.phi = get_str(jp, "phi", mc.a.phi, pfx);
  } else if (mc.name == "example-b") {
    check_keys(jp, pfx,
               {"vartheta", "delta11", "delta22", "delta12_re", "delta12_im",
                "beta1", "beta2", "gamma_re", "gamma_im", "phi"});
    mc.b.vartheta = get_str(jp, "vartheta", mc.b.vartheta, pfx);
    mc.b.delta11 = get_str(jp, "delta11", mc.b.delta11, pfx);
    mc.b.delta22 = get_str(jp, "delta22", mc.b.delta22, pfx);
    mc.b.delta12_re = get_str(jp, "delta12_re", mc.b.delta12_re, pfx);
    mc.b.delta12_im = get_str(jp, "delta12_im", mc.b.delta12_im, pfx);
    mc.b.beta1 = get_str(jp, "beta1", mc.b.beta1, pfx);
    mc.b.beta2 = get_str(jp, "beta2", mc.b.beta2, pfx);
    mc.b.gamma_re = get_str(jp, "gamma_re", mc.b.gamma_re, pfx);
    mc.b.gamma_im = get_str(jp, "gamma_im", mc.b.gamma_im, pfx);
    mc.b.phi = get_str(jp, "phi", mc.b.phi, pfx);
  } else if (mc.name == "stellar") {
    check_keys(jp, pfx,
               {"n_poly", "alpha_n", "Gamma1", "p_c", "rho_c", "l", "t_max",
                "rtol", "atol", "h_max"});
    mc.stellar.n_poly = get_num(jp, "n_poly", mc.stellar.n_poly, pfx);
    mc.stellar.alpha_n = get_num(jp, "alpha_n", mc.stellar.alpha_n, pfx);
    mc.stellar.Gamma1 = get_num(jp, "Gamma1", mc.stellar.Gamma1, pfx);
    mc.stellar.p_c = get_num(jp, "p_c", mc.stellar.p_c, pfx);
    mc.stellar.rho_c = get_num(jp, "rho_c", mc.stellar.rho_c, pfx);
    mc.stellar.l = get_int(jp, "l", mc.stellar.l, pfx);
    mc.lane_emden.t_max = get_num(jp, "t_max", mc.lane_emden.t_max, pfx);
    mc.lane_emden.rtol = get_num(jp, "rtol", mc.lane_emden.rtol, pfx);
    mc.lane_emden.atol = get_num(jp, "atol", mc.lane_emden.atol, pfx);
    mc.lane_emden.h_max = get_num(jp, "h_max", mc.lane_emden.h_max, pfx);
  } else if (mc.name == "custom") {
    check_keys(jp, pfx, {"alpha", "beta", "dim", "p", "q", "b", "c", "D"});
    mc.custom.alpha = get_num(jp, "alpha", mc.custom.alpha, pfx);
    if (jp.contains("beta"))
      mc.custom.beta = get_extended(jp.at("beta"), pfx + ".beta");
    mc.custom.dim = get_int(jp, "dim", mc.custom.dim, pfx);
    if (mc.custom.dim < 1) cfg_fail(pfx + ".dim", "must be at least 1");
    mc.custom.p = get_str(jp, "p", mc.custom.p, pfx);
    mc.custom.q = get_str(jp, "q", mc.custom.q, pfx);
    mc.custom.b = get_components(jp, "b", mc.custom.dim, pfx);
    mc.custom.c = get_components(jp, "c", mc.custom.dim, pfx);
    if (!jp.contains("D")) cfg_fail(pfx + ".D", "required for a custom model");
    const json& jd = jp.at("D");
    if (!jd.is_array() || static_cast<int>(jd.size()) != mc.custom.dim)
      cfg_fail(pfx + ".D", "expected one row per dimension");
    mc.custom.D.clear();
    for (int i = 0; i < mc.custom.dim; ++i) {
      const json& jr = jd[static_cast<std::size_t>(i)];
      const std::string row_key = pfx + ".D[" + std::to_string(i) + "]";
      if (!jr.is_array()) cfg_fail(row_key, "expected an array of entries");
      std::vector<std::array<std::string, 2>> row;
      for (std::size_t j = 0; j < jr.size(); ++j)
        row.push_back(
            get_entry(jr[j], row_key + "[" + std::to_string(j) + "]"));
      mc.custom.D.push_back(std::move(row));
    }
  } else {
    cfg_fail("model.name", "unknown model \"" + mc.name +
                               "\" (expected example-a, example-b, stellar or "
                               "custom)");
  }
}

void check_positive(double v, const char* key) {
  if (!(v > 0.0) || !std::isfinite(v))
    cfg_fail(std::string("tolerances.") + key,
             "must be > 0 (got " + format_double(v) + ")");
}

void check_nonnegative(double v, const char* key) {
  if (!(v >= 0.0) || !std::isfinite(v))
    cfg_fail(std::string("tolerances.") + key,
             "must be >= 0 (got " + format_double(v) + ")");
}

// --- configuration echo --------------------------------------------------------

void write_config_body(Doc& d, const AnalysisConfig& c) {
  d.key("schema").str(kConfigSchema);

  d.key("model").begin('{');
  d.key("name").str(c.model.name);
  d.key("params").begin('{');
  if (c.model.name == "example-a") {
    d.key("rho").str(c.model.a.rho);
    d.key("m").str(c.model.a.m);
    d.key("psi_re").str(c.model.a.psi_re);
    d.key("psi_im").str(c.model.a.psi_im);
    d.key("phi").str(c.model.a.phi);
  } else if (c.model.name == "example-b") {
    d.key("vartheta").str(c.model.b.vartheta);
    d.key("delta11").str(c.model.b.delta11);
    d.key("delta22").str(c.model.b.delta22);
    d.key("delta12_re").str(c.model.b.delta12_re);
    d.key("delta12_im").str(c.model.b.delta12_im);
    d.key("beta1").str(c.model.b.beta1);
    d.key("beta2").str(c.model.b.beta2);
    d.key("gamma_re").str(c.model.b.gamma_re);
    d.key("gamma_im").str(c.model.b.gamma_im);
    d.key("phi").str(c.model.b.phi);
  } else if (c.model.name == "stellar") {
    d.key("n_poly").num(c.model.stellar.n_poly);
    d.key("alpha_n").num(c.model.stellar.alpha_n);
    d.key("Gamma1").num(c.model.stellar.Gamma1);
    d.key("p_c").num(c.model.stellar.p_c);
    d.key("rho_c").num(c.model.stellar.rho_c);
    d.key("l").integer(c.model.stellar.l);
    d.key("t_max").num(c.model.lane_emden.t_max);
    d.key("rtol").num(c.model.lane_emden.rtol);
    d.key("atol").num(c.model.lane_emden.atol);
    d.key("h_max").num(c.model.lane_emden.h_max);
  } else {
    const ExprModel& x = c.model.custom;
    d.key("alpha").num(x.alpha);
    d.key("beta").num(x.beta);
    d.key("dim").integer(x.dim);
    d.key("p").str(x.p);
    d.key("q").str(x.q);
    auto components = [&d](const char* k,
                           const std::vector<std::array<std::string, 2>>& v) {
      d.key(k).begin('[');
      for (const auto& e : v)
        d.raw("[" + quoted(e[0]) + ", " + quoted(e[1]) + "]");
      d.end(']');
    };
    components("b", x.b);
    components("c", x.c);
    d.key("D").begin('[');
    for (const auto& row : x.D) {
      std::string tok = "[";
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (j) tok += ", ";
        tok += "[" + quoted(row[j][0]) + ", " + quoted(row[j][1]) + "]";
      }
      d.raw(tok + "]");
    }
    d.end(']');
  }
  d.end('}');
  d.end('}');

  d.key("window");
  if (c.window[0] == 0.0 && c.window[1] == 0.0)
    d.null();
  else
    d.raw(pair_token(c.window[0], c.window[1]));
  d.key("grid").integer(c.grid);
  d.key("case_probes").integer(c.case_probes);
  d.key("ray_extension").boolean(c.ray_extension);

  d.key("tolerances").begin('{');
  d.key("limit_tol").num(c.limit_tol);
  d.key("eps_class").num(c.eps_class);
  d.key("root_tol").num(c.root_tol);
  d.key("fit_tol").num(c.fit_tol);
  d.key("exclusion_margin").num(c.exclusion_margin);
  d.key("merge_tol").num(c.merge_tol);
  d.end('}');

  d.key("output").begin('{');
  d.key("report").str(c.report_path);
  d.key("plot").str(c.plot_path);
  d.end('}');
}

// --- report body ---------------------------------------------------------------

void write_probe(Doc& d, double lambda, const CaseTag& tag) {
  d.begin('{');
  d.key("lambda").num(lambda);
  d.key("case").str(case_name(tag.kind));
  d.key("pi0_mag").num(tag.pi0_mag);
  d.key("pi1_mag").num(tag.pi1_mag);
  d.key("threshold").num(tag.threshold);
  d.key("detail").str(tag.detail);
  d.end('}');
}

void write_probes(Doc& d, const std::vector<std::pair<double, CaseTag>>& v) {
  d.begin('[');
  for (const auto& p : v) write_probe(d, p.first, p.second);
  d.end(']');
}

void write_lambda_beta(Doc& d, const LambdaBetaD& lb) {
  d.begin('{');
  d.key("finite_limits").raw(nums_token(lb.finite_limits));
  d.key("j0").integer(lb.j0);
  d.key("improper").integer(lb.improper);
  d.key("improper_negative").integer(lb.improper_neg);
  d.key("undecided").boolean(lb.undecided);
  d.end('}');
}

void write_exceptional(Doc& d, const std::vector<ExceptionalPoint>& v) {
  d.begin('[');
  for (const ExceptionalPoint& e : v) {
    d.begin('{');
    d.key("lambda").num(e.lambda);
    d.key("status").str(e.status);
    d.key("analytic_status").str(e.analytic_status);
    d.end('}');
  }
  d.end(']');
}

void write_singular(Doc& d, const SingularSet& s) {
  d.begin('{');
  d.key("intervals").raw(set_token(s.set));
  d.key("left_ray").boolean(s.left_ray);
  d.key("right_ray").boolean(s.right_ray);
  d.key("excluded_overlaps").raw(nums_token(s.excluded_overlaps));
  d.key("warnings");
  write_strings(d, s.warnings);
  d.end('}');
}

void write_weights(Doc& d, const std::vector<std::pair<double, double>>& w) {
  d.begin('[');
  for (const auto& pw : w)
    d.raw("{\"pole\": " + json_number(pw.first) +
          ", \"weight\": " + json_number(pw.second) + "}");
  d.end(']');
}

void write_structure(Doc& d, const StructureCoeffs& s) {
  d.begin('{');
  d.key("f_beta").num(s.f_beta);
  d.key("g_beta").num(s.g_beta);
  d.key("sigma_beta");
  write_weights(d, s.sigma_beta);
  d.key("phi_beta").num(s.phi_beta);
  d.key("psi_beta").num(s.psi_beta);
  d.key("mu_beta");
  write_weights(d, s.mu_beta);
  d.key("h_beta").num(s.h_beta);
  d.key("h_spread").num(s.h_spread);
  d.key("fit_residual").num(s.fit_residual);
  d.key("cross_err").num(s.cross_err);
  d.key("reliable").boolean(s.reliable);
  d.key("warnings");
  write_strings(d, s.warnings);
  d.end('}');
}

void write_class(Doc& d, const StructureClass& c) {
  d.begin('{');
  d.key("branch").str(branch_name(c.branch));
  d.key("compact_bound").integer(c.compact_bound);
  d.key("left_ray").boolean(c.left_ray);
  d.key("right_ray").boolean(c.right_ray);
  d.key("g_beta").num(c.g_beta);
  d.key("g4psi").num(c.g4psi);
  d.key("f_psi").num(c.f_psi);
  d.key("hsum").num(c.hsum);
  d.key("note").str(c.note);
  d.end('}');
}

const char* probe_status_name(Probe::Status s) {
  switch (s) {
    case Probe::Status::pass: return "pass";
    case Probe::Status::fail: return "fail";
    case Probe::Status::inconclusive: return "inconclusive";
  }
  return "?";
}

void write_diagnostics(Doc& d, const DiagnosticsReport& g) {
  d.begin('{');
  d.key("lambda").num(g.lambda);
  d.key("case").str(case_name(g.case_tag.kind));
  d.key("case_detail").str(g.case_tag.detail);
  d.key("s_pi").integer(g.s_pi);
  d.key("s_pi_constant").boolean(g.s_pi_constant);
  d.key("probes").begin('[');
  for (const Probe* p : {&g.v_eta_bounded_below, &g.eta_h2_integrable,
                         &g.phi1_limit, &g.phi2_limit}) {
    d.begin('{');
    d.key("name").str(p->name);
    d.key("observed").num(p->observed);
    d.key("target").num(p->target);
    d.key("status").str(probe_status_name(p->status));
    d.key("note").str(p->note);
    d.end('}');
  }
  d.end(']');
  d.key("branch_growth").begin('[');
  for (const auto& bg : g.branch_growth)
    d.raw("[" + std::to_string(bg.first) + ", " + json_number(bg.second) + "]");
  d.end(']');
  d.end('}');
}

// --- files ---------------------------------------------------------------------

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot open " + path + " for writing");
  out << content;
  out.flush();
  if (!out.good()) throw ModelError("failed while writing " + path);
}

// Extra coalescing pass over a reported set: gaps at or below the configured
// tolerance close.  At the default tolerance this reproduces the built-in
// merge rule, so it only changes anything when the user asks for coarser
// output.
IntervalSet coalesce(const IntervalSet& s, double tol) {
  IntervalSet out;
  const auto& iv = s.intervals();
  std::size_t i = 0;
  while (i < iv.size()) {
    double lo = iv[i].lo;
    double hi = iv[i].hi;
    while (i + 1 < iv.size() &&
           iv[i + 1].lo - hi <= tol * (1.0 + std::abs(hi))) {
      hi = iv[i + 1].hi;
      ++i;
    }
    out.insert(lo, hi);
    ++i;
  }
  return out;
}

}  // namespace

// --- public configuration API ---------------------------------------------------

AnalysisConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what(),
                     e.byte);
  }
  if (!j.is_object())
    throw ModelError("config error at $: the top level must be an object");
  check_keys(j, "", {"schema", "model", "window", "grid", "case_probes",
                     "ray_extension", "tolerances", "output"});

  if (j.contains("schema")) {
    const json& s = j.at("schema");
    if (!s.is_string() || s.get<std::string>() != kConfigSchema)
      cfg_fail("schema", std::string("expected \"") + kConfigSchema + "\"");
  }

  AnalysisConfig c;
  if (!j.contains("model")) cfg_fail("model", "required");
  parse_model(j.at("model"), c.model);

  if (j.contains("window") && !j.at("window").is_null()) {
    const json& w = j.at("window");
    if (!w.is_array() || w.size() != 2 || !w[0].is_number() ||
        !w[1].is_number())
      cfg_fail("window", "expected [lo, hi] with two numbers");
    const double lo = w[0].get<double>();
    const double hi = w[1].get<double>();
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
      cfg_fail("window", "needs finite lo < hi");
    c.window = {lo, hi};
  }

  c.grid = get_int(j, "grid", c.grid, "");
  if (c.grid < 16) cfg_fail("grid", "must be at least 16 points");
  c.case_probes = get_int(j, "case_probes", c.case_probes, "");
  if (c.case_probes < 1) cfg_fail("case_probes", "must be at least 1");
  c.ray_extension = get_bool(j, "ray_extension", c.ray_extension, "");

  if (j.contains("tolerances")) {
    const json& jt = j.at("tolerances");
    expect_object(jt, "tolerances");
    check_keys(jt, "tolerances",
               {"limit_tol", "eps_class", "root_tol", "fit_tol",
                "exclusion_margin", "merge_tol"});
    c.limit_tol = get_num(jt, "limit_tol", c.limit_tol, "tolerances");
    c.eps_class = get_num(jt, "eps_class", c.eps_class, "tolerances");
    c.root_tol = get_num(jt, "root_tol", c.root_tol, "tolerances");
    c.fit_tol = get_num(jt, "fit_tol", c.fit_tol, "tolerances");
    c.exclusion_margin =
        get_num(jt, "exclusion_margin", c.exclusion_margin, "tolerances");
    c.merge_tol = get_num(jt, "merge_tol", c.merge_tol, "tolerances");
  }
  check_positive(c.limit_tol, "limit_tol");
  check_nonnegative(c.eps_class, "eps_class");
  check_positive(c.root_tol, "root_tol");
  check_positive(c.fit_tol, "fit_tol");
  check_nonnegative(c.exclusion_margin, "exclusion_margin");
  check_positive(c.merge_tol, "merge_tol");

  if (j.contains("output")) {
    const json& jo = j.at("output");
    expect_object(jo, "output");
    check_keys(jo, "output", {"report", "plot"});
    c.report_path = get_str(jo, "report", c.report_path, "output");
    c.plot_path = get_str(jo, "plot", c.plot_path, "output");
  }
  return c;
}

AnalysisConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot read config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_json(const AnalysisConfig& c) {
  Doc d;
  d.begin('{');
  write_config_body(d, c);
  d.end('}');
  return d.take();
}

CoefficientModel build_from_config(const AnalysisConfig& c) {
  const ModelConfig& mc = c.model;
  if (mc.name == "example-a") return example_a(mc.a);
  if (mc.name == "example-b") return example_b(mc.b);
  if (mc.name == "stellar") return stellar_model(mc.stellar, mc.lane_emden);
  if (mc.name == "custom") return build_model(mc.custom);
  throw ModelError("unknown model \"" + mc.name + "\"");
}

SingularOptions options_from_config(const AnalysisConfig& c) {
  SingularOptions o;
  o.grid = c.grid;
  o.root_tol = c.root_tol;
  o.exclusion_margin = c.exclusion_margin;
  o.fit_tol = c.fit_tol;
  o.case_probes = c.case_probes;
  o.ray_extension = c.ray_extension;
  o.window = c.window;
  o.asym.limit_tol = c.limit_tol;
  o.asym.eps_class = c.eps_class;
  return o;
}

// --- public report API -----------------------------------------------------------

std::string report_json(const SpectrumReport& rep, const AnalysisConfig& cfg) {
  Doc d;
  d.begin('{');
  d.key("schema").str(kReportSchema);
  d.key("tool_version").str(kToolVersion);
  d.key("config").begin('{');
  write_config_body(d, cfg);
  d.end('}');

  d.key("model").begin('{');
  d.key("name").str(rep.model_name);
  d.key("alpha").num(rep.alpha);
  d.key("beta").num(rep.beta);
  d.key("dim").integer(rep.dim);
  d.end('}');

  d.key("case").str(case_name(rep.case_kind));
  d.key("probes");
  write_probes(d, rep.probes);
  d.key("window").raw(pair_token(rep.window_lo, rep.window_hi));
  d.key("regular_part").raw(set_token(rep.regular));
  d.key("lambda_beta");
  write_lambda_beta(d, rep.lambda_beta);
  d.key("exceptional_points");
  write_exceptional(d, rep.exceptional);
  d.key("singular_part");
  write_singular(d, rep.singular);

  d.key("structure");
  if (rep.structure)
    write_structure(d, *rep.structure);
  else
    d.null();
  d.key("structure_class");
  if (rep.structure_class)
    write_class(d, *rep.structure_class);
  else
    d.null();
  d.key("structure_note").str(rep.structure_note);

  d.key("radius").num(rep.radius);
  d.key("essential_spectrum").raw(set_token(rep.essential));

  d.key("diagnostics");
  if (rep.diagnostics)
    write_diagnostics(d, *rep.diagnostics);
  else
    d.null();
  d.key("warnings");
  write_strings(d, rep.warnings);
  d.end('}');
  return d.take();
}

std::string section_json(const SpectrumReport& rep,
                         const std::string& section) {
  Doc d;
  d.begin('{');
  d.key("schema").str(kReportSchema);
  d.key("section").str(section);
  if (section == "classify") {
    d.key("case").str(case_name(rep.case_kind));
    d.key("probes");
    write_probes(d, rep.probes);
  } else if (section == "regular") {
    d.key("regular_part").raw(set_token(rep.regular));
    d.key("lambda_beta");
    write_lambda_beta(d, rep.lambda_beta);
  } else if (section == "singular") {
    d.key("case").str(case_name(rep.case_kind));
    d.key("singular_part");
    write_singular(d, rep.singular);
  } else if (section == "structure") {
    d.key("structure");
    if (rep.structure)
      write_structure(d, *rep.structure);
    else
      d.null();
    d.key("structure_class");
    if (rep.structure_class)
      write_class(d, *rep.structure_class);
    else
      d.null();
    d.key("structure_note").str(rep.structure_note);
  } else if (section == "radius") {
    d.key("radius").num(rep.radius);
  } else if (section == "diagnose") {
    d.key("diagnostics");
    if (rep.diagnostics)
      write_diagnostics(d, *rep.diagnostics);
    else
      d.null();
  } else {
    throw ModelError("unknown report section \"" + section + "\"");
  }
  d.key("warnings");
  write_strings(d, rep.warnings);
  d.end('}');
  return d.take();
}

SpectrumReport run_analyze(const AnalysisConfig& cfg) {
  CoefficientModel m = build_from_config(cfg);
  SpectrumReport rep = essential_spectrum(m, options_from_config(cfg));
  rep.regular = coalesce(rep.regular, cfg.merge_tol);
  rep.singular.set = coalesce(rep.singular.set, cfg.merge_tol);
  rep.essential = coalesce(rep.essential, cfg.merge_tol);
  if (!cfg.report_path.empty())
    write_file(cfg.report_path, report_json(rep, cfg));
  if (!cfg.plot_path.empty()) plot_spectrum(rep, cfg.plot_path);
  return rep;
}

std::string error_json(const std::string& type, const std::string& message) {
  Doc d;
  d.begin('{');
  d.key("schema").str(kErrorSchema);
  d.key("type").str(type);
  d.key("message").str(message);
  d.end('}');
  return d.take();
}

// --- oracle grid ------------------------------------------------------------------

std::string OracleGrid::to_csv() const {
  std::string out = "lambda, discriminant, sign, err\n";
  char buf[120];
  for (const OracleRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g, %.17g, %d, %.17g\n", r.lambda,
                  r.discriminant, r.sign, r.err);
    out += buf;
  }
  return out;
}

OracleGrid oracle_grid(const CoefficientModel& m, double lo, double hi,
                       double step, const SingularOptions& opt) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
    throw ModelError("oracle grid needs a finite window with lo < hi");
  if (!(step > 0.0) || !std::isfinite(step))
    throw ModelError("oracle grid step must be positive");
  const double count = std::floor((hi - lo) / step + 1e-9) + 1.0;
  if (count > 200000.0)
    throw ModelError("oracle grid would have more than 200000 rows");
  const long long rows = static_cast<long long>(count);

  // The oracle is only meaningful where the discriminant machinery applies,
  // so gate on the boundary case first.
  CaseKind kind = CaseKind::unresolved;
  for (double f : {0.31, 0.57, 0.83}) {
    try {
      CaseTag tag = classify_case(m, lo + f * (hi - lo), opt.asym);
      if (tag.kind != CaseKind::unresolved) {
        kind = tag.kind;
        break;
      }
    } catch (const std::exception&) {
      // a probe landing on a resolvent pole is not a verdict; try the next
    }
  }
  if (kind == CaseKind::unresolved)
    throw NumericError(
        "the boundary case could not be resolved in the oracle window");
  if (kind != CaseKind::III)
    throw ModelError(std::string("not Case III: the model classifies as case ") +
                     case_name(kind));

  // Everything below runs with the closed-form side channel off: the grid is
  // an independent route, so it must not peek at the family's answers.
  AsymOptions raw = opt.asym;
  raw.use_closed_form = false;

  OracleGrid grid;
  grid.rows.reserve(static_cast<std::size_t>(rows));
  for (long long k = 0; k < rows; ++k) {
    OracleRow row;
    row.lambda = std::min(lo + static_cast<double>(k) * step, hi);
    try {
      AsymCoeffs a = asym_coeffs(m, row.lambda, raw);
      DiscriminantValue dv = discriminant(a, raw.limit_tol);
      row.discriminant = a.beta_finite ? dv.poly : dv.dis;
      row.err = a.beta_finite
                    ? std::max({a.pi2.err, a.r1.err, a.varkappa0.err})
                    : std::max(a.rtilde_beta.err, a.ktilde_beta.err);
      // Within its own error band of zero the strict sign is unknowable;
      // report 0 rather than a coin flip.
      const double tie = std::max(opt.root_tol, 10.0 * row.err) *
                         (1.0 + std::abs(row.lambda));
      row.sign = row.discriminant > tie ? 1
                 : row.discriminant < -tie ? -1
                                           : 0;
      row.ok = true;
    } catch (const std::exception& e) {
      row.discriminant = std::numeric_limits<double>::quiet_NaN();
      row.sign = 0;
      row.err = std::numeric_limits<double>::infinity();
      row.ok = false;
      row.note = e.what();
    }
    grid.rows.push_back(std::move(row));
  }
  return grid;
}

// --- spectrum plot ----------------------------------------------------------------

namespace {

std::string fmt2(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt_label(double v) {
  if (v == 0.0) return "0";  // avoid "-0"
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += ch;
    }
  }
  return out;
}

constexpr double kLeft = 40.0;    // plot area x range
constexpr double kRight = 820.0;
constexpr double kAxisY = 100.0;
constexpr double kRayOverhang = 26.0;  // how far ray bands run past the frame

struct Mapper {
  double lo, hi;
  double operator()(double v) const {
    return kLeft + (v - lo) / (hi - lo) * (kRight - kLeft);
  }
};

// One interval set as a horizontal band.  Infinite endpoints run the band
// past the plot frame and finish in an arrowhead.
void draw_band(std::string& svg, const Mapper& X, const IntervalSet& set,
               double y0, double height, const char* color) {
  const double ymid = y0 + height / 2.0;
  for (const Interval& iv : set.intervals()) {
    const bool lray = std::isinf(iv.lo);
    const bool rray = std::isinf(iv.hi);
    double xa = lray ? kLeft - kRayOverhang : X(iv.lo);
    double xb = rray ? kRight + kRayOverhang : X(iv.hi);
    if (!lray) xa = std::clamp(xa, kLeft, kRight);
    if (!rray) xb = std::clamp(xb, kLeft, kRight);
    if (xb <= kLeft && !lray) continue;  // entirely left of the window
    if (xa >= kRight && !rray) continue;
    if (xb - xa < 3.0) {  // points and slivers stay visible
      const double mid = (xa + xb) / 2.0;
      xa = mid - 1.5;
      xb = mid + 1.5;
    }
    svg += "  <rect x=\"" + fmt2(xa) + "\" y=\"" + fmt2(y0) + "\" width=\"" +
           fmt2(xb - xa) + "\" height=\"" + fmt2(height) + "\" rx=\"2\" fill=\"" +
           color + "\"/>\n";
    if (lray)
      svg += "  <polygon points=\"" + fmt2(xa - 12.0) + "," + fmt2(ymid) +
             " " + fmt2(xa) + "," + fmt2(y0) + " " + fmt2(xa) + "," +
             fmt2(y0 + height) + "\" fill=\"" + color + "\"/>\n";
    if (rray)
      svg += "  <polygon points=\"" + fmt2(xb + 12.0) + "," + fmt2(ymid) +
             " " + fmt2(xb) + "," + fmt2(y0) + " " + fmt2(xb) + "," +
             fmt2(y0 + height) + "\" fill=\"" + color + "\"/>\n";
  }
}

double tick_step(double span) {
  const double raw = span / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  if (norm < 1.5) return mag;
  if (norm < 3.5) return 2.0 * mag;
  if (norm < 7.5) return 5.0 * mag;
  return 10.0 * mag;
}

}  // namespace

std::string spectrum_svg(const SpectrumReport& rep) {
  double lo = rep.window_lo;
  double hi = rep.window_hi;
  if (!(lo < hi)) {  // degenerate window: pad symmetrically
    const double mid = std::isfinite(lo) ? lo : 0.0;
    lo = mid - 1.0;
    hi = mid + 1.0;
  }
  const Mapper X{lo, hi};

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"860\" "
         "height=\"190\" viewBox=\"0 0 860 190\" version=\"1.1\">\n";
  svg += "  <title>" + xml_escape(rep.model_name) + " essential spectrum</title>\n";
  svg += "  <rect x=\"0\" y=\"0\" width=\"860\" height=\"190\" fill=\"#ffffff\"/>\n";
  svg += "  <text x=\"16\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" "
         "fill=\"#1b1f24\">" +
         xml_escape(rep.model_name) + " &#8212; case " +
         case_name(rep.case_kind) + "</text>\n";

  // Lane labels above/below their bands.
  svg += "  <text x=\"40\" y=\"46\" font-family=\"sans-serif\" font-size=\"11\" "
         "fill=\"#3b6ea5\">regular part</text>\n";
  svg += "  <text x=\"40\" y=\"154\" font-family=\"sans-serif\" font-size=\"11\" "
         "fill=\"#c0392b\">singular part</text>\n";

  // Axis with ticks.
  svg += "  <line x1=\"" + fmt2(kLeft) + "\" y1=\"" + fmt2(kAxisY) +
         "\" x2=\"" + fmt2(kRight) + "\" y2=\"" + fmt2(kAxisY) +
         "\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
  const double step = tick_step(hi - lo);
  const long long k0 = static_cast<long long>(std::ceil(lo / step - 1e-9));
  const long long k1 = static_cast<long long>(std::floor(hi / step + 1e-9));
  for (long long k = k0; k <= k1; ++k) {
    double v = static_cast<double>(k) * step;
    if (std::abs(v) < step * 1e-9) v = 0.0;
    const double x = X(v);
    svg += "  <line x1=\"" + fmt2(x) + "\" y1=\"" + fmt2(kAxisY - 3.0) +
           "\" x2=\"" + fmt2(x) + "\" y2=\"" + fmt2(kAxisY + 3.0) +
           "\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
    svg += "  <text x=\"" + fmt2(x) + "\" y=\"" + fmt2(kAxisY + 16.0) +
           "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#555555\" "
           "text-anchor=\"middle\">" +
           fmt_label(v) + "</text>\n";
  }

  // Bands: regular above the axis, singular below.
  draw_band(svg, X, rep.regular, 52.0, 16.0, "#3b6ea5");
  draw_band(svg, X, rep.singular.set, 124.0, 16.0, "#c0392b");

  // Exceptional points on the axis; the glyph encodes the membership status.
  for (const ExceptionalPoint& e : rep.exceptional) {
    if (e.lambda < lo || e.lambda > hi) continue;
    const double cx = X(e.lambda);
    std::string tip = e.status;
    if (!e.analytic_status.empty() && e.analytic_status != e.status)
      tip += " (analytic: " + e.analytic_status + ")";
    svg += "  <g>\n    <title>" + xml_escape(tip) + "</title>\n";
    if (e.status == "in-regular") {
      svg += "    <circle cx=\"" + fmt2(cx) + "\" cy=\"" + fmt2(kAxisY) +
             "\" r=\"5\" fill=\"#1b1f24\"/>\n";
    } else if (e.status == "in-singular-closure") {
      svg += "    <path d=\"M " + fmt2(cx) + " " + fmt2(kAxisY - 6.0) + " L " +
             fmt2(cx + 6.0) + " " + fmt2(kAxisY) + " L " + fmt2(cx) + " " +
             fmt2(kAxisY + 6.0) + " L " + fmt2(cx - 6.0) + " " + fmt2(kAxisY) +
             " Z\" fill=\"#1b1f24\"/>\n";
    } else {
      svg += "    <circle cx=\"" + fmt2(cx) + "\" cy=\"" + fmt2(kAxisY) +
             "\" r=\"5\" fill=\"none\" stroke=\"#1b1f24\" "
             "stroke-width=\"1.5\"/>\n";
    }
    svg += "    <text x=\"" + fmt2(cx) + "\" y=\"86.00\" "
           "font-family=\"sans-serif\" font-size=\"10\" fill=\"#1b1f24\" "
           "text-anchor=\"middle\">" +
           fmt_label(e.lambda) + "</text>\n";
    svg += "  </g>\n";
  }

  // Footer: glyph legend (only when there are markers) and the radius.
  if (!rep.exceptional.empty())
    svg += "  <text x=\"16\" y=\"178\" font-family=\"sans-serif\" "
           "font-size=\"11\" fill=\"#555555\">&#9679; in-regular&#160;&#160; "
           "&#9670; in-singular-closure&#160;&#160; &#9675; "
           "undetermined</text>\n";
  std::string radius_text =
      std::isinf(rep.radius) ? "infinite" : fmt_label(rep.radius);
  svg += "  <text x=\"844\" y=\"178\" font-family=\"sans-serif\" "
         "font-size=\"11\" fill=\"#555555\" text-anchor=\"end\">essential "
         "spectral radius: " +
         radius_text + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

void plot_spectrum(const SpectrumReport& rep, const std::string& path) {
  write_file(path, spectrum_svg(rep));
}

}  // namespace esspec
