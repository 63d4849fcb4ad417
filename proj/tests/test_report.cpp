// Tests for the reporting layer: configuration parsing with key-level
// error messages, the normalized echo, report serialization (byte
// determinism, exact number round trips, infinities as strings), the raw
// oracle grid with its CSV form, the SVG picture, and the command-line
// tool's exit-code contract.
//
// The CLI binary's path and the sample-configuration directory are passed
// in by the build as ESSPEC_CLI_PATH and ESSPEC_CONFIG_DIR.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <esspec/errors.hpp>
#include <esspec/report.hpp>
#include <esspec/singular.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <json.hpp>

using namespace esspec;
using nlohmann::json;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

// Message of the exception thrown by fn, or "" when nothing was thrown.
template <typename F>
std::string thrown(F fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

bool mentions(const std::string& msg, const std::string& needle) {
  return msg.find(needle) != std::string::npos;
}

// Numbers that may have been serialized as "inf" / "-inf" / "nan".
double ext(const json& v) {
  if (v.is_number()) return v.get<double>();
  const std::string s = v.get<std::string>();
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  return std::numeric_limits<double>::quiet_NaN();
}

bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * (1.0 + std::abs(b));
}

std::size_t count_of(const std::string& text, const std::string& token) {
  std::size_t n = 0;
  for (std::size_t at = text.find(token); at != std::string::npos;
       at = text.find(token, at + token.size()))
    ++n;
  return n;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string out_dir() {
  static const std::string dir = [] {
    std::filesystem::create_directories("report_test_out");
    return std::string("report_test_out");
  }();
  return dir;
}

// Run the CLI, capture stdout, return the exit code.
int cli_run(const std::string& args, std::string* out = nullptr) {
  static int seq = 0;
  const std::string capture =
      out_dir() + "/cli_" + std::to_string(seq++) + ".txt";
  const std::string cmd = std::string("\"") + ESSPEC_CLI_PATH + "\" " + args +
                          " > " + capture + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  if (out) *out = slurp(capture);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config_path(const char* name) {
  return std::string(ESSPEC_CONFIG_DIR) + "/" + name;
}

AnalysisConfig unit_a_config() {
  AnalysisConfig c = parse_config(R"({"model": {"name": "example-a"}})");
  c.window = {-6.0, 10.0};
  return c;
}

AnalysisConfig unit_b_config() {
  AnalysisConfig c = parse_config(R"({"model": {"name": "example-b"}})");
  c.window = {-4.0, 4.0};
  return c;
}

}  // namespace

TEST_CASE("configuration: defaults, echo, and byte-exact round trip") {
  // A bare model name fills in the unit profiles and every analysis knob.
  AnalysisConfig c = parse_config(R"({"model": {"name": "example-a"}})");
  CHECK(c.model.name == "example-a");
  CHECK(c.model.a.rho == "1");
  CHECK(c.model.a.phi == "5");
  CHECK(c.grid == 257);
  CHECK(c.case_probes == 5);
  CHECK(c.ray_extension);
  CHECK(c.limit_tol == 1e-6);
  CHECK(c.eps_class == 0.0);
  CHECK(c.merge_tol == 1e-9);
  CHECK(c.window[0] == 0.0);
  CHECK(c.window[1] == 0.0);
  CHECK(c.report_path.empty());

  // The echo is normalized and parses back to the identical echo.
  const std::string echo = config_json(c);
  CHECK(config_json(parse_config(echo)) == echo);

  // Explicit windows and tolerance overrides survive the round trip.
  AnalysisConfig cw = parse_config(
      R"({"model": {"name": "example-b"}, "window": [-2, 3.5],
          "tolerances": {"root_tol": 1e-8}})");
  CHECK(cw.window[0] == -2.0);
  CHECK(cw.window[1] == 3.5);
  CHECK(cw.root_tol == 1e-8);
  const std::string echo_w = config_json(cw);
  CHECK(mentions(echo_w, "[-2, 3.5]"));
  CHECK(config_json(parse_config(echo_w)) == echo_w);

  // Custom models: the sample file parses, and an infinite right endpoint
  // is spelled "inf" in both directions.
  AnalysisConfig cc = load_config(config_path("flat-weight-ray.json"));
  CHECK(cc.model.name == "custom");
  CHECK(cc.model.custom.dim == 1);
  CHECK(cc.model.custom.p == "(1 - t)*(1 - t)");
  CHECK(cc.window[0] == -5.0);
  const std::string echo_c = config_json(cc);
  CHECK(config_json(parse_config(echo_c)) == echo_c);

  AnalysisConfig ci = parse_config(
      R"({"model": {"name": "custom",
                    "params": {"beta": "inf", "D": [["1"]]}}})");
  CHECK(std::isinf(ci.model.custom.beta));
  const std::string echo_i = config_json(ci);
  CHECK(mentions(echo_i, "\"beta\": \"inf\""));
  CHECK(config_json(parse_config(echo_i)) == echo_i);

  // Component entries may be plain strings or [re, im] pairs.
  AnalysisConfig ce = parse_config(
      R"({"model": {"name": "custom",
                    "params": {"dim": 1, "b": [["0", "1"]],
                               "D": [["2 + t"]]}}})");
  CHECK(ce.model.custom.b[0][1] == "1");
  CHECK(ce.model.custom.D[0][0][0] == "2 + t");
}

TEST_CASE("configuration: schema violations name the offending key") {
  // The spec'd example: a negative tolerance is refused by key name.
  CHECK(mentions(thrown([] {
          parse_config(R"({"model": {"name": "example-a"},
                           "tolerances": {"root_tol": -1e-9}})");
        }),
        "tolerances.root_tol"));
  CHECK(mentions(thrown([] {
          parse_config(R"({"model": {"name": "example-a"},
                           "tolerances": {"root_tol": -1e-9}})");
        }),
        "must be > 0"));

  // Zero is refused for the strict tolerances, negative for the rest.
  CHECK(mentions(thrown([] {
          parse_config(R"({"model": {"name": "example-a"},
                           "tolerances": {"limit_tol": 0}})");
        }),
        "tolerances.limit_tol"));
  CHECK(mentions(thrown([] {
          parse_config(R"({"model": {"name": "example-a"},
                           "tolerances": {"eps_class": -1}})");
        }),
        "tolerances.eps_class"));
  CHECK(mentions(thrown([] {
          parse_config(R"({"model": {"name": "example-a"},
                           "tolerances": {"merge_tol": 0}})");
        }),
        "tolerances.merge_tol"));

  // Structural offenses, each by its path.
  CHECK(mentions(thrown([] { parse_config(R"({"window": [0, 1]})"); }),
                 "model"));
  CHECK(mentions(thrown([] {
          parse_config(R"({"model": {"name": "frobnicate"}})");
        }),
        "model.name"));
  CHECK(mentions(thrown([] {
          parse_config(R"({"model": {"name": "example-a"}, "window": [3]})");
        }),
        "window"));
  CHECK(mentions(thrown([] {
          parse_config(
              R"({"model": {"name": "example-a"}, "window": [5, -5]})");
        }),
        "window"));
  CHECK(mentions(thrown([] {
          parse_config(R"({"model": {"name": "example-a"}, "grid": 8})");
        }),
        "grid"));
  CHECK(mentions(thrown([] {
          parse_config(R"({"model": {"name": "example-a"}, "case_probes": 0})");
        }),
        "case_probes"));
  CHECK(mentions(thrown([] {
          parse_config(R"({"model": {"name": "example-a"}, "bogus": 1})");
        }),
        "bogus"));
  CHECK(mentions(thrown([] {
          parse_config(R"({"model": {"name": "example-a"},
                           "tolerances": {"foo": 1}})");
        }),
        "tolerances.foo"));
  CHECK(mentions(thrown([] {
          parse_config(R"({"schema": "other/9",
                           "model": {"name": "example-a"}})");
        }),
        "schema"));
  CHECK(mentions(thrown([] {
          parse_config(R"({"model": {"name": "example-a",
                                     "params": {"rho": 3}}})");
        }),
        "model.params.rho"));
  CHECK(mentions(thrown([] {
          parse_config(R"({"model": {"name": "example-a",
                                     "params": {"zeta": "1"}}})");
        }),
        "model.params.zeta"));
  CHECK(mentions(thrown([] {
          parse_config(R"({"model": {"name": "custom", "params": {"dim": 1}}})");
        }),
        "model.params.D"));

  // Non-schema problems: malformed JSON and a non-object root.
  CHECK_THROWS_AS(parse_config("{"), ParseError);
  CHECK(mentions(thrown([] { parse_config("[1, 2]"); }), "top level"));
  CHECK_THROWS_AS(load_config("no/such/config.json"), ModelError);
}

TEST_CASE("report JSON: deterministic bytes and exact number round trip") {
  const AnalysisConfig cfg = unit_a_config();
  const SpectrumReport rep = run_analyze(cfg);

  const std::string doc = report_json(rep, cfg);
  CHECK(report_json(run_analyze(cfg), cfg) == doc);  // rerun, same bytes

  const json j = json::parse(doc);
  CHECK(j.at("schema") == kReportSchema);
  CHECK(j.at("tool_version") == kToolVersion);
  CHECK(j.at("case") == "III");
  CHECK(j.at("model").at("name") == "example-a");
  CHECK(j.at("model").at("dim") == 1);
  CHECK(j.at("window").at(0).get<double>() == -6.0);
  CHECK(j.at("window").at(1).get<double>() == 10.0);
  CHECK(j.at("probes").size() == static_cast<std::size_t>(cfg.case_probes));

  // Every number survives the trip through text bit-exactly.
  CHECK(j.at("radius").get<double>() == rep.radius);
  REQUIRE(rep.structure.has_value());
  CHECK(j.at("structure").at("g_beta").get<double>() ==
        rep.structure->g_beta);
  CHECK(j.at("structure").at("phi_beta").get<double>() ==
        rep.structure->phi_beta);
  REQUIRE(rep.singular.set.size() >= 1);
  CHECK(j.at("singular_part").at("intervals").at(0).at(0).get<double>() ==
        rep.singular.set[0].lo);
  CHECK(j.at("singular_part").at("intervals").at(0).at(1).get<double>() ==
        rep.singular.set[0].hi);
  CHECK(j.at("config").at("tolerances").at("root_tol").get<double>() ==
        cfg.root_tol);

  // Pinned spectral data of the unit scalar model.
  CHECK(close(j.at("radius").get<double>(), 4.0, 1e-6));
  CHECK(close(j.at("singular_part").at("intervals").at(0).at(1).get<double>(),
              4.0, 1e-6));
  CHECK(j.at("structure_class").at("branch") == "a1");
  CHECK(j.at("exceptional_points").empty());
  CHECK(j.at("diagnostics").is_object());
  CHECK(j.at("warnings").is_array());

  // The embedded echo is itself a valid configuration.
  CHECK(config_json(parse_config(j.at("config").dump())) == config_json(cfg));
}

TEST_CASE("report JSON: infinities serialize as strings and read back") {
  const AnalysisConfig cfg = load_config(config_path("flat-weight-ray.json"));
  const SpectrumReport rep = run_analyze(cfg);
  REQUIRE(rep.singular.right_ray);

  const json j = json::parse(report_json(rep, cfg));
  CHECK(j.at("radius").is_string());
  CHECK(ext(j.at("radius")) == kInf);
  const json& iv = j.at("singular_part").at("intervals").at(0);
  CHECK(close(ext(iv.at(0)), 0.25, 1e-6));
  CHECK(ext(iv.at(1)) == kInf);
  CHECK(j.at("singular_part").at("right_ray") == true);
}

TEST_CASE("report sets honor the configured merge tolerance") {
  // At the default tolerance the spectrum of the unit scalar model keeps
  // the origin (regular part) and the scanned singular endpoint apart by a
  // few nanounits; a coarser merge tolerance welds them into one band.
  AnalysisConfig cfg = unit_a_config();
  const SpectrumReport fine = run_analyze(cfg);
  CHECK(std::abs(fine.essential.inf()) <= 1e-9);
  CHECK(close(fine.essential.sup(), 4.0, 1e-6));

  cfg.merge_tol = 1e-6;
  const SpectrumReport coarse = run_analyze(cfg);
  CHECK(coarse.essential.size() == 1);
  CHECK(std::abs(coarse.essential.inf()) <= 1e-9);
  CHECK(close(coarse.essential.sup(), 4.0, 1e-6));
  CHECK(coarse.singular.set.size() == 1);
}

TEST_CASE("oracle grid: raw signs match the closed singular component") {
  // Unit scalar model: poly(lambda) = 5 lambda - 1.25 lambda^2 vanishes at
  // 0 and 4, so on the quarter-integer grid the sign is nonnegative exactly
  // on the [0, 4] samples.
  AnalysisConfig cfg = unit_a_config();
  const CoefficientModel m = build_from_config(cfg);
  const OracleGrid g = oracle_grid(m, -1.0, 5.0, 0.25,
                                   options_from_config(cfg));
  REQUIRE(g.rows.size() == 25);
  for (const OracleRow& row : g.rows) {
    CAPTURE(row.lambda);
    REQUIRE(row.ok);
    const bool member = row.lambda >= -1e-9 && row.lambda <= 4.0 + 1e-9;
    CHECK((row.sign >= 0) == member);
    CHECK(row.err < 1e-6);
  }
  // Spot values of the raw discriminant against the closed form.
  CHECK(close(g.rows[12].discriminant, 5.0, 1e-5));   // lambda = 2
  CHECK(std::abs(g.rows[4].discriminant) <= 1e-8);    // lambda = 0
  CHECK(std::abs(g.rows[20].discriminant) <= 1e-8);   // lambda = 4

  // Agreement with the scanned singular component away from its endpoints.
  const SingularSet s = singular_part(m, -1.0, 5.0);
  for (const OracleRow& row : g.rows) {
    if (!row.ok) continue;
    double gap = kInf;
    for (const Interval& iv : s.set.intervals()) {
      gap = std::min(gap, std::abs(row.lambda - iv.lo));
      gap = std::min(gap, std::abs(row.lambda - iv.hi));
    }
    if (gap < 1e-6) continue;
    CAPTURE(row.lambda);
    CHECK((row.sign >= 0) == s.set.contains(row.lambda, 1e-9));
  }

  // CSV form: exact header, one line per row.
  const std::string csv = g.to_csv();
  CHECK(csv.rfind("lambda, discriminant, sign, err\n", 0) == 0);
  CHECK(count_of(csv, "\n") == 26);
  CHECK(csv.find("-1, ") != std::string::npos);
}

TEST_CASE("oracle grid: pole rows are recorded, not fatal") {
  // The 2x2 unit model has an eigenvalue branch identically zero, so the
  // grid point at lambda = 0 sits on a resolvent pole and must come back
  // as a recorded failure while every other row evaluates.
  AnalysisConfig cfg = unit_b_config();
  const CoefficientModel m = build_from_config(cfg);
  const OracleGrid g = oracle_grid(m, -2.0, 2.0, 0.1,
                                   options_from_config(cfg));
  REQUIRE(g.rows.size() == 41);
  int failures = 0;
  for (const OracleRow& row : g.rows) {
    CAPTURE(row.lambda);
    if (!row.ok) {
      ++failures;
      CHECK(std::isnan(row.discriminant));
      CHECK(std::isinf(row.err));
      CHECK(row.sign == 0);
      CHECK_FALSE(row.note.empty());
      CHECK(std::abs(row.lambda) <= 1e-9);  // only the pole at the origin
      continue;
    }
    // poly(lambda) = 1 - lambda^2: nonnegative exactly on [-1, 1].
    const bool member = row.lambda >= -1.0 - 1e-9 && row.lambda <= 1.0 + 1e-9;
    CHECK((row.sign >= 0) == member);
  }
  CHECK(failures <= 2);
  CHECK(failures >= 1);
}

TEST_CASE("oracle grid: refusals") {
  SingularOptions opt;
  const CoefficientModel stellar = stellar_model({});
  CHECK(mentions(
      thrown([&] { oracle_grid(stellar, -1.0, 1.0, 0.5, opt); }),
      "not Case III"));
  const CoefficientModel a = example_a({"1", "1", "1", "", "5"});
  CHECK_THROWS_AS(oracle_grid(a, 1.0, -1.0, 0.5, opt), ModelError);
  CHECK_THROWS_AS(oracle_grid(a, -1.0, 1.0, 0.0, opt), ModelError);
  CHECK_THROWS_AS(oracle_grid(a, -1.0, 1.0, 1e-9, opt), ModelError);
}

TEST_CASE("spectrum picture: deterministic SVG with the right landmarks") {
  const AnalysisConfig cfg_a = unit_a_config();
  const SpectrumReport rep_a = run_analyze(cfg_a);
  const std::string svg_a = spectrum_svg(rep_a);
  CHECK(spectrum_svg(rep_a) == svg_a);
  CHECK(svg_a.rfind("<?xml", 0) == 0);
  CHECK(mentions(svg_a, "case III"));
  // Background plus one rect per regular and singular interval; no
  // exceptional markers, no rays.
  CHECK(count_of(svg_a, "<rect") ==
        1 + rep_a.regular.size() + rep_a.singular.set.size());
  CHECK(count_of(svg_a, "<polygon") == 0);
  CHECK(count_of(svg_a, "<circle") == 0);

  // The 2x2 unit model adds one exceptional point at the origin whose
  // set membership and family analysis disagree; both end up in the tip.
  const AnalysisConfig cfg_b = unit_b_config();
  const SpectrumReport rep_b = run_analyze(cfg_b);
  const std::string svg_b = spectrum_svg(rep_b);
  CHECK(count_of(svg_b, "<circle") == 1);
  CHECK(mentions(svg_b, "in-regular (analytic: in-singular-closure)"));
  CHECK(mentions(svg_b, "&#9679; in-regular"));  // legend appears

  // A right ray ends in exactly one arrowhead.
  const AnalysisConfig cfg_r = load_config(config_path("flat-weight-ray.json"));
  const SpectrumReport rep_r = run_analyze(cfg_r);
  const std::string svg_r = spectrum_svg(rep_r);
  CHECK(count_of(svg_r, "<polygon") == 1);
  CHECK(mentions(svg_r, "essential spectral radius: infinite"));

  // An empty spectrum draws the axis alone.
  SpectrumReport empty;
  empty.model_name = "empty";
  empty.window_lo = -1.0;
  empty.window_hi = 1.0;
  const std::string svg_e = spectrum_svg(empty);
  CHECK(count_of(svg_e, "<rect") == 1);  // background only
  CHECK(count_of(svg_e, "<circle") == 0);
  CHECK(mentions(svg_e, "<line"));

  // plot_spectrum writes exactly the rendered bytes.
  const std::string path = out_dir() + "/picture.svg";
  plot_spectrum(rep_a, path);
  CHECK(slurp(path) == svg_a);
}

TEST_CASE("run_analyze writes the configured artifacts") {
  AnalysisConfig cfg = unit_a_config();
  cfg.report_path = out_dir() + "/unit_a_report.json";
  cfg.plot_path = out_dir() + "/unit_a_plot.svg";
  const SpectrumReport rep = run_analyze(cfg);
  CHECK(slurp(cfg.report_path) == report_json(rep, cfg));
  CHECK(slurp(cfg.plot_path) == spectrum_svg(rep));
  CHECK_THROWS_AS(
      [&] {
        AnalysisConfig bad = cfg;
        bad.report_path = "no/such/dir/report.json";
        run_analyze(bad);
      }(),
      ModelError);
}

TEST_CASE("section documents cover each aspect of the report") {
  const AnalysisConfig cfg = unit_a_config();
  const SpectrumReport rep = run_analyze(cfg);
  for (const char* name : {"classify", "regular", "singular", "structure",
                           "radius", "diagnose"}) {
    const std::string doc = section_json(rep, name);
    const json j = json::parse(doc);
    CHECK(j.at("section") == name);
    CHECK(j.at("schema") == kReportSchema);
  }
  const json jr = json::parse(section_json(rep, "radius"));
  CHECK(close(ext(jr.at("radius")), 4.0, 1e-6));
  const json jc = json::parse(section_json(rep, "classify"));
  CHECK(jc.at("case") == "III");
  CHECK_THROWS_AS(section_json(rep, "bogus"), ModelError);
}

TEST_CASE("command line: exit codes, outputs, and determinism") {
  std::string out;

  // Success paths.
  CHECK(cli_run("radius --config \"" + config_path("example-a-unit.json") +
                    "\"",
                &out) == 0);
  CHECK(close(ext(json::parse(out).at("radius")), 4.0, 1e-6));

  CHECK(cli_run("singular --config \"" + config_path("example-b-unit.json") +
                    "\"",
                &out) == 0);
  {
    const json j = json::parse(out);
    const json& iv = j.at("singular_part").at("intervals").at(0);
    CHECK(close(ext(iv.at(0)), -1.0, 1e-6));
    CHECK(close(ext(iv.at(1)), 1.0, 1e-6));
  }

  CHECK(cli_run("lane-emden --n-poly 1 --alpha-n 1", &out) == 0);
  CHECK(std::abs(ext(json::parse(out).at("R")) - 3.14159265358979324) <= 1e-8);

  // Usage and configuration problems exit 1.
  CHECK(cli_run("analyze") == 1);
  CHECK(cli_run("analyze --frobnicate") == 1);
  CHECK(cli_run("analyze --model example-a --tol root_tol=-1") == 1);
  CHECK(cli_run("analyze --model custom") == 1);
  CHECK(cli_run("oracle-grid --model stellar --lambda-min -1 --lambda-max 1 "
                "--json-errors",
                &out) == 1);
  {
    const json j = json::parse(out);
    CHECK(j.at("type") == "config");
    CHECK(mentions(j.at("message").get<std::string>(), "not Case III"));
  }

  // Numeric failures exit 2 with a machine-readable body on request.
  CHECK(cli_run("lane-emden --n-poly 5 --t-max 20 --json-errors", &out) == 2);
  CHECK(json::parse(out).at("type") == "numeric");

  // Reports written through --out are byte-identical across runs and equal
  // to what lands on stdout.  (The report embeds its configuration echo,
  // output path included, so the reruns must share the path.)
  const std::string f1 = out_dir() + "/cli_report.json";
  const std::string cmd = "analyze --config \"" +
                          config_path("example-a-unit.json") + "\" --out " +
                          f1;
  CHECK(cli_run(cmd, &out) == 0);
  const std::string first_run = slurp(f1);
  std::string out2;
  CHECK(cli_run(cmd, &out2) == 0);
  CHECK(slurp(f1) == first_run);
  CHECK(out == out2);
  CHECK(first_run == out);

  // The plot subcommand writes SVG.
  const std::string fsvg = out_dir() + "/cli_ray.svg";
  CHECK(cli_run("plot --config \"" + config_path("flat-weight-ray.json") +
                "\" --out " + fsvg) == 0);
  const std::string svg = slurp(fsvg);
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(mentions(svg, "<polygon"));

  // Tolerance overrides flow through the same validator as the file.
  CHECK(cli_run("radius --model example-a --lambda-min -6 --lambda-max 10 "
                "--tol merge_tol=1e-6") == 0);
}
