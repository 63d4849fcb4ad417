// Command-line front end: analyze models described by JSON configurations,
// print reports as JSON / CSV / SVG, and expose the polytrope solver.
// Exit codes: 0 success, 1 usage or configuration problem, 2 numeric failure.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "esspec/errors.hpp"
#include "esspec/models.hpp"
#include "esspec/report.hpp"

namespace {

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

struct Opts {
  std::string config_path;
  std::string model_name;
  std::string out_path;
  std::string plot_path;
  double lambda_min = kUnset;
  double lambda_max = kUnset;
  int grid = 0;  // 0 = keep the configured value
  double step = 0.0;
  std::vector<std::string> tol;
};

void apply_tol(esspec::AnalysisConfig& c, const std::string& kv) {
  const std::size_t eq = kv.find('=');
  if (eq == std::string::npos)
    throw esspec::ModelError("--tol expects KEY=VALUE, got \"" + kv + "\"");
  const std::string key = kv.substr(0, eq);
  const std::string text = kv.substr(eq + 1);
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0')
    throw esspec::ModelError("--tol " + key + ": \"" + text +
                             "\" is not a number");
  if (key == "limit_tol") c.limit_tol = value;
  else if (key == "eps_class") c.eps_class = value;
  else if (key == "root_tol") c.root_tol = value;
  else if (key == "fit_tol") c.fit_tol = value;
  else if (key == "exclusion_margin") c.exclusion_margin = value;
  else if (key == "merge_tol") c.merge_tol = value;
  else
    throw esspec::ModelError(
        "unknown tolerance \"" + key +
        "\" (expected limit_tol, eps_class, root_tol, fit_tol, "
        "exclusion_margin or merge_tol)");
}

// Assemble the effective configuration: file or built-in name, then the
// command-line overrides, then one pass through the canonical validator so
// overridden values obey the same rules as configured ones.
esspec::AnalysisConfig make_config(const Opts& o) {
  esspec::AnalysisConfig c;
  if (!o.config_path.empty()) {
    c = esspec::load_config(o.config_path);
  } else if (!o.model_name.empty()) {
    if (o.model_name == "custom")
      throw esspec::ModelError(
          "custom models need --config (coefficient expressions cannot be "
          "given on the command line)");
    c.model.name = o.model_name;
  } else {
    throw esspec::ModelError("either --config or --model is required");
  }
  const bool has_min = !std::isnan(o.lambda_min);
  const bool has_max = !std::isnan(o.lambda_max);
  if (has_min != has_max)
    throw esspec::ModelError(
        "--lambda-min and --lambda-max must be given together");
  if (has_min) c.window = {o.lambda_min, o.lambda_max};
  if (o.grid != 0) c.grid = o.grid;
  for (const std::string& kv : o.tol) apply_tol(c, kv);
  return esspec::parse_config(esspec::config_json(c));
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw esspec::ModelError("cannot open " + path + " for writing");
  out << text;
  out.flush();
  if (!out.good()) throw esspec::ModelError("failed while writing " + path);
}

int fail(bool json_errors, const char* type, const std::string& msg) {
  if (json_errors)
    std::fputs(esspec::error_json(type, msg).c_str(), stdout);
  else
    std::fprintf(stderr, "error: %s\n", msg.c_str());
  return std::strcmp(type, "config") == 0 ? 1 : 2;
}

std::string lane_emden_json(double n_poly, double alpha_n,
                            const esspec::LaneEmdenOptions& le) {
  esspec::LaneEmdenSolution sol = esspec::lane_emden(n_poly, alpha_n, le);
  const double R = sol.R();
  double residual = 0.0;
  for (int k = 1; k <= 200; ++k)
    residual = std::max(residual, sol.ode_residual(R * k / 200.0));
  std::string out = "{\n";
  out += "  \"schema\": \"" + std::string(esspec::kReportSchema) + "\",\n";
  out += "  \"section\": \"lane-emden\",\n";
  out += "  \"n_poly\": " + esspec::json_number(n_poly) + ",\n";
  out += "  \"alpha_n\": " + esspec::json_number(alpha_n) + ",\n";
  out += "  \"R\": " + esspec::json_number(R) + ",\n";
  out += "  \"surface_slope\": " + esspec::json_number(sol.theta_d1(R)) + ",\n";
  out += "  \"ode_residual_max\": " + esspec::json_number(residual) + "\n";
  out += "}\n";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "essential spectra of singular block operator pencils: boundary case "
      "classification, regular and singular parts, structure and radius"};
  app.require_subcommand(1);
  bool json_errors = false;
  app.add_flag("--json-errors", json_errors,
               "print machine-readable error bodies on stdout");

  Opts o;
  auto add_common = [&o](CLI::App* sub, bool with_plot) {
    sub->fallthrough();  // lets the global --json-errors follow a subcommand
    sub->add_option("--config", o.config_path, "JSON configuration file");
    sub->add_option("--model", o.model_name,
                    "built-in model with default parameters (example-a, "
                    "example-b, stellar)");
    sub->add_option("--out", o.out_path, "output file (default: stdout)");
    if (with_plot)
      sub->add_option("--plot", o.plot_path, "write an SVG picture here");
    sub->add_option("--lambda-min", o.lambda_min, "window lower endpoint");
    sub->add_option("--lambda-max", o.lambda_max, "window upper endpoint");
    sub->add_option("--grid", o.grid, "scan grid size (>= 16)");
    sub->add_option("--tol", o.tol,
                    "tolerance override KEY=VALUE; repeatable (limit_tol, "
                    "eps_class, root_tol, fit_tol, exclusion_margin, "
                    "merge_tol)");
  };

  CLI::App* cmd_analyze = app.add_subcommand(
      "analyze", "full analysis; prints the report as JSON");
  add_common(cmd_analyze, true);
  CLI::App* cmd_classify =
      app.add_subcommand("classify", "boundary case of the window");
  add_common(cmd_classify, false);
  CLI::App* cmd_regular = app.add_subcommand(
      "regular", "regular part and boundary eigenvalue limits");
  add_common(cmd_regular, false);
  CLI::App* cmd_singular =
      app.add_subcommand("singular", "singular part of the essential spectrum");
  add_common(cmd_singular, false);
  CLI::App* cmd_structure = app.add_subcommand(
      "structure", "boundary structure coefficients and their sign class");
  add_common(cmd_structure, false);
  CLI::App* cmd_radius =
      app.add_subcommand("radius", "essential spectral radius");
  add_common(cmd_radius, false);
  CLI::App* cmd_diagnose = app.add_subcommand(
      "diagnose", "numerical evidence for the standing assumptions");
  add_common(cmd_diagnose, false);
  CLI::App* cmd_oracle = app.add_subcommand(
      "oracle-grid",
      "raw discriminant signs on a lambda grid, as CSV (case III only)");
  add_common(cmd_oracle, false);
  cmd_oracle->add_option("--step", o.step,
                         "grid spacing (default: window span / 64)");
  CLI::App* cmd_plot =
      app.add_subcommand("plot", "SVG picture of the essential spectrum");
  add_common(cmd_plot, true);

  double le_n = 3.0, le_alpha = 1.0;
  esspec::LaneEmdenOptions le;
  std::string le_out;
  CLI::App* cmd_lane = app.add_subcommand(
      "lane-emden", "polytrope surface radius and solution fidelity");
  cmd_lane->fallthrough();
  cmd_lane->add_option("--n-poly", le_n, "polytropic index in [0, 5]");
  cmd_lane->add_option("--alpha-n", le_alpha, "unit length (> 0)");
  cmd_lane->add_option("--t-max", le.t_max, "search limit for the surface");
  cmd_lane->add_option("--rtol", le.rtol, "relative step error control");
  cmd_lane->add_option("--atol", le.atol, "absolute step error control");
  cmd_lane->add_option("--h-max", le.h_max, "step cap in units of alpha-n");
  cmd_lane->add_option("--out", le_out, "output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(json_errors, "config", e.what());
  }

  try {
    if (cmd_lane->parsed()) {
      emit(lane_emden_json(le_n, le_alpha, le), le_out);
      return 0;
    }

    if (cmd_analyze->parsed()) {
      esspec::AnalysisConfig c = make_config(o);
      if (!o.out_path.empty()) c.report_path = o.out_path;
      if (!o.plot_path.empty()) c.plot_path = o.plot_path;
      esspec::SpectrumReport rep = esspec::run_analyze(c);
      std::fputs(esspec::report_json(rep, c).c_str(), stdout);
      return 0;
    }

    if (cmd_oracle->parsed()) {
      esspec::AnalysisConfig c = make_config(o);
      if (c.window[0] == 0.0 && c.window[1] == 0.0)
        throw esspec::ModelError(
            "oracle-grid needs an explicit window (--lambda-min/--lambda-max "
            "or \"window\" in the config)");
      const double step =
          o.step > 0.0 ? o.step : (c.window[1] - c.window[0]) / 64.0;
      esspec::CoefficientModel m = esspec::build_from_config(c);
      esspec::OracleGrid grid = esspec::oracle_grid(
          m, c.window[0], c.window[1], step, esspec::options_from_config(c));
      emit(grid.to_csv(), o.out_path);
      return 0;
    }

    if (cmd_plot->parsed()) {
      esspec::AnalysisConfig c = make_config(o);
      const std::string path =
          !o.plot_path.empty() ? o.plot_path : o.out_path;
      if (path.empty() && c.plot_path.empty())
        throw esspec::ModelError("plot needs --plot, --out or a configured "
                                 "output.plot path");
      if (!path.empty()) c.plot_path = path;
      esspec::run_analyze(c);
      return 0;
    }

    // The focused sections all run the same analysis and print one slice.
    const char* section = nullptr;
    if (cmd_classify->parsed()) section = "classify";
    if (cmd_regular->parsed()) section = "regular";
    if (cmd_singular->parsed()) section = "singular";
    if (cmd_structure->parsed()) section = "structure";
    if (cmd_radius->parsed()) section = "radius";
    if (cmd_diagnose->parsed()) section = "diagnose";
    if (section) {
      esspec::AnalysisConfig c = make_config(o);
      esspec::SpectrumReport rep = esspec::run_analyze(c);
      emit(esspec::section_json(rep, section), o.out_path);
      return 0;
    }
    throw esspec::ModelError("no subcommand selected");
  } catch (const esspec::ParseError& e) {
    return fail(json_errors, "config", e.what());
  } catch (const esspec::ModelError& e) {
    return fail(json_errors, "config", e.what());
  } catch (const esspec::DomainError& e) {
    return fail(json_errors, "config", e.what());
  } catch (const std::exception& e) {
    return fail(json_errors, "numeric", e.what());
  }
}
