#pragma once

#include <array>
#include <string>
#include <vector>

#include "esspec/model.hpp"
#include "esspec/models.hpp"
#include "esspec/singular.hpp"

namespace esspec {

// ---------------------------------------------------------------------------
// Analysis configuration
// ---------------------------------------------------------------------------
//
// A single JSON document drives a whole analysis run: which model to build,
// the spectral window, the grid, the tolerance knobs, and where to write the
// results.  The loader validates everything up front and reports the first
// offense by its full key path ("tolerances.root_tol: must be > 0"), so a
// bad configuration never reaches the numerics.  Writing the parsed
// configuration back out (config_json) produces a normalized echo with every
// default filled in; the echo is embedded in the report, which makes a run
// reproducible from its own output.

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kConfigSchema = "esspec-config/1";
inline constexpr const char* kReportSchema = "esspec-report/1";
inline constexpr const char* kErrorSchema = "esspec-error/1";

// Model selection: one of the built-in families by name, or a custom model
// given by coefficient expressions.  Only the member matching `name` is
// read; the others keep their defaults.
struct ModelConfig {
  std::string name = "example-a";  // example-a | example-b | stellar | custom
  ExampleAParams a{"1", "1", "1", "", "5"};
  ExampleBParams b{"1", "1", "1", "1", "", "1", "1", "1", "", "0"};
  StellarParams stellar;
  LaneEmdenOptions lane_emden;
  ExprModel custom;
};

struct AnalysisConfig {
  ModelConfig model;

  // Spectral window; {0, 0} lets the analysis choose one from the scale of
  // the boundary data.
  std::array<double, 2> window{0.0, 0.0};
  int grid = 257;
  int case_probes = 5;
  bool ray_extension = true;

  // Tolerances.  limit_tol, root_tol, fit_tol and merge_tol must be
  // positive; eps_class and exclusion_margin accept 0 for "choose
  // automatically from the model scale".
  double limit_tol = 1e-6;
  double eps_class = 0.0;
  double root_tol = 1e-9;
  double fit_tol = 1e-6;
  double exclusion_margin = 0.0;
  double merge_tol = 1e-9;

  // Output files; empty means "do not write".
  std::string report_path;
  std::string plot_path;
};

// Parse a configuration from JSON text.  Throws ParseError for malformed
// JSON and ModelError for schema violations; the message names the
// offending key.  Unknown keys are rejected, so typos surface immediately.
AnalysisConfig parse_config(const std::string& json_text);

// Read and parse a configuration file.  ModelError when the file cannot be
// read.
AnalysisConfig load_config(const std::string& path);

// Normalized echo of a configuration: every field explicit, numbers written
// so they parse back to the same doubles.  parse_config(config_json(c))
// reproduces c exactly.
std::string config_json(const AnalysisConfig& c);

// Build the configured model (ModelError for unknown names or bad family
// parameters) and translate the configuration into analysis options.
CoefficientModel build_from_config(const AnalysisConfig& c);
SingularOptions options_from_config(const AnalysisConfig& c);

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------
//
// Reports are written by a small dedicated serializer: keys in a fixed
// order, numbers with up to 17 significant digits so every double survives
// a round trip, infinities and NaN as the strings "inf" / "-inf" / "nan"
// (JSON has no spelling for them).  Output contains no timestamps or other
// environment echoes, so a rerun of the same configuration is byte
// identical.

std::string report_json(const SpectrumReport& rep, const AnalysisConfig& cfg);

// One JSON token for a double: up to 17 significant digits, non-finite
// values as the quoted strings "inf" / "-inf" / "nan".
std::string json_number(double v);

// A focused JSON document covering one aspect of a report: "classify",
// "regular", "singular", "structure", "radius", or "diagnose".  ModelError
// for an unknown section name.
std::string section_json(const SpectrumReport& rep, const std::string& section);

// Run the configured analysis end to end: build the model, compute the
// essential spectrum, apply the configured merge tolerance to the reported
// interval sets, and write the report JSON (and the plot, if a path is
// configured).  Returns the report.  File-system failures are ModelError.
SpectrumReport run_analyze(const AnalysisConfig& cfg);

// JSON error body for machine consumers: schema, error type ("config" |
// "numeric"), and the message.
std::string error_json(const std::string& type, const std::string& message);

// ---------------------------------------------------------------------------
// Oracle grid
// ---------------------------------------------------------------------------
//
// An independent check of the singular component that bypasses every closed
// form: at each grid point the boundary limits are re-extrapolated
// numerically and the sign of the discriminant is reported raw.  Rows where
// the extrapolation fails (a resolvent pole, an unreliable limit) are
// recorded with the failure instead of aborting the grid.  Only meaningful
// in case III; other cases are refused.

struct OracleRow {
  double lambda = 0.0;
  double discriminant = 0.0;  // NaN when the row failed
  int sign = 0;               // +1 / -1, or 0 within tolerance of a zero
                              // (also 0 for failed rows)
  double err = 0.0;           // worst contributing limit error; +inf failed
  bool ok = false;
  std::string note;           // failure description, empty for good rows
};

struct OracleGrid {
  std::vector<OracleRow> rows;

  // CSV with the exact header "lambda, discriminant, sign, err".
  std::string to_csv() const;
};

// Evaluate the raw discriminant on the grid lo, lo+step, ..., hi.  Throws
// ModelError("not Case III: ...") when the window classifies otherwise and
// ModelError for an empty or infinite window or non-positive step.
OracleGrid oracle_grid(const CoefficientModel& m, double lo, double hi,
                       double step, const SingularOptions& opt = {});

// ---------------------------------------------------------------------------
// Spectrum plot
// ---------------------------------------------------------------------------
//
// A deterministic SVG picture of the report: the spectral window as a real
// line with ticks, the regular part as a band above the axis, the singular
// part as a band below it, rays ending in arrowheads, and the exceptional
// points as markers on the axis whose glyph encodes the membership status
// (disc: in-regular, diamond: in-singular-closure, open circle:
// undetermined).  An empty spectrum draws the axis alone.  Byte-for-byte
// reproducible for equal reports.

std::string spectrum_svg(const SpectrumReport& rep);

// Render and write to a file; ModelError when the file cannot be written.
void plot_spectrum(const SpectrumReport& rep, const std::string& path);

}  // namespace esspec
