#pragma once

#include "tubelab/dimension.hpp"
#include "tubelab/generators.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tubelab {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

/// Thrown for malformed configs and bad command-line input (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct GridPolicy {
  double h_over_delta = 0.25;
  std::optional<double> h;  // absolute spacing, overrides the ratio
};

struct FunctionalParams {
  std::optional<double> p;  // defaults to (d+beta)/(d+beta-1)
  int k = 2;
  double rho = 0.25;
};

struct ExperimentConfig {
  std::string scenario;
  std::string name;
  GeneratorSpec generator;
  FunctionalParams functional;
  GridPolicy grid;
  std::vector<double> scales;  // deltas; empty means generator.delta only
  std::uint64_t seed = 1;
  int trials = 0;              // scenario-specific repetition count; 0 picks the default
  std::string output = "reports";

  /// Parses and validates; unknown keys and bad values throw ConfigError.
  static ExperimentConfig from_json(const ordered_json& j);
  ordered_json to_json() const;

  double p() const;
  std::vector<double> deltas() const;
  /// Throws ConfigError on invalid combinations.
  void validate() const;
};

/// Reads a scenario config or a manifest {"schema_version", "scenarios": [...]}
/// whose entries are inline configs or paths relative to the manifest.
std::vector<ExperimentConfig> load_configs(const std::filesystem::path& path);

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct FitRecord {
  std::string name;
  ExponentFit fit;
};

struct ExperimentReport {
  ExperimentConfig config;
  ordered_json values = ordered_json::object();
  ordered_json constants = ordered_json::object();  // regression-tracked numbers
  std::vector<FitRecord> fits;
  std::vector<Check> checks;
  std::optional<std::string> failure;  // module error, if any
  double wall_clock_seconds = 0.0;

  bool passed() const;
  ordered_json to_json() const;
  static ExperimentReport from_json(const ordered_json& j);
  /// Serialized report without the wall-clock field.
  std::string payload() const;
};

struct ScenarioInfo {
  std::string name;
  std::string description;
};

const std::vector<ScenarioInfo>& scenarios();

/// Runs one scenario. Library errors become a failure record, not an exception.
ExperimentReport run_scenario(const ExperimentConfig& cfg);

/// Writes <dir>/<name>.json and, when fits exist, <dir>/<name>.csv.
void write_report(const ExperimentReport& r, const std::filesystem::path& dir);
std::string fits_csv(const ExperimentReport& r);

struct DriftRow {
  std::string scenario;
  std::string constant;
  double golden = 0.0;
  double value = 0.0;
  double factor = 1.0;  // max(value/golden, golden/value)
  bool within = true;
};

struct RegressionSummary {
  std::vector<DriftRow> rows;
  std::vector<std::string> missing;  // scenarios without a golden file
  bool passed() const;
  std::string table() const;
};

/// Golden directory: $TUBELAB_GOLDEN_DIR if set, else `fallback`.
std::filesystem::path golden_dir(const std::filesystem::path& fallback);

/// Compares recorded constants with <golden>/<name>.json within a factor 2.
RegressionSummary regress(const std::vector<ExperimentReport>& reports, const std::filesystem::path& golden);

/// Writes <golden>/<name>.json holding the constants of each report.
void freeze(const std::vector<ExperimentReport>& reports, const std::filesystem::path& golden);

/// Families used for suite-wide checks: n <= 3, at most 200 tubes.
struct SuiteEntry {
  std::string name;
  GeneratorSpec spec;  // delta is filled in per scale
  int k = 2;           // multilinearity used by the functionals
};
std::vector<SuiteEntry> standard_suite();

/// Splits f into k families by the dominant coordinate of each direction
/// (axes >= k go to the last family). Empty when some family would be empty.
std::vector<TubeFamily> split_by_axis(const TubeFamily& f, int k);

}  // namespace tubelab
