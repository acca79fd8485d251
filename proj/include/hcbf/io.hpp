#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "hcbf/constraints.hpp"
#include "hcbf/sim.hpp"

namespace hcbf {

/// Scenario or limits file problem. what() lists every issue, one per line,
/// each prefixed with its field path (or line number for syntax errors).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

inline constexpr int kTraceFormatVersion = 1;

ScenarioConfig parse_scenario(const std::filesystem::path& path);
ScenarioConfig parse_scenario_text(const std::string& text);
/// Canonical JSON text (every field explicit). parse_scenario_text inverts it.
std::string serialize_scenario(const ScenarioConfig& config);
/// FNV-1a over the canonical JSON, as 16 hex digits.
std::string scenario_hash(const ScenarioConfig& config);

/// Parameters of the feasibility check, read from a small JSON file.
struct LimitsFile {
  AgentLimits limits;
  double d_min = 10;
  double u_omax = 0;
  double a_omax = 0;
  double gamma = 0.1;
};

LimitsFile parse_limits(const std::filesystem::path& path);
LimitsFile parse_limits_text(const std::string& text);

/// Key: value report of a margin computation.
std::string feasibility_report(const FeasibilityMargin& m, const LimitsFile& input, bool joint);

struct TraceColumn {
  std::string name;
  std::string unit;
};

/// Column manifest of the wide CSV for this trace.
std::vector<TraceColumn> trace_columns(const SimTrace& trace);

/// Writes <dir>/trace.csv and <dir>/summary.json. Every `every`-th row is
/// written (the final row always is). Floats use 17 significant digits.
void write_trace(const SimTrace& trace, const std::filesystem::path& dir, int every = 1);

/// Summary JSON (header metadata, metrics, jump events, warnings).
std::string summary_json(const SimTrace& trace, const Metrics& m, int every = 1);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // name without unit
  double number(std::size_t row, std::size_t col) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace hcbf
