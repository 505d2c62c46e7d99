#pragma once

// Scenario files: a flat key = value config pointing at CSV tables, plus the
// CSV/SVG outputs of the commands.

#include "gridflex/flex_envelope.hpp"
#include "gridflex/opf.hpp"

#include <map>
#include <string>

namespace gridflex {

struct RunSettings {
    std::string scheme = "tso_leader";
    int n_dirs = 32;
    std::string out = "out";          // relative to the config directory
    std::string envelope_mode = "step";  // step | horizon
    int envelope_step = 0;
    int envelope_span = 0;
    double verify_tolerance = 1e-3;

    friend bool operator==(const RunSettings&, const RunSettings&) = default;
};

struct ScenarioConfig {
    std::string path;  // the config file itself
    std::string dir;   // relative table paths resolve here

    std::string name;
    std::string nodes, branches, links, lv_nodes, lv_branches, resources, timeseries;
    std::map<std::string, std::string> coefficients;  // LV grid id -> table
    std::string slack;    // empty = first MV node
    double base_kva = 1000.0;
    double base_v = 20000.0;
    double dt_min = 10.0;
    int horizon = 0;      // 0 = from the time series
    ObjectiveWeights weights;
    ScenarioOptions options;
    RunSettings run;
};

/// Throws IoError, ParseError (unknown key, bad value) or UnknownScheme.
ScenarioConfig read_config(const std::string& path);

/// Throws ParseError (file, line, column), CrossRefError or ValidationError
/// (every defect listed). The result has its LV models prepared.
OpfScenario load_scenario(const ScenarioConfig& cfg);
OpfScenario load_scenario(const std::string& config_path);

/// Writes scenario.cfg and its tables into `dir` (created if missing).
void save_scenario(const OpfScenario& sc, const std::string& dir, const RunSettings& run = {});

/// Field-by-field comparison of the loaded parts (derived LV models excluded);
/// returns the first differing field or "".
std::string scenario_difference(const OpfScenario& a, const OpfScenario& b);

// Outputs. Every CSV has a header row and 17 significant digits.

/// setpoints.csv, slack.csv, mv_nodes.csv, mv_branches.csv, lv_state.csv, breakdown.csv
void write_schedule(const ScheduleResult& res, const OpfScenario& sc, const std::string& dir);

/// Reads setpoints.csv (and slack.csv when present, nominal otherwise) from `dir`.
Setpoints read_setpoints(const OpfScenario& sc, const std::string& dir);

std::string envelope_csv(const FlexEnvelope& env);
std::string envelope_svg(const FlexEnvelope& fast, const FlexEnvelope& slow);
std::string verification_csv(const VerificationReport& rep);

} // namespace gridflex
