#pragma once

// Scenario data shared by the schedule optimizer, the envelope sweep and the
// coordination schemes, plus the coupled MV+LV load flow used as ground truth.
//
// Physical quantities in resources and time series are kW / kvar / kWh with
// generation positive; the network and the optimization work in p.u. on the
// MV base power.

#include "gridflex/conic.hpp"
#include "gridflex/grid_model.hpp"
#include "gridflex/lv_sensitivity.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gridflex {

enum class ResourceKind { PV, EvStorage, Load };

std::string to_string(ResourceKind k);
ResourceKind parse_resource_kind(const std::string& s);  // throws ParseError

struct Resource {
    std::string id;
    std::string lv_grid;
    std::string lv_node;
    ResourceKind kind = ResourceKind::PV;
    double dp_lo_kw = 0.0;
    double dp_hi_kw = 0.0;
    double dq_lo_kvar = 0.0;
    double dq_hi_kvar = 0.0;
    double s_kva = 10.0;
    double pf_lim = 0.95;
    double ramp_kw_per_hr = 0.0;
    // storage only
    double eta = 1.0;
    double cap_kwh = 0.0;
    double soc_min = 0.1;
    double soc_max = 0.9;
    double soc0 = 0.5;

    bool has_inverter() const { return kind != ResourceKind::Load; }
    bool is_storage() const { return kind == ResourceKind::EvStorage; }

    friend bool operator==(const Resource&, const Resource&) = default;
};

struct ObjectiveWeights {
    double w_l = 1.0;
    double w_v = 100.0;   // currency per p.u.^2 of voltage excess per step
    double w_lim = 100.0;
    double w_p = 0.0;
    double w_q = 0.0;
    double w_act = 0.0;   // optional cost on |setpoint change|, p.u.

    friend bool operator==(const ObjectiveWeights&, const ObjectiveWeights&) = default;
};

struct PQ {
    double p = 0.0;
    double q = 0.0;
    friend bool operator==(const PQ&, const PQ&) = default;
};

struct TimeSeries {
    double dt_min = 10.0;
    int horizon = 1;
    std::vector<std::vector<PQ>> mv;                    // [t][mv node] kW, kvar
    std::vector<std::vector<std::vector<PQ>>> lv;       // [t][lv grid][lv node] background
    std::vector<std::vector<PQ>> resource;              // [t][resource] baseline setpoint
    std::vector<PQ> tso_schedule;                        // [t] P-SS import, empty if none

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;
};

struct Box {
    double p_lo = 0.0, p_hi = 0.0, q_lo = 0.0, q_hi = 0.0;  // kW, kvar
    friend bool operator==(const Box&, const Box&) = default;
};

struct ScenarioOptions {
    double slack_v_min = 0.95;      // |V| p.u. bounds of the P-SS voltage in the schedule
    double slack_v_max = 1.05;
    double slack_v_nominal = 1.0;   // baseline and envelope P-SS voltage
    double relaxation_threshold = 1e-4;
    double trust_fraction = 0.2;
    double r_thresh = 4.0;          // kW/hr
    int window = 0;                 // rolling-horizon window, 0 = whole horizon
    double feas_tol = 1e-8;
    double gap_tol = 1e-8;
    bool transformer_terms = false;

    friend bool operator==(const ScenarioOptions&, const ScenarioOptions&) = default;
};

/// Per-step LV linearization for one LV grid.
struct LvModelSet {
    std::vector<SensitivityModel> models;  // [t]
    std::vector<LvOperatingPoint> ops;     // [t]
};

struct OpfScenario {
    std::string name;
    MvNetwork mv;
    std::vector<LvNetwork> lv;  // same order as mv.links
    std::vector<Resource> resources;
    TimeSeries ts;
    ObjectiveWeights weights;
    ScenarioOptions options;
    std::vector<std::vector<Box>> step_boxes;  // optional [t][resource] override of the resource box
    std::vector<std::optional<SensitivityModel>> fixed_coefficients;  // optional [grid] imported tables

    std::vector<LvModelSet> lv_models;  // derived, see prepare_lv_models

    int lv_index(const std::string& grid) const;
    int resource_index(const std::string& id) const;
    Box box(int t, int k) const;
    double base() const { return mv.base_kva; }
};

struct ScenarioDefect {
    std::string element;
    std::string message;
};

/// Structural checks beyond network validation: ids resolve, horizon sizes
/// agree, resource parameters are sane.
std::vector<ScenarioDefect> check_scenario(const OpfScenario& sc);

/// Setpoint changes per step and resource, kW / kvar, plus the P-SS voltage.
struct Setpoints {
    std::vector<std::vector<PQ>> delta;  // [t][resource]
    std::vector<double> slack_v;         // [t], squared p.u.

    static Setpoints zero(const OpfScenario& sc);
};

struct CoupledState {
    MvState mv;
    std::vector<LvLoadFlow> lv;
};

/// LV nodal injections (p.u.) for a step: background + resource baselines + delta.
LvInjection lv_injection(const OpfScenario& sc, int t, int grid, const std::vector<PQ>* delta = nullptr);

/// MV nodal injections (p.u.) of a step, generation and consumption split.
std::vector<NodeInjection> mv_injections(const OpfScenario& sc, int t);

/// Exact MV sweep with the LV grids solved by their own load flow, iterated
/// until the transformer voltages and flows agree.
CoupledState simulate_step(const OpfScenario& sc, int t, double slack_v,
                           const std::vector<PQ>* delta = nullptr);

/// Builds per-step sensitivity models and operating points at the coupled
/// baseline with the P-SS at its nominal voltage.
void prepare_lv_models(OpfScenario& sc);

/// Moves the baseline by `delta` (kW) and updates the LV linearization: affine
/// update when every change is inside the trust region, full recomputation of
/// the affected step otherwise. Returns the number of recomputed (grid, step) pairs.
int shift_baseline(OpfScenario& sc, const Setpoints& delta);

/// Scenario of a hand-checkable size used in docs and tests: two MV nodes, one
/// LV grid with a single feeder node hosting one PV.
OpfScenario tiny_scenario();

} // namespace gridflex
