#pragma once

// Multi-period combined MV+LV schedule: DistFlow with cone relaxation on the
// MV side, sensitivity-coefficient LV grids, priced MV security violations.

#include "gridflex/conic.hpp"
#include "gridflex/scenario.hpp"

#include <string>
#include <vector>

namespace gridflex {

/// Objective terms summed over the horizon. Losses and penalties are in p.u.
struct ObjectiveTerms {
    double losses = 0.0;
    double voltage = 0.0;
    double flow = 0.0;
    double p_dev = 0.0;
    double q_dev = 0.0;
    double activation = 0.0;

    double total() const { return losses + voltage + flow + p_dev + q_dev + activation; }
};

struct StepResult {
    MvState mv;
    double slack_v = 1.0;            // squared P-SS voltage
    std::vector<LvState> lv;         // per LV grid, absolute V / I, flow deltas
    std::vector<PQ> delta;           // per resource, kW / kvar
    std::vector<double> soc;         // per resource, NaN for non-storage
    std::vector<double> v_dev;       // per MV node, p.u.^2 above/below the squared limits
    std::vector<double> l_dev;       // per MV branch
    double p_dev = 0.0;              // |P-SS import - schedule|, p.u.
    double q_dev = 0.0;
    double relaxation_gap = 0.0;     // max over branches of v*l - P^2 - Q^2
};

struct ScheduleResult {
    std::vector<StepResult> steps;
    ObjectiveTerms raw;        // unweighted sums
    ObjectiveTerms weighted;   // raw times the scenario weights
    double objective = 0.0;    // weighted.total()
    double solver_objective = 0.0;
    double max_relaxation_gap = 0.0;
    bool relaxation_loose = false;  // max gap above options.relaxation_threshold
    int iterations = 0;
    double solve_time_s = 0.0;
    int windows = 1;

    Setpoints setpoints() const;
};

/// Whole-horizon program. Throws InconsistentScenario when LV models are missing.
conic::ConicProgram build_combined_program(const OpfScenario& sc);

/// Solves the schedule (rolling windows when options.window > 0).
/// Throws SolveFailed when any window is not solved to optimality.
ScheduleResult solve_schedule(const OpfScenario& sc);

/// Weighted objective terms; their total equals res.objective.
ObjectiveTerms objective_breakdown(const ScheduleResult& res);

struct OracleViolation {
    int step = 0;
    std::string element;   // "mv:<node>", "mv:<from->to>", "<grid>:<node>", "<grid>:<from->to>"
    std::string quantity;  // "vmax", "vmin", "imax"
    double value = 0.0;    // |V| or |I|, p.u.
    double limit = 0.0;
    double excess = 0.0;
};

struct VerificationReport {
    double mv_voltage_error = 0.0;      // max ||V| opt - |V| MV oracle| with the optimizer's transformer flows
    double mv_loss_error = 0.0;         // max per-step |losses opt - losses oracle|
    double coupled_voltage_error = 0.0; // same against the coupled MV+LV oracle
    double lv_voltage_error = 0.0;      // max |V| linear prediction vs LV load flow
    double lv_current_error = 0.0;
    double tolerance = 0.0;
    std::vector<OracleViolation> violations;

    bool ok() const { return violations.empty(); }
};

/// Re-simulates the result's setpoints with the exact oracles and compares.
/// Throws OracleFailure.
VerificationReport verify_against_oracle(const ScheduleResult& res, const OpfScenario& sc,
                                         double tolerance = 1e-3);

/// Limit check of arbitrary setpoints on the coupled oracle.
VerificationReport verify_setpoints(const OpfScenario& sc, const Setpoints& sp, double tolerance = 1e-3);

} // namespace gridflex
