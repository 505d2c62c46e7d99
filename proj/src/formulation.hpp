#pragma once

// Shared per-step program builder for the schedule and the envelope sweep.

#include "gridflex/conic.hpp"
#include "gridflex/scenario.hpp"

#include <optional>
#include <vector>

namespace gridflex::detail {

enum class Security { Priced, Hard };

struct BuildOptions {
    int t_begin = 0;
    int t_end = 1;
    Security security = Security::Priced;
    double slack_v_lo = 0.95 * 0.95;  // squared
    double slack_v_hi = 1.05 * 1.05;
    std::vector<bool> frozen;          // per resource; empty = none frozen
    bool ramp = false;                 // |d(t) - d(t-1)| <= R dt / 60, d(t_begin - 1) = 0
    std::vector<double> soc_start;     // per resource, SOC before t_begin; empty = soc0
    ObjectiveWeights weights;          // priced objective (ignored for Hard)
    double tie_break = 0.0;            // Hard: cost on |change| that picks the least-change point of a face
};

struct StepVars {
    int t = 0;
    std::vector<conic::Var> v, P, Q, l;
    conic::Var p_slk, q_slk;
    std::vector<conic::AffineExpr> dp, dq;            // per resource, p.u.
    std::vector<std::vector<conic::Var>> V0;          // per grid, per node
    std::vector<std::vector<conic::AffineExpr>> V, I; // per grid
    std::vector<conic::AffineExpr> dp_sl, dq_sl;      // per grid
    std::vector<conic::Var> vdev, ldev;               // empty when not priced
    std::optional<conic::Var> ep, eq;
    std::vector<conic::AffineExpr> act;               // activation epigraph sum per resource
    std::vector<std::optional<conic::Var>> soc;
};

struct Formulation {
    conic::ConicProgram prog;
    RadialTopology topo;
    std::vector<StepVars> steps;
};

/// Throws InconsistentScenario when the scenario lacks LV models.
void require_models(const OpfScenario& sc);

Formulation build_formulation(const OpfScenario& sc, const BuildOptions& opt);

double value(const conic::AffineExpr& e, const std::vector<double>& x);

/// Solves, relaxing the tolerances tenfold (twice at most) after a numerical failure.
conic::Solution solve_relaxing(const conic::ConicProgram& prog, conic::SolverSettings settings);

/// Per-resource (grid, injector) location in the LV layouts.
struct Placement {
    int grid = -1;
    int injector = -1;
};
std::vector<Placement> place_resources(const OpfScenario& sc);

/// Baseline SOC per resource after each step (NaN for non-storage).
std::vector<std::vector<double>> baseline_soc(const OpfScenario& sc);

} // namespace gridflex::detail
