#pragma once

// Aggregated P-Q flexibility at the primary substation, traced by maximizing
// the change of the P-SS exchange along a set of directions with every grid
// limit enforced as a hard constraint.

#include "gridflex/conic.hpp"
#include "gridflex/scenario.hpp"

#include <string>
#include <vector>

namespace gridflex {

enum class ServiceLabel { Fast, Slow };

std::string to_string(ServiceLabel s);  // "FAST" / "SLOW"

struct ServiceClass {
    ServiceLabel label = ServiceLabel::Slow;
    double r_thresh = 4.0;  // kW/hr
};

struct Classification {
    std::vector<int> fast;       // resource indices with ramp >= threshold
    std::vector<int> slow_only;  // the rest; every resource is slow-eligible
};

/// Throws InvalidThreshold when r_thresh <= 0.
Classification classify_resources(const std::vector<Resource>& resources, double r_thresh);

struct Direction {
    double alpha = 1.0;
    double beta = 0.0;

    static Direction from_angle(double theta);
    double theta() const;  // in [0, 2 pi)
};

/// Throws InvalidDirection for (0, 0) or non-finite components.
Direction make_direction(double alpha, double beta);

enum class EnvelopeMode {
    Step,     // one step; the previous step sits at the baseline
    Horizon,  // steps [step, step + span) jointly, reporting the mean change
};

struct EnvelopeOptions {
    EnvelopeMode mode = EnvelopeMode::Step;
    int step = 0;
    int span = 0;             // horizon mode: number of steps, 0 = to the end
    double feas_tol = 1e-9;   // relaxed up to 100x when the solver stalls
    double gap_tol = 1e-9;
    int threads = 0;          // 0 = GRIDFLEX_THREADS or the hardware count
};

struct EnvelopePoint {
    double theta = 0.0;
    double dp_kw = 0.0;       // change of the P-SS import, kW
    double dq_kvar = 0.0;
    bool ok = false;
    std::string status;       // solver status or error text
    std::vector<std::vector<PQ>> delta;  // [step in window][resource], kW / kvar
    std::vector<MvState> mv;             // optimizer MV state per step in window
    std::vector<std::vector<LvState>> lv;  // linear LV prediction per step in window
    double relaxation_gap = 0.0;
};

struct FlexEnvelope {
    std::string scenario;
    ServiceClass service;
    EnvelopeMode mode = EnvelopeMode::Step;
    int step = 0;
    int span = 1;
    int n_dirs = 0;
    PQ baseline_kw;                    // P-SS import at zero change (mean over the window)
    std::vector<EnvelopePoint> points; // increasing theta

    std::size_t failures() const;
};

/// One support point. Throws InvalidDirection, Infeasible or SolveFailed.
EnvelopePoint max_direction(const OpfScenario& sc, Direction d, const ServiceClass& service,
                            const EnvelopeOptions& opt = {});

/// Directions theta_j = 2 pi j / n_dirs; failed directions are marked, not fatal.
/// Throws InvalidArgument when n_dirs < 4.
FlexEnvelope sweep_envelope(const OpfScenario& sc, int n_dirs, const ServiceClass& service,
                            const EnvelopeOptions& opt = {});

/// Shoelace area (kW * kvar) of the ordered successful points.
double envelope_area(const FlexEnvelope& env);

struct EnvelopeComparison {
    double fast_area = 0.0;
    double slow_area = 0.0;
    std::vector<double> ratio;   // per direction: fast support / slow support
    bool contained = false;      // every fast point inside the slow hull (within tol)
    double max_outside_kw = 0.0; // largest distance of a fast point outside the slow hull
};

/// Throws MismatchedScenario when the envelopes come from different runs.
EnvelopeComparison envelope_report(const FlexEnvelope& fast, const FlexEnvelope& slow, double tol_kw = 1e-3);

/// Distance (kW) from a point to the convex hull of the envelope's points, 0 inside.
double distance_outside_hull(const FlexEnvelope& env, PQ point_kw);

} // namespace gridflex
