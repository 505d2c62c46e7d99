#pragma once

// Linear sensitivity model of an LV grid: voltage/current changes as an affine
// function of nodal P/Q changes around an operating point.
//
// LV voltages and currents are magnitudes in p.u. (not squared). An LV grid's
// root is the secondary of its MV/LV transformer; its voltage is tied to the
// MV node through the linearized square root below.

#include "gridflex/grid_model.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace gridflex {

struct LvNetwork {
    std::string id;
    std::vector<Node> nodes;
    std::vector<Branch> branches;
    std::string root;

    int node_index(const std::string& id) const;
    int branch_index(const std::string& name) const;
    /// Sum of the ampacities leaving the root (p.u. power at nominal voltage).
    double rating() const;
    friend bool operator==(const LvNetwork&, const LvNetwork&) = default;
};

ValidationReport validate_lv(const LvNetwork& lv);

/// Per-node net injection (p.u., generation positive).
struct LvInjection {
    std::vector<double> p;
    std::vector<double> q;
};

struct LvLoadFlow {
    std::vector<double> V;  // per node |V|
    std::vector<double> I;  // per branch |I|
    double p_sl = 0.0;      // transformer withdrawal from the MV side
    double q_sl = 0.0;
};

/// Exact LV load flow with the root held at |V| = root_voltage.
/// Throws Error(OracleFailure) when the sweep does not converge.
LvLoadFlow lv_load_flow(const LvNetwork& lv, const LvInjection& inj, double root_voltage);

struct LvOperatingPoint {
    std::vector<double> v0;    // per node
    std::vector<double> i0;    // per branch
    std::vector<double> drop;  // per node: root voltage minus node voltage
    double root_voltage = 1.0;
    double p_sl0 = 0.0;
    double q_sl0 = 0.0;
    int step = 0;
};

LvOperatingPoint lv_operating_point(const LvNetwork& lv, const LvInjection& inj,
                                    double root_voltage, int step = 0);

struct LvLayout {
    std::string lv_grid;
    std::vector<std::string> nodes;
    std::vector<std::string> branches;
    std::vector<std::string> injectors;  // nodes whose injections may change

    static LvLayout of(const LvNetwork& lv);  // every non-root node injects
    int injector_index(const std::string& node) const;
};

struct SensitivityModel {
    LvLayout layout;
    Eigen::MatrixXd kvp, kvq;  // nodes x injectors
    Eigen::MatrixXd kip, kiq;  // branches x injectors
    // Optional transformer-flow sensitivities (1 x injectors). When empty the
    // flow change is the lossless aggregate -sum(dP), -sum(dQ).
    Eigen::RowVectorXd tpp, tpq, tqp, tqq;
    std::string stamp;

    bool has_transformer_terms() const { return tpp.size() > 0; }
};

struct ReferenceOptions {
    double epsilon = 1e-4;
    bool transformer_terms = false;
};

/// Central differences of the exact LV load flow around `inj`.
/// Throws InvalidPerturbation (epsilon <= 0) or OracleFailure.
SensitivityModel coefficients_from_reference(const LvNetwork& lv, const LvInjection& inj,
                                             double root_voltage, const ReferenceOptions& opt = {});

struct MeasurementSample {
    Eigen::VectorXd dV;  // per node
    Eigen::VectorXd dI;  // per branch
    Eigen::VectorXd dP;  // per injector
    Eigen::VectorXd dQ;
};

struct MeasurementFit {
    SensitivityModel model;
    Eigen::VectorXd rms_v;  // residual RMS per node row
    Eigen::VectorXd rms_i;  // per branch row
};

/// Least squares per observed element, with an optional ridge term.
/// Throws Underdetermined (fewer than 2 samples per injector) or RankDeficient.
MeasurementFit coefficients_from_measurements(const LvLayout& layout,
                                              const std::vector<MeasurementSample>& samples,
                                              double ridge = 0.0);

struct LvState {
    std::vector<double> V;
    std::vector<double> I;
    double dp_sl = 0.0;
    double dq_sl = 0.0;
};

struct NodeDelta {
    std::string node;
    double dp = 0.0;
    double dq = 0.0;
};

/// Affine evaluation; dp/dq are indexed by layout.injectors.
LvState predict_state(const SensitivityModel& model, const LvOperatingPoint& op,
                      const Eigen::VectorXd& dp, const Eigen::VectorXd& dq);
/// Same, keyed by node id. Throws UnknownNode.
LvState predict_state(const SensitivityModel& model, const LvOperatingPoint& op,
                      const std::vector<NodeDelta>& deltas);

/// Linearized square root of the MV-side squared voltage around 1 p.u.
inline double couple_lv_voltage(double v_mv, double drop) { return 0.5 * (v_mv + 1.0) - drop; }

/// True when no |dP| exceeds fraction * rating.
bool within_trust_region(const LvNetwork& lv, const Eigen::VectorXd& dp, double fraction = 0.2);

/// CSV with columns observed,injector,kvp,kvq,kip,kiq. Node rows carry voltage
/// coefficients, "from->to" rows current coefficients, and rows observed as
/// "transformer_p"/"transformer_q" the optional transformer terms.
void write_coefficients(std::ostream& os, const SensitivityModel& model);
SensitivityModel read_coefficients(std::istream& is, const LvLayout& layout,
                                   const std::string& source = "coefficients");

} // namespace gridflex
