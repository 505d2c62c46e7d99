#include "gridflex/coordination.hpp"

#include "gridflex/error.hpp"

#include <algorithm>

namespace gridflex {

std::string to_string(SchemeKind k) { return k == SchemeKind::TsoLeader ? "tso_leader" : "dso_leader"; }

SchemeKind parse_scheme(const std::string& text)
{
    if (text == "tso_leader")
        return SchemeKind::TsoLeader;
    if (text == "dso_leader")
        return SchemeKind::DsoLeader;
    throw Error(ErrorCode::UnknownScheme, "unknown coordination scheme '" + text + "' (tso_leader | dso_leader)");
}

std::string to_string(Operator op) { return op == Operator::Tso ? "TSO" : "DSO"; }

CoordinationScheme make_scheme(SchemeKind kind)
{
    CoordinationScheme s;
    s.kind = kind;
    if (kind == SchemeKind::TsoLeader)
        s.processes = {
            {1, Operator::Dso, "pre-qualify fast and slow envelopes on the full boxes"},
            {2, Operator::Tso, "clear services inside the pre-qualified envelopes"},
            {3, Operator::Dso, "operate the grid with what the TSO left"},
        };
    else
        s.processes = {
            {1, Operator::Dso, "schedule flexibility for losses and grid security"},
            {2, Operator::Dso, "pre-qualify residual envelopes around the schedule"},
            {3, Operator::Tso, "clear services inside the residual envelopes"},
        };
    return s;
}

const std::vector<ServiceEntry>& service_catalog()
{
    static const std::vector<ServiceEntry> catalog = {
        {"Inertia", Operator::Tso, ServiceLabel::Fast, false},
        {"FCR", Operator::Tso, ServiceLabel::Fast, true},
        {"FFR", Operator::Tso, ServiceLabel::Fast, true},
        {"EFR", Operator::Tso, ServiceLabel::Fast, true},
        {"aFRR", Operator::Tso, ServiceLabel::Fast, true},
        {"Ramping response", Operator::Tso, ServiceLabel::Fast, true},
        {"mFRR", Operator::Tso, ServiceLabel::Slow, true},
        {"RR", Operator::Tso, ServiceLabel::Slow, true},
        {"Voltage and reactive power", Operator::Tso, ServiceLabel::Slow, true},
        {"Congestion", Operator::Tso, ServiceLabel::Slow, true},
        {"Black start", Operator::Tso, ServiceLabel::Slow, true},
        {"Balancing capacity reserves", Operator::Tso, ServiceLabel::Slow, true},
        {"Voltage", Operator::Dso, ServiceLabel::Slow, true},
        {"Congestion", Operator::Dso, ServiceLabel::Slow, true},
        {"Peak shaving", Operator::Dso, ServiceLabel::Slow, true},
        {"Load levelling", Operator::Dso, ServiceLabel::Slow, true},
    };
    return catalog;
}

std::vector<std::string> services_for(ServiceLabel speed, Operator op)
{
    std::vector<std::string> out;
    for (const ServiceEntry& e : service_catalog())
        if (e.available && e.speed == speed && e.requested_by == op)
            out.push_back(e.name);
    return out;
}

OpfScenario residual_scenario(const OpfScenario& sc, const Setpoints& used, int* recomputed)
{
    const int T = sc.ts.horizon;
    const std::size_t K = sc.resources.size();
    if (static_cast<int>(used.delta.size()) != T)
        throw Error(ErrorCode::InvalidArgument, "setpoints do not cover the horizon");
    std::vector<std::vector<Box>> boxes(T, std::vector<Box>(K));
    for (int t = 0; t < T; ++t) {
        if (used.delta[t].size() != K)
            throw Error(ErrorCode::InvalidArgument, "setpoints do not cover every resource");
        for (std::size_t k = 0; k < K; ++k) {
            Box b = sc.box(t, static_cast<int>(k));
            const PQ& d = used.delta[t][k];
            // the box is relative to the new baseline; what was used is gone on its side
            if (d.p < 0.0)
                b.p_lo = std::min(0.0, b.p_lo - d.p);
            else
                b.p_hi = std::max(0.0, b.p_hi - d.p);
            if (d.q < 0.0)
                b.q_lo = std::min(0.0, b.q_lo - d.q);
            else
                b.q_hi = std::max(0.0, b.q_hi - d.q);
            boxes[t][k] = b;
        }
    }
    OpfScenario out = sc;
    const int n = shift_baseline(out, used);
    out.step_boxes = std::move(boxes);
    if (recomputed)
        *recomputed = n;
    return out;
}

TsoLeaderResult run_tso_leader(const OpfScenario& sc, const CoordinationOptions& opt)
{
    TsoLeaderResult r;
    r.scheme = make_scheme(SchemeKind::TsoLeader);
    const double th = sc.options.r_thresh;
    r.fast = sweep_envelope(sc, opt.n_dirs, {ServiceLabel::Fast, th}, opt.envelope);
    r.slow = sweep_envelope(sc, opt.n_dirs, {ServiceLabel::Slow, th}, opt.envelope);
    return r;
}

DsoLeaderResult run_dso_leader(const OpfScenario& sc, const CoordinationOptions& opt)
{
    DsoLeaderResult r;
    r.scheme = make_scheme(SchemeKind::DsoLeader);
    OpfScenario dso = sc;
    if (!(dso.weights.w_act > 0.0))
        dso.weights.w_act = 1.0;
    r.schedule = solve_schedule(dso);
    r.residual = residual_scenario(sc, r.schedule.setpoints(), &r.recomputed_models);
    const double th = sc.options.r_thresh;
    r.fast = sweep_envelope(r.residual, opt.n_dirs, {ServiceLabel::Fast, th}, opt.envelope);
    r.slow = sweep_envelope(r.residual, opt.n_dirs, {ServiceLabel::Slow, th}, opt.envelope);
    return r;
}

} // namespace gridflex
