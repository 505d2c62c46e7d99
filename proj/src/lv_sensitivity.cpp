#include "gridflex/lv_sensitivity.hpp"

#include "gridflex/csv.hpp"
#include "gridflex/error.hpp"

#include <cmath>
#include <map>
#include <ostream>

namespace gridflex {

int LvNetwork::node_index(const std::string& nid) const
{
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].id == nid)
            return static_cast<int>(i);
    return -1;
}

int LvNetwork::branch_index(const std::string& name) const
{
    for (std::size_t b = 0; b < branches.size(); ++b)
        if (branches[b].name() == name)
            return static_cast<int>(b);
    return -1;
}

double LvNetwork::rating() const
{
    double acc = 0.0;
    for (const Branch& b : branches)
        if (b.from == root || b.to == root)
            acc += b.imax;
    return acc;
}

ValidationReport validate_lv(const LvNetwork& lv) { return validate_radial(lv.nodes, lv.branches, lv.root); }

LvLoadFlow lv_load_flow(const LvNetwork& lv, const LvInjection& inj, double root_voltage)
{
    const RadialTopology topo = build_topology(lv.nodes, lv.branches, lv.root);
    MvState s;
    try {
        s = radial_power_flow(lv.nodes, lv.branches, topo, inj.p, inj.q, root_voltage * root_voltage);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NonConvergence)
            throw;
        throw Error(ErrorCode::OracleFailure, "LV grid " + lv.id + ": " + e.what());
    }
    LvLoadFlow out;
    out.V.resize(s.v.size());
    out.I.resize(s.l.size());
    for (std::size_t i = 0; i < s.v.size(); ++i)
        out.V[i] = std::sqrt(s.v[i]);
    for (std::size_t b = 0; b < s.l.size(); ++b)
        out.I[b] = std::sqrt(s.l[b]);
    out.p_sl = s.p_slack;
    out.q_sl = s.q_slack;
    return out;
}

LvOperatingPoint lv_operating_point(const LvNetwork& lv, const LvInjection& inj, double root_voltage,
                                    int step)
{
    const LvLoadFlow lf = lv_load_flow(lv, inj, root_voltage);
    LvOperatingPoint op;
    op.v0 = lf.V;
    op.i0 = lf.I;
    op.drop.resize(lf.V.size());
    for (std::size_t i = 0; i < lf.V.size(); ++i)
        op.drop[i] = root_voltage - lf.V[i];
    op.root_voltage = root_voltage;
    op.p_sl0 = lf.p_sl;
    op.q_sl0 = lf.q_sl;
    op.step = step;
    return op;
}

LvLayout LvLayout::of(const LvNetwork& lv)
{
    LvLayout l;
    l.lv_grid = lv.id;
    for (const Node& n : lv.nodes) {
        l.nodes.push_back(n.id);
        if (n.id != lv.root)
            l.injectors.push_back(n.id);
    }
    for (const Branch& b : lv.branches)
        l.branches.push_back(b.name());
    return l;
}

int LvLayout::injector_index(const std::string& node) const
{
    for (std::size_t k = 0; k < injectors.size(); ++k)
        if (injectors[k] == node)
            return static_cast<int>(k);
    return -1;
}

SensitivityModel coefficients_from_reference(const LvNetwork& lv, const LvInjection& inj,
                                             double root_voltage, const ReferenceOptions& opt)
{
    if (!(opt.epsilon > 0.0))
        throw Error(ErrorCode::InvalidPerturbation, "perturbation must be positive");
    SensitivityModel m;
    m.layout = LvLayout::of(lv);
    const int nn = static_cast<int>(lv.nodes.size()), nb = static_cast<int>(lv.branches.size());
    const int nk = static_cast<int>(m.layout.injectors.size());
    m.kvp.setZero(nn, nk);
    m.kvq.setZero(nn, nk);
    m.kip.setZero(nb, nk);
    m.kiq.setZero(nb, nk);
    if (opt.transformer_terms) {
        m.tpp.setZero(nk);
        m.tpq.setZero(nk);
        m.tqp.setZero(nk);
        m.tqq.setZero(nk);
    }
    const double h = opt.epsilon;
    for (int k = 0; k < nk; ++k) {
        const int node = lv.node_index(m.layout.injectors[k]);
        for (int which = 0; which < 2; ++which) {
            LvInjection up = inj, dn = inj;
            std::vector<double>& u = which == 0 ? up.p : up.q;
            std::vector<double>& d = which == 0 ? dn.p : dn.q;
            u[node] += h;
            d[node] -= h;
            const LvLoadFlow fu = lv_load_flow(lv, up, root_voltage);
            const LvLoadFlow fd = lv_load_flow(lv, dn, root_voltage);
            Eigen::MatrixXd& kv = which == 0 ? m.kvp : m.kvq;
            Eigen::MatrixXd& ki = which == 0 ? m.kip : m.kiq;
            for (int i = 0; i < nn; ++i)
                kv(i, k) = (fu.V[i] - fd.V[i]) / (2.0 * h);
            for (int b = 0; b < nb; ++b)
                ki(b, k) = (fu.I[b] - fd.I[b]) / (2.0 * h);
            if (opt.transformer_terms) {
                (which == 0 ? m.tpp : m.tpq)(k) = (fu.p_sl - fd.p_sl) / (2.0 * h);
                (which == 0 ? m.tqp : m.tqq)(k) = (fu.q_sl - fd.q_sl) / (2.0 * h);
            }
        }
    }
    m.stamp = "reference:" + lv.id + ":V0=" + csv::format(root_voltage);
    return m;
}

MeasurementFit coefficients_from_measurements(const LvLayout& layout,
                                              const std::vector<MeasurementSample>& samples,
                                              double ridge)
{
    const int nk = static_cast<int>(layout.injectors.size());
    const int nn = static_cast<int>(layout.nodes.size()), nb = static_cast<int>(layout.branches.size());
    const int ns = static_cast<int>(samples.size());
    if (ns < 2 * nk)
        throw Error(ErrorCode::Underdetermined, std::to_string(ns) + " samples for " +
                                                    std::to_string(nk) + " injecting nodes; need at least " +
                                                    std::to_string(2 * nk));
    Eigen::MatrixXd X(ns, 2 * nk), Y(ns, nn + nb);
    for (int s = 0; s < ns; ++s) {
        const MeasurementSample& m = samples[s];
        if (m.dP.size() != nk || m.dQ.size() != nk || m.dV.size() != nn || m.dI.size() != nb)
            throw Error(ErrorCode::InvalidArgument, "sample " + std::to_string(s) + " has wrong dimensions");
        if (!m.dP.allFinite() || !m.dQ.allFinite() || !m.dV.allFinite() || !m.dI.allFinite())
            throw Error(ErrorCode::InvalidArgument, "sample " + std::to_string(s) + " is not finite");
        X.row(s) << m.dP.transpose(), m.dQ.transpose();
        Y.row(s) << m.dV.transpose(), m.dI.transpose();
    }

    Eigen::MatrixXd K;  // (2nk) x (nn+nb)
    if (ridge > 0.0) {
        const Eigen::MatrixXd N = X.transpose() * X + ridge * Eigen::MatrixXd::Identity(2 * nk, 2 * nk);
        K = N.ldlt().solve(X.transpose() * Y);
    } else {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
        qr.setThreshold(1e-10);
        if (qr.rank() < 2 * nk) {
            std::string cols;
            for (int c = static_cast<int>(qr.rank()); c < 2 * nk; ++c) {
                const int j = qr.colsPermutation().indices()(c);
                cols += (cols.empty() ? "" : ",") + std::string(j < nk ? "P:" : "Q:") +
                        layout.injectors[j % nk];
            }
            throw Error(ErrorCode::RankDeficient, "collinear injections; deficient columns {" + cols + "}");
        }
        K = qr.solve(Y);
    }

    MeasurementFit fit;
    fit.model.layout = layout;
    fit.model.kvp = K.block(0, 0, nk, nn).transpose();
    fit.model.kvq = K.block(nk, 0, nk, nn).transpose();
    fit.model.kip = K.block(0, nn, nk, nb).transpose();
    fit.model.kiq = K.block(nk, nn, nk, nb).transpose();
    fit.model.stamp = "measurements:" + layout.lv_grid + ":n=" + std::to_string(ns);
    const Eigen::MatrixXd R = Y - X * K;
    const Eigen::VectorXd rms = (R.colwise().squaredNorm() / ns).cwiseSqrt().transpose();
    fit.rms_v = rms.head(nn);
    fit.rms_i = rms.tail(nb);
    return fit;
}

LvState predict_state(const SensitivityModel& model, const LvOperatingPoint& op,
                      const Eigen::VectorXd& dp, const Eigen::VectorXd& dq)
{
    const auto nk = static_cast<Eigen::Index>(model.layout.injectors.size());
    if (dp.size() != nk || dq.size() != nk)
        throw Error(ErrorCode::InvalidArgument, "delta vectors must have one entry per injector");
    const Eigen::VectorXd dv = model.kvp * dp + model.kvq * dq;
    const Eigen::VectorXd di = model.kip * dp + model.kiq * dq;
    LvState st;
    st.V.resize(op.v0.size());
    st.I.resize(op.i0.size());
    for (std::size_t i = 0; i < op.v0.size(); ++i)
        st.V[i] = op.v0[i] + dv(static_cast<Eigen::Index>(i));
    for (std::size_t b = 0; b < op.i0.size(); ++b)
        st.I[b] = op.i0[b] + di(static_cast<Eigen::Index>(b));
    if (model.has_transformer_terms()) {
        st.dp_sl = model.tpp.dot(dp) + model.tpq.dot(dq);
        st.dq_sl = model.tqp.dot(dp) + model.tqq.dot(dq);
    } else {
        st.dp_sl = -dp.sum();
        st.dq_sl = -dq.sum();
    }
    return st;
}

LvState predict_state(const SensitivityModel& model, const LvOperatingPoint& op,
                      const std::vector<NodeDelta>& deltas)
{
    const auto nk = static_cast<Eigen::Index>(model.layout.injectors.size());
    Eigen::VectorXd dp = Eigen::VectorXd::Zero(nk), dq = Eigen::VectorXd::Zero(nk);
    for (const NodeDelta& d : deltas) {
        const int k = model.layout.injector_index(d.node);
        if (k < 0)
            throw Error(ErrorCode::UnknownNode,
                        "node " + d.node + " is not an injector of LV grid " + model.layout.lv_grid);
        dp(k) += d.dp;
        dq(k) += d.dq;
    }
    return predict_state(model, op, dp, dq);
}

bool within_trust_region(const LvNetwork& lv, const Eigen::VectorXd& dp, double fraction)
{
    const double radius = fraction * lv.rating();
    return dp.size() == 0 || dp.cwiseAbs().maxCoeff() <= radius;
}

void write_coefficients(std::ostream& os, const SensitivityModel& m)
{
    csv::Writer w(os);
    w.row({"observed", "injector", "kvp", "kvq", "kip", "kiq"});
    const auto& L = m.layout;
    for (std::size_t i = 0; i < L.nodes.size(); ++i)
        for (std::size_t k = 0; k < L.injectors.size(); ++k)
            w.row({L.nodes[i], L.injectors[k], csv::format(m.kvp(i, k)), csv::format(m.kvq(i, k)), "0", "0"});
    for (std::size_t b = 0; b < L.branches.size(); ++b)
        for (std::size_t k = 0; k < L.injectors.size(); ++k)
            w.row({L.branches[b], L.injectors[k], "0", "0", csv::format(m.kip(b, k)), csv::format(m.kiq(b, k))});
    if (m.has_transformer_terms()) {
        for (std::size_t k = 0; k < L.injectors.size(); ++k) {
            w.row({"transformer_p", L.injectors[k], csv::format(m.tpp(k)), csv::format(m.tpq(k)), "0", "0"});
            w.row({"transformer_q", L.injectors[k], csv::format(m.tqp(k)), csv::format(m.tqq(k)), "0", "0"});
        }
    }
}

SensitivityModel read_coefficients(std::istream& is, const LvLayout& layout, const std::string& source)
{
    const csv::Table t = csv::read(is, source);
    const int c_obs = t.column("observed"), c_inj = t.column("injector");
    const int c_vp = t.column("kvp"), c_vq = t.column("kvq"), c_ip = t.column("kip"), c_iq = t.column("kiq");
    std::map<std::string, int> node, branch;
    for (std::size_t i = 0; i < layout.nodes.size(); ++i)
        node[layout.nodes[i]] = static_cast<int>(i);
    for (std::size_t b = 0; b < layout.branches.size(); ++b)
        branch[layout.branches[b]] = static_cast<int>(b);
    const auto nk = static_cast<Eigen::Index>(layout.injectors.size());

    SensitivityModel m;
    m.layout = layout;
    m.kvp.setZero(static_cast<Eigen::Index>(layout.nodes.size()), nk);
    m.kvq = m.kvp;
    m.kip.setZero(static_cast<Eigen::Index>(layout.branches.size()), nk);
    m.kiq = m.kip;
    bool transformer = false;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string& obs = t.cell(r, c_obs);
        const int k = layout.injector_index(t.cell(r, c_inj));
        if (k < 0)
            throw Error(ErrorCode::CrossRefError, source + ":" + std::to_string(t.line_of_row[r]) +
                                                      ": unknown injector " + t.cell(r, c_inj));
        if (auto it = node.find(obs); it != node.end()) {
            m.kvp(it->second, k) = t.number(r, c_vp);
            m.kvq(it->second, k) = t.number(r, c_vq);
        } else if (auto jt = branch.find(obs); jt != branch.end()) {
            m.kip(jt->second, k) = t.number(r, c_ip);
            m.kiq(jt->second, k) = t.number(r, c_iq);
        } else if (obs == "transformer_p" || obs == "transformer_q") {
            if (!transformer) {
                m.tpp.setZero(nk);
                m.tpq.setZero(nk);
                m.tqp.setZero(nk);
                m.tqq.setZero(nk);
                transformer = true;
            }
            (obs == "transformer_p" ? m.tpp : m.tqp)(k) = t.number(r, c_vp);
            (obs == "transformer_p" ? m.tpq : m.tqq)(k) = t.number(r, c_vq);
        } else {
            throw Error(ErrorCode::CrossRefError, source + ":" + std::to_string(t.line_of_row[r]) +
                                                      ": unknown observed element " + obs);
        }
    }
    m.stamp = "file:" + source;
    return m;
}

} // namespace gridflex
