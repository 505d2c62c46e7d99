// Homogeneous self-dual primal-dual interior-point method for
//   min c'x  s.t.  A x = b,  G x + s = h,  s in K
// where K is a product of a nonnegative orthant and second-order cones.
// Nesterov-Todd scaling, Mehrotra predictor-corrector, Ruiz equilibration,
// static regularization of the quasi-definite KKT system with iterative
// refinement.

#include "gridflex/conic.hpp"
#include "gridflex/error.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace gridflex::conic {

namespace {

using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct StandardForm {
    int n = 0;
    SpMat A; // p x n
    SpMat G; // m x n
    VectorXd c, b, h;
    int m_lin = 0;
    std::vector<int> soc_dims;
    std::vector<std::string> eq_tags;
    std::vector<std::string> ineq_tags;
    double obj_const = 0.0;

    int p() const { return static_cast<int>(A.rows()); }
    int m() const { return static_cast<int>(G.rows()); }
};

StandardForm to_standard_form(const ConicProgram& prog)
{
    StandardForm sf;
    sf.n = static_cast<int>(prog.num_variables());
    std::vector<Triplet> at, gt;
    std::vector<double> bv, hv;

    auto add_eq = [&](const AffineExpr& e, const std::string& tag) {
        const int r = static_cast<int>(bv.size());
        for (const Term& t : e.terms())
            at.emplace_back(r, t.var, t.coeff);
        bv.push_back(-e.constant());
        sf.eq_tags.push_back(tag);
    };
    // expr <= 0  ->  G x + s = h with G = coeffs, h = -constant
    auto add_le = [&](const AffineExpr& e, const std::string& tag) {
        const int r = static_cast<int>(hv.size());
        for (const Term& t : e.terms())
            gt.emplace_back(r, t.var, t.coeff);
        hv.push_back(-e.constant());
        sf.ineq_tags.push_back(tag);
    };
    // s = member(x)  ->  G = -coeffs, h = constant
    auto add_member = [&](const AffineExpr& e, double scale, const std::string& tag) {
        const int r = static_cast<int>(hv.size());
        for (const Term& t : e.terms())
            gt.emplace_back(r, t.var, -scale * t.coeff);
        hv.push_back(scale * e.constant());
        sf.ineq_tags.push_back(tag);
    };

    const auto& vars = prog.variables();
    for (int i = 0; i < sf.n; ++i) {
        const Variable& v = vars[static_cast<std::size_t>(i)];
        if (v.lower == v.upper) {
            add_eq(AffineExpr(Var{i}).add_constant(-v.lower), "fix:" + v.name);
            continue;
        }
        if (std::isfinite(v.lower))
            add_le(AffineExpr(Var{i}, -1.0).add_constant(v.lower), "lb:" + v.name);
        if (std::isfinite(v.upper))
            add_le(AffineExpr(Var{i}).add_constant(-v.upper), "ub:" + v.name);
    }
    for (const Row& r : prog.rows()) {
        switch (r.sense) {
        case Sense::Equal: add_eq(r.expr, r.tag); break;
        case Sense::LessEqual: add_le(r.expr, r.tag); break;
        case Sense::GreaterEqual: add_le(-1.0 * r.expr, r.tag); break;
        }
    }
    sf.m_lin = static_cast<int>(hv.size());
    for (const Cone& cone : prog.cones()) {
        if (cone.kind == ConeKind::Standard) {
            for (const auto& mem : cone.members)
                add_member(mem, 1.0, cone.tag);
            sf.soc_dims.push_back(static_cast<int>(cone.members.size()));
        } else {
            // u w >= |z|^2  <=>  (u + w, u - w, 2 z) in SOC
            add_member(cone.members[0] + cone.members[1], 1.0, cone.tag);
            add_member(cone.members[0] - cone.members[1], 1.0, cone.tag);
            for (std::size_t k = 2; k < cone.members.size(); ++k)
                add_member(cone.members[k], 2.0, cone.tag);
            sf.soc_dims.push_back(static_cast<int>(cone.members.size()));
        }
    }

    sf.A.resize(static_cast<Eigen::Index>(bv.size()), sf.n);
    sf.A.setFromTriplets(at.begin(), at.end());
    sf.G.resize(static_cast<Eigen::Index>(hv.size()), sf.n);
    sf.G.setFromTriplets(gt.begin(), gt.end());
    sf.b = Eigen::Map<VectorXd>(bv.data(), static_cast<Eigen::Index>(bv.size()));
    sf.h = Eigen::Map<VectorXd>(hv.data(), static_cast<Eigen::Index>(hv.size()));
    sf.c = Eigen::Map<const VectorXd>(prog.objective().data(), sf.n);
    sf.obj_const = prog.objective_constant();
    return sf;
}

// ---------------------------------------------------------------------------
// Cone algebra over the product K = R+^m_lin x Q^{q_1} x ... x Q^{q_k}.

struct SocScaling {
    Eigen::MatrixXd W;
    Eigen::MatrixXd Winv;
};

class ConeProduct {
public:
    ConeProduct(int m_lin, std::vector<int> soc_dims) : m_lin_(m_lin), dims_(std::move(soc_dims))
    {
        int off = m_lin_;
        for (int q : dims_) {
            offsets_.push_back(off);
            off += q;
        }
        m_ = off;
    }

    int m() const { return m_; }
    int degree() const { return m_lin_ + static_cast<int>(dims_.size()); }
    int m_lin() const { return m_lin_; }
    const std::vector<int>& dims() const { return dims_; }
    const std::vector<int>& offsets() const { return offsets_; }

    VectorXd identity() const
    {
        VectorXd e = VectorXd::Zero(m_);
        e.head(m_lin_).setOnes();
        for (int off : offsets_)
            e(off) = 1.0;
        return e;
    }

    /// Largest t with u - t e still in the cone interior boundary sense, i.e. min "eigenvalue".
    double min_eig(const VectorXd& u) const
    {
        double lo = kInf;
        for (int i = 0; i < m_lin_; ++i)
            lo = std::min(lo, u(i));
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            const int off = offsets_[k], q = dims_[k];
            lo = std::min(lo, u(off) - u.segment(off + 1, q - 1).norm());
        }
        return lo;
    }

    VectorXd jordan(const VectorXd& u, const VectorXd& v) const
    {
        VectorXd w(m_);
        w.head(m_lin_) = u.head(m_lin_).cwiseProduct(v.head(m_lin_));
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            const int off = offsets_[k], q = dims_[k];
            w(off) = u.segment(off, q).dot(v.segment(off, q));
            w.segment(off + 1, q - 1) =
                u(off) * v.segment(off + 1, q - 1) + v(off) * u.segment(off + 1, q - 1);
        }
        return w;
    }

    /// x solving lambda o x = w.
    VectorXd jordan_div(const VectorXd& lambda, const VectorXd& w) const
    {
        VectorXd x(m_);
        x.head(m_lin_) = w.head(m_lin_).cwiseQuotient(lambda.head(m_lin_));
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            const int off = offsets_[k], q = dims_[k];
            const double l0 = lambda(off);
            const auto l1 = lambda.segment(off + 1, q - 1);
            const double rho = l0 * l0 - l1.squaredNorm();
            const double x0 = (l0 * w(off) - l1.dot(w.segment(off + 1, q - 1))) / rho;
            x(off) = x0;
            x.segment(off + 1, q - 1) = (w.segment(off + 1, q - 1) - x0 * l1) / l0;
        }
        return x;
    }

    /// Max step in [0, cap] keeping u + a du inside the cone.
    double max_step(const VectorXd& u, const VectorXd& du, double cap) const
    {
        double a = cap;
        for (int i = 0; i < m_lin_; ++i)
            if (du(i) < 0.0)
                a = std::min(a, -u(i) / du(i));
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            const int off = offsets_[k], q = dims_[k];
            a = std::min(a, soc_step(u.segment(off, q), du.segment(off, q), cap));
        }
        return a;
    }

    /// NT scaling. Returns false if s or z left the cone interior.
    bool scaling(const VectorXd& s, const VectorXd& z, VectorXd& lin_w, std::vector<SocScaling>& soc,
                 VectorXd& lambda) const
    {
        lin_w.resize(m_lin_);
        lambda.resize(m_);
        for (int i = 0; i < m_lin_; ++i) {
            if (!(s(i) > 0.0) || !(z(i) > 0.0))
                return false;
            lin_w(i) = std::sqrt(s(i) / z(i));
            lambda(i) = std::sqrt(s(i) * z(i));
        }
        soc.resize(dims_.size());
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            const int off = offsets_[k], q = dims_[k];
            const VectorXd sk = s.segment(off, q), zk = z.segment(off, q);
            const double s_j = jnorm2(sk), z_j = jnorm2(zk);
            if (!(sk(0) > 0.0) || !(zk(0) > 0.0) || !(s_j > 0.0) || !(z_j > 0.0))
                return false;
            const double sa = std::sqrt(s_j), za = std::sqrt(z_j);
            const VectorXd sbar = sk / sa, zbar = zk / za;
            const double gamma = std::sqrt(std::max(0.5 * (1.0 + sbar.dot(zbar)), 1e-300));
            VectorXd wbar = sbar;
            wbar.tail(q - 1) -= zbar.tail(q - 1);
            wbar(0) += zbar(0);
            wbar /= 2.0 * gamma;
            VectorXd v = wbar;
            v(0) += 1.0;
            v /= std::sqrt(2.0 * (wbar(0) + 1.0));
            const double beta = std::sqrt(sa / za);
            Eigen::MatrixXd J = Eigen::MatrixXd::Identity(q, q);
            J.bottomRightCorner(q - 1, q - 1) *= -1.0;
            const VectorXd Jv = J * v;
            soc[k].W = beta * (2.0 * v * v.transpose() - J);
            soc[k].Winv = (2.0 * Jv * Jv.transpose() - J) / beta;
            lambda.segment(off, q) = soc[k].W * zk;
        }
        return true;
    }

private:
    static double jnorm2(const VectorXd& u)
    {
        const double t = u(0), r = u.tail(u.size() - 1).norm();
        return (t - r) * (t + r);
    }

    static double soc_step(const VectorXd& u, const VectorXd& d, double cap)
    {
        // f(a) = (u0 + a d0)^2 - |u1 + a d1|^2 = qa a^2 + 2 qb a + qc, qc > 0
        const double r1 = u.tail(u.size() - 1).norm();
        const double qc = (u(0) - r1) * (u(0) + r1);
        const double qa = d(0) * d(0) - d.tail(d.size() - 1).squaredNorm();
        const double qb = u(0) * d(0) - u.tail(u.size() - 1).dot(d.tail(d.size() - 1));
        double a = cap;
        if (d(0) < 0.0)
            a = std::min(a, -u(0) / d(0));
        if (qc <= 0.0)
            return 0.0;
        double root = kInf;
        if (std::abs(qa) < 1e-300) {
            if (qb < 0.0)
                root = -qc / (2.0 * qb);
        } else {
            const double disc = qb * qb - qa * qc;
            if (disc >= 0.0) {
                const double sq = std::sqrt(disc);
                const double qq = -(qb + (qb >= 0.0 ? sq : -sq));
                const double r_a = qq / qa;
                const double r_b = qq != 0.0 ? qc / qq : kInf;
                for (double r : {r_a, r_b})
                    if (r > 0.0)
                        root = std::min(root, r);
            }
        }
        return std::min(a, root);
    }

    int m_lin_;
    std::vector<int> dims_;
    std::vector<int> offsets_;
    int m_ = 0;
};

// ---------------------------------------------------------------------------

struct Equilibration {
    VectorXd col; // D
    VectorXd eq;  // E
    VectorXd ineq; // F
    double cscale = 1.0;
};

Equilibration equilibrate(StandardForm& sf, const ConeProduct& K, int passes)
{
    Equilibration eq{VectorXd::Ones(sf.n), VectorXd::Ones(sf.p()), VectorXd::Ones(sf.m()), 1.0};
    auto safe_sqrt = [](double a) { return a < 1e-8 ? 1.0 : std::sqrt(a); };
    for (int pass = 0; pass < passes; ++pass) {
        VectorXd cn = VectorXd::Zero(sf.n), an = VectorXd::Zero(sf.p()), gn = VectorXd::Zero(sf.m());
        for (int j = 0; j < sf.n; ++j) {
            for (SpMat::InnerIterator it(sf.A, j); it; ++it) {
                cn(j) = std::max(cn(j), std::abs(it.value()));
                an(it.row()) = std::max(an(it.row()), std::abs(it.value()));
            }
            for (SpMat::InnerIterator it(sf.G, j); it; ++it) {
                cn(j) = std::max(cn(j), std::abs(it.value()));
                gn(it.row()) = std::max(gn(it.row()), std::abs(it.value()));
            }
        }
        // one factor per cone block keeps the scaled slack inside the cone
        for (std::size_t k = 0; k < K.dims().size(); ++k) {
            const int off = K.offsets()[k], q = K.dims()[k];
            gn.segment(off, q).setConstant(gn.segment(off, q).maxCoeff());
        }
        cn = cn.unaryExpr(safe_sqrt);
        an = an.unaryExpr(safe_sqrt);
        gn = gn.unaryExpr(safe_sqrt);
        for (int j = 0; j < sf.n; ++j) {
            for (SpMat::InnerIterator it(sf.A, j); it; ++it)
                it.valueRef() /= an(it.row()) * cn(j);
            for (SpMat::InnerIterator it(sf.G, j); it; ++it)
                it.valueRef() /= gn(it.row()) * cn(j);
        }
        eq.col = eq.col.cwiseProduct(cn);
        eq.eq = eq.eq.cwiseProduct(an);
        eq.ineq = eq.ineq.cwiseProduct(gn);
    }
    sf.c = sf.c.cwiseQuotient(eq.col);
    sf.b = sf.b.cwiseQuotient(eq.eq);
    sf.h = sf.h.cwiseQuotient(eq.ineq);
    const double cmax = sf.c.size() > 0 ? sf.c.cwiseAbs().maxCoeff() : 0.0;
    if (cmax > 0.0) {
        eq.cscale = cmax;
        sf.c /= cmax;
    }
    return eq;
}

double inf_norm(const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

class KktSystem {
public:
    KktSystem(const StandardForm& sf, const ConeProduct& K, double delta)
        : sf_(sf), K_(K), delta_(delta), n_(sf.n), p_(sf.p()), m_(sf.m())
    {
        const int dim = n_ + p_ + m_;
        std::vector<Triplet> trip;
        trip.reserve(static_cast<std::size_t>(n_ + p_ + sf.A.nonZeros() + sf.G.nonZeros() + m_ * 4));
        for (int i = 0; i < n_; ++i)
            trip.emplace_back(i, i, delta_);
        for (int j = 0; j < n_; ++j) {
            for (SpMat::InnerIterator it(sf.A, j); it; ++it)
                trip.emplace_back(n_ + static_cast<int>(it.row()), j, it.value());
            for (SpMat::InnerIterator it(sf.G, j); it; ++it)
                trip.emplace_back(n_ + p_ + static_cast<int>(it.row()), j, it.value());
        }
        for (int i = 0; i < p_; ++i)
            trip.emplace_back(n_ + i, n_ + i, -delta_);
        for (int i = 0; i < K.m_lin(); ++i)
            trip.emplace_back(n_ + p_ + i, n_ + p_ + i, -1.0);
        for (std::size_t k = 0; k < K.dims().size(); ++k) {
            const int off = n_ + p_ + K.offsets()[k], q = K.dims()[k];
            for (int c = 0; c < q; ++c)
                for (int r = c; r < q; ++r)
                    trip.emplace_back(off + r, off + c, r == c ? -1.0 : 0.0);
        }
        mat_.resize(dim, dim);
        mat_.setFromTriplets(trip.begin(), trip.end());
        mat_.makeCompressed();
        ldlt_.analyzePattern(mat_);
    }

    /// Installs -W^2 in the (3,3) block and factors. Identity scaling when lin_w is empty.
    bool factor(const VectorXd* lin_w, const std::vector<SocScaling>* soc)
    {
        const int base = n_ + p_;
        for (int i = 0; i < K_.m_lin(); ++i) {
            const double w = lin_w ? (*lin_w)(i) : 1.0;
            mat_.coeffRef(base + i, base + i) = -w * w;
        }
        for (std::size_t k = 0; k < K_.dims().size(); ++k) {
            const int off = base + K_.offsets()[k], q = K_.dims()[k];
            Eigen::MatrixXd W2 = soc ? Eigen::MatrixXd((*soc)[k].W * (*soc)[k].W)
                                     : Eigen::MatrixXd::Identity(q, q);
            for (int c = 0; c < q; ++c)
                for (int r = c; r < q; ++r)
                    mat_.coeffRef(off + r, off + c) = -W2(r, c);
        }
        ldlt_.factorize(mat_);
        return ldlt_.info() == Eigen::Success;
    }

    VectorXd solve(const VectorXd& rhs, int refinement) const
    {
        VectorXd d = ldlt_.solve(rhs);
        const double rnorm = inf_norm(rhs);
        for (int it = 0; it < refinement; ++it) {
            const VectorXd err = rhs - apply_true(d);
            if (inf_norm(err) <= 1e-14 * (1.0 + rnorm))
                break;
            d += ldlt_.solve(err);
        }
        return d;
    }

private:
    VectorXd apply_true(const VectorXd& d) const
    {
        VectorXd out = mat_.selfadjointView<Eigen::Lower>() * d;
        out.head(n_) -= delta_ * d.head(n_);
        out.segment(n_, p_) += delta_ * d.segment(n_, p_);
        return out;
    }

    const StandardForm& sf_;
    const ConeProduct& K_;
    double delta_;
    int n_, p_, m_;
    SpMat mat_;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

struct Metrics {
    double pres = 0.0, dres = 0.0, pcost = 0.0, dcost = 0.0, gap = 0.0, relgap = 0.0;
};

/// Builds a Solution from a scaled iterate (x, y, z, s already divided by tau).
struct Unscaler {
    const StandardForm& orig;
    const Equilibration& eq;

    void unscale(const VectorXd& xs, const VectorXd& ys, const VectorXd& zs, const VectorXd& ss,
                 VectorXd& x, VectorXd& y, VectorXd& z, VectorXd& s) const
    {
        x = xs.cwiseQuotient(eq.col);
        y = eq.cscale * ys.cwiseQuotient(eq.eq);
        z = eq.cscale * zs.cwiseQuotient(eq.ineq);
        s = ss.cwiseProduct(eq.ineq);
    }

    // With normalize set the cost vector and duals are divided by the cost scale so
    // stopping decisions do not depend on the magnitude of the objective.
    Metrics metrics(const VectorXd& x, const VectorXd& yin, const VectorXd& zin, const VectorXd& s,
                    bool normalize = false) const
    {
        Metrics mt;
        const double cs = normalize ? eq.cscale : 1.0;
        const VectorXd c = orig.c / cs, y = yin / cs, z = zin / cs;
        const double bn = inf_norm(orig.b), hn = inf_norm(orig.h), cn = inf_norm(c);
        const double rp_eq = orig.p() ? inf_norm(orig.A * x - orig.b) / (1.0 + bn) : 0.0;
        const double rp_in = orig.m() ? inf_norm(orig.G * x + s - orig.h) / (1.0 + hn) : 0.0;
        mt.pres = std::max(rp_eq, rp_in);
        VectorXd rd = c;
        if (orig.p())
            rd += orig.A.transpose() * y;
        if (orig.m())
            rd += orig.G.transpose() * z;
        mt.dres = inf_norm(rd) / (1.0 + cn);
        mt.pcost = c.dot(x);
        mt.dcost = -(orig.p() ? orig.b.dot(y) : 0.0) - (orig.m() ? orig.h.dot(z) : 0.0);
        mt.gap = orig.m() ? s.dot(z) : 0.0;
        mt.relgap = std::abs(mt.gap) / (1.0 + std::min(std::abs(mt.pcost), std::abs(mt.dcost)));
        return mt;
    }
};

Solution trivial_solution(const StandardForm& sf)
{
    // no variables: every row is a constant
    Solution sol;
    sol.x = {};
    sol.objective = sf.obj_const;
    sol.dual_objective = sf.obj_const;
    bool ok = sf.b.size() == 0 || inf_norm(sf.b) <= 1e-12;
    for (int i = 0; i < sf.m_lin && ok; ++i)
        ok = sf.h(i) >= -1e-12;
    int off = sf.m_lin;
    for (int q : sf.soc_dims) {
        ok = ok && sf.h(off) + 1e-12 >= sf.h.segment(off + 1, q - 1).norm();
        off += q;
    }
    sol.status = ok ? Status::Optimal : Status::Infeasible;
    if (!ok)
        sol.diagnostics = "constant constraint violated";
    return sol;
}

std::string worst_row(const StandardForm& sf, const VectorXd& x, const VectorXd& s)
{
    std::ostringstream os;
    double worst = -1.0;
    std::string tag;
    if (sf.p()) {
        const VectorXd r = sf.A * x - sf.b;
        for (int i = 0; i < r.size(); ++i)
            if (std::abs(r(i)) > worst) {
                worst = std::abs(r(i));
                tag = sf.eq_tags[static_cast<std::size_t>(i)];
            }
    }
    if (sf.m()) {
        const VectorXd r = sf.G * x + s - sf.h;
        for (int i = 0; i < r.size(); ++i)
            if (std::abs(r(i)) > worst) {
                worst = std::abs(r(i));
                tag = sf.ineq_tags[static_cast<std::size_t>(i)];
            }
    }
    os << "worst row '" << tag << "' residual " << worst;
    return os.str();
}

} // namespace

Solution solve(const ConicProgram& prog, const SolverSettings& settings)
{
    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    };

    const StandardForm orig = to_standard_form(prog);
    if (orig.n == 0) {
        Solution sol = trivial_solution(orig);
        sol.wall_time_s = elapsed();
        return sol;
    }

    StandardForm sf = orig;
    const ConeProduct K(sf.m_lin, sf.soc_dims);
    const Equilibration eq = equilibrate(sf, K, settings.equilibration_passes);
    const Unscaler unscaler{orig, eq};

    const int n = sf.n, p = sf.p(), m = sf.m();
    const int D = K.degree();
    KktSystem kkt(sf, K, settings.static_regularization);
    const int refine = settings.refinement_steps;

    auto pack = [&](const VectorXd& top, const VectorXd& mid, const VectorXd& bot) {
        VectorXd r(n + p + m);
        r << top, mid, bot;
        return r;
    };

    Solution sol;
    auto finish = [&](Status st, const VectorXd& xs, const VectorXd& ys, const VectorXd& zs,
                      const VectorXd& ss, int iter) {
        VectorXd x, y, z, s;
        unscaler.unscale(xs, ys, zs, ss, x, y, z, s);
        const Metrics mt = unscaler.metrics(x, y, z, s);
        const Metrics mn = unscaler.metrics(x, y, z, s, true);
        sol.status = st;
        sol.x.assign(x.data(), x.data() + x.size());
        sol.objective = mt.pcost + orig.obj_const;
        sol.dual_objective = mt.dcost + orig.obj_const;
        sol.primal_residual = mn.pres;
        sol.dual_residual = mn.dres;
        sol.gap = mn.relgap;
        sol.iterations = iter;
        if (st == Status::NumericalFailure && sol.diagnostics.empty())
            sol.diagnostics = worst_row(orig, x, s);
        sol.wall_time_s = elapsed();
        return sol;
    };

    // --- initial point
    if (!kkt.factor(nullptr, nullptr)) {
        sol.diagnostics = "initial KKT factorization failed";
        return finish(Status::NumericalFailure, VectorXd::Zero(n), VectorXd::Zero(p),
                      VectorXd::Zero(m), VectorXd::Zero(m), 0);
    }
    const VectorXd e = K.identity();
    VectorXd x, y, z, s;
    {
        const VectorXd d = kkt.solve(pack(VectorXd::Zero(n), sf.b, sf.h), refine);
        x = d.head(n);
        s = -d.tail(m);
        const double a = -K.min_eig(s);
        if (m > 0 && a >= 0.0)
            s += (1.0 + a) * e;
    }
    {
        const VectorXd d = kkt.solve(pack(-sf.c, VectorXd::Zero(p), VectorXd::Zero(m)), refine);
        y = d.segment(n, p);
        z = d.tail(m);
        const double a = -K.min_eig(z);
        if (m > 0 && a >= 0.0)
            z += (1.0 + a) * e;
    }
    double tau = 1.0, kappa = 1.0;

    VectorXd lin_w;
    std::vector<SocScaling> soc;
    VectorXd lambda;

    auto apply_W = [&](const VectorXd& v) {
        VectorXd out(m);
        out.head(K.m_lin()) = lin_w.cwiseProduct(v.head(K.m_lin()));
        for (std::size_t k = 0; k < K.dims().size(); ++k) {
            const int off = K.offsets()[k], q = K.dims()[k];
            out.segment(off, q) = soc[k].W * v.segment(off, q);
        }
        return out;
    };
    auto apply_Winv = [&](const VectorXd& v) {
        VectorXd out(m);
        out.head(K.m_lin()) = v.head(K.m_lin()).cwiseQuotient(lin_w);
        for (std::size_t k = 0; k < K.dims().size(); ++k) {
            const int off = K.offsets()[k], q = K.dims()[k];
            out.segment(off, q) = soc[k].Winv * v.segment(off, q);
        }
        return out;
    };

    const Tolerances tol = settings.tol;
    int stall = 0;
    for (int iter = 0; iter <= settings.max_iterations; ++iter) {
        // residuals of the homogeneous model
        VectorXd rx = sf.c * tau;
        if (p)
            rx += sf.A.transpose() * y;
        if (m)
            rx += sf.G.transpose() * z;
        const VectorXd ry = p ? VectorXd(sf.b * tau - sf.A * x) : VectorXd(0);
        const VectorXd rz = m ? VectorXd(sf.h * tau - sf.G * x - s) : VectorXd(0);
        const double rtau = -sf.c.dot(x) - (p ? sf.b.dot(y) : 0.0) - (m ? sf.h.dot(z) : 0.0) - kappa;

        // termination on the unscaled problem
        {
            VectorXd xo, yo, zo, so;
            unscaler.unscale(x / tau, y / tau, z / tau, s / tau, xo, yo, zo, so);
            const Metrics mt = unscaler.metrics(xo, yo, zo, so, true);
            if (mt.pres <= tol.feas && mt.dres <= tol.feas && mt.relgap <= tol.gap)
                return finish(Status::Optimal, x / tau, y / tau, z / tau, s / tau, iter);

            VectorXd xr, yr, zr, sr;
            unscaler.unscale(x, y, z, s, xr, yr, zr, sr);
            const double cn = inf_norm(orig.c);
            const double by_hz = (p ? orig.b.dot(yr) : 0.0) + (m ? orig.h.dot(zr) : 0.0);
            // certificates only once the embedding points away from optimality
            const bool ray = kappa > tau;
            if (ray && by_hz < 0.0) {
                VectorXd at = VectorXd::Zero(n);
                if (p)
                    at += orig.A.transpose() * yr;
                if (m)
                    at += orig.G.transpose() * zr;
                if (inf_norm(at) / -by_hz <= tol.feas) {
                    std::ostringstream os;
                    os << "dual ray: b'y + h'z = " << by_hz / zr.cwiseAbs().sum()
                       << " (normalized), |A'y + G'z| / |b'y + h'z| = " << inf_norm(at) / -by_hz;
                    sol.diagnostics = os.str();
                    return finish(Status::Infeasible, x / tau, y / tau, z / tau, s / tau, iter);
                }
            }
            const double cx = orig.c.dot(xr);
            if (ray && cx < 0.0 && cn > 0.0) {
                double viol = 0.0;
                if (p)
                    viol = inf_norm(orig.A * xr);
                if (m)
                    viol = std::max(viol, inf_norm(orig.G * xr + sr));
                if (viol / -cx <= tol.feas) {
                    std::ostringstream os;
                    os << "primal ray: c'x = " << cx / inf_norm(xr) << " (normalized)";
                    sol.diagnostics = os.str();
                    return finish(Status::Unbounded, x / tau, y / tau, z / tau, s / tau, iter);
                }
            }
            if (iter == settings.max_iterations || stall >= 3) {
                sol.diagnostics = (stall >= 3 ? "step length stalled; " : "iteration limit; ");
                VectorXd xs, ys, zs2, ss;
                unscaler.unscale(x / tau, y / tau, z / tau, s / tau, xs, ys, zs2, ss);
                sol.diagnostics += worst_row(orig, xs, ss);
                return finish(Status::NumericalFailure, x / tau, y / tau, z / tau, s / tau, iter);
            }
        }

        if (!K.scaling(s, z, lin_w, soc, lambda) || !kkt.factor(&lin_w, &soc)) {
            sol.diagnostics = "scaling or KKT factorization failed; ";
            VectorXd xs, ys, zs2, ss;
            unscaler.unscale(x / tau, y / tau, z / tau, s / tau, xs, ys, zs2, ss);
            sol.diagnostics += worst_row(orig, xs, ss);
            return finish(Status::NumericalFailure, x / tau, y / tau, z / tau, s / tau, iter);
        }

        const VectorXd d1 = kkt.solve(pack(-sf.c, sf.b, sf.h), refine);
        const double denom = kappa / tau - sf.c.dot(d1.head(n)) - (p ? sf.b.dot(d1.segment(n, p)) : 0.0) -
                             (m ? sf.h.dot(d1.tail(m)) : 0.0);

        struct Dir {
            VectorXd dx, dy, dz, ds;
            double dtau, dkappa;
        };
        auto direction = [&](double sigma_c, const VectorXd& ds_rhs, double dk_rhs) {
            const double f = 1.0 - sigma_c;
            const VectorXd w_div = m ? apply_W(K.jordan_div(lambda, ds_rhs)) : VectorXd(0);
            const VectorXd d2 = kkt.solve(pack(-f * rx, f * ry, f * rz - w_div), refine);
            const double num = -f * rtau + dk_rhs / tau + sf.c.dot(d2.head(n)) +
                               (p ? sf.b.dot(d2.segment(n, p)) : 0.0) + (m ? sf.h.dot(d2.tail(m)) : 0.0);
            Dir dir;
            dir.dtau = num / denom;
            const VectorXd d = d2 + dir.dtau * d1;
            dir.dx = d.head(n);
            dir.dy = d.segment(n, p);
            dir.dz = d.tail(m);
            dir.ds = m ? VectorXd(w_div - apply_W(apply_W(dir.dz))) : VectorXd(0);
            dir.dkappa = (dk_rhs - kappa * dir.dtau) / tau;
            return dir;
        };
        auto step_length = [&](const Dir& d) {
            double a = 1.0;
            if (m) {
                a = K.max_step(s, d.ds, a);
                a = K.max_step(z, d.dz, a);
            }
            if (d.dtau < 0.0)
                a = std::min(a, -tau / d.dtau);
            if (d.dkappa < 0.0)
                a = std::min(a, -kappa / d.dkappa);
            return a;
        };

        const double mu = ((m ? s.dot(z) : 0.0) + tau * kappa) / (D + 1);
        const VectorXd lam2 = m ? K.jordan(lambda, lambda) : VectorXd(0);
        const Dir aff = direction(0.0, -lam2, -kappa * tau);
        const double a_aff = step_length(aff);
        const double sigma = std::clamp(std::pow(1.0 - a_aff, 3), 0.0, 1.0);

        VectorXd ds_rhs = -lam2;
        if (m) {
            ds_rhs -= K.jordan(apply_Winv(aff.ds), apply_W(aff.dz));
            ds_rhs += sigma * mu * e;
        }
        const double dk_rhs = -kappa * tau - aff.dkappa * aff.dtau + sigma * mu;
        const Dir cmb = direction(sigma, ds_rhs, dk_rhs);
        const double a = std::min(1.0, 0.99 * step_length(cmb));
        stall = a < 1e-10 ? stall + 1 : 0;

        x += a * cmb.dx;
        y += a * cmb.dy;
        z += a * cmb.dz;
        s += a * cmb.ds;
        tau += a * cmb.dtau;
        kappa += a * cmb.dkappa;
    }
    return sol; // unreachable
}

} // namespace gridflex::conic
