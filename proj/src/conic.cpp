#include "gridflex/conic.hpp"

#include "gridflex/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace gridflex::conic {

AffineExpr& AffineExpr::add(const AffineExpr& other, double scale)
{
    for (const Term& t : other.terms_)
        if (t.coeff * scale != 0.0)
            terms_.push_back({t.var, t.coeff * scale});
    constant_ += scale * other.constant_;
    return *this;
}

double AffineExpr::evaluate(const std::vector<double>& x) const
{
    double acc = constant_;
    for (const Term& t : terms_)
        acc += t.coeff * x[static_cast<std::size_t>(t.var)];
    return acc;
}

AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a.add(b, 1.0); }
AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a.add(b, -1.0); }
AffineExpr operator*(double s, const AffineExpr& a)
{
    AffineExpr out;
    out.add(a, s);
    return out;
}

std::string to_string(Status s)
{
    switch (s) {
    case Status::Optimal: return "Optimal";
    case Status::Infeasible: return "Infeasible";
    case Status::Unbounded: return "Unbounded";
    case Status::NumericalFailure: return "NumericalFailure";
    }
    return "Unknown";
}

Var ConicProgram::add_variable(std::string name, double lower, double upper)
{
    if (std::isnan(lower) || std::isnan(upper))
        throw Error(ErrorCode::InvalidArgument, "NaN bound on variable " + name);
    vars_.push_back({std::move(name), lower, upper});
    objective_.push_back(0.0);
    return Var{static_cast<int>(vars_.size()) - 1};
}

void ConicProgram::check_expr(const AffineExpr& e) const
{
    for (const Term& t : e.terms()) {
        if (t.var < 0 || static_cast<std::size_t>(t.var) >= vars_.size())
            throw Error(ErrorCode::MissingVariable,
                        "expression references unknown variable " + std::to_string(t.var));
        if (!std::isfinite(t.coeff))
            throw Error(ErrorCode::InvalidArgument, "non-finite coefficient");
    }
    if (!std::isfinite(e.constant()))
        throw Error(ErrorCode::InvalidArgument, "non-finite constant");
}

void ConicProgram::add_row(AffineExpr expr, Sense sense, std::string tag)
{
    check_expr(expr);
    rows_.push_back({std::move(expr), sense, std::move(tag)});
}

void ConicProgram::add_row(AffineExpr lhs, Sense sense, double rhs, std::string tag)
{
    lhs.add_constant(-rhs);
    add_row(std::move(lhs), sense, std::move(tag));
}

void ConicProgram::add_cone(ConeKind kind, std::vector<AffineExpr> members, std::string tag)
{
    const std::size_t min_size = kind == ConeKind::Standard ? 2 : 3;
    if (members.size() < min_size)
        throw Error(ErrorCode::InvalidArgument, "cone " + tag + " has too few members");
    for (const auto& m : members)
        check_expr(m);
    cones_.push_back({kind, std::move(members), std::move(tag)});
}

void ConicProgram::add_objective(Var v, double coeff)
{
    if (v.index < 0 || static_cast<std::size_t>(v.index) >= vars_.size())
        throw Error(ErrorCode::MissingVariable, "objective references unknown variable");
    objective_[static_cast<std::size_t>(v.index)] += coeff;
}

void ConicProgram::add_objective(const AffineExpr& e, double scale)
{
    check_expr(e);
    for (const Term& t : e.terms())
        objective_[static_cast<std::size_t>(t.var)] += scale * t.coeff;
    objective_constant_ += scale * e.constant();
}

std::size_t ConicProgram::count_rows(Sense sense) const
{
    return static_cast<std::size_t>(
        std::count_if(rows_.begin(), rows_.end(), [&](const Row& r) { return r.sense == sense; }));
}

std::size_t ConicProgram::count_rows_tagged(std::string_view prefix) const
{
    return static_cast<std::size_t>(std::count_if(rows_.begin(), rows_.end(), [&](const Row& r) {
        return std::string_view(r.tag).substr(0, prefix.size()) == prefix;
    }));
}

std::size_t ConicProgram::count_cones(ConeKind kind) const
{
    return static_cast<std::size_t>(
        std::count_if(cones_.begin(), cones_.end(), [&](const Cone& c) { return c.kind == kind; }));
}

std::size_t ConicProgram::count_cones_tagged(std::string_view prefix) const
{
    return static_cast<std::size_t>(std::count_if(cones_.begin(), cones_.end(), [&](const Cone& c) {
        return std::string_view(c.tag).substr(0, prefix.size()) == prefix;
    }));
}

double ConicProgram::objective_value(const std::vector<double>& x) const
{
    double acc = objective_constant_;
    for (std::size_t i = 0; i < objective_.size(); ++i)
        acc += objective_[i] * x[i];
    return acc;
}

namespace {

void write_expr(std::ostream& os, const AffineExpr& e)
{
    for (const Term& t : e.terms())
        os << ' ' << t.coeff << '*' << 'x' << t.var;
    os << " + " << e.constant();
}

} // namespace

void ConicProgram::dump(std::ostream& os) const
{
    const auto old_precision = os.precision(17);
    os << "VARIABLES " << vars_.size() << '\n';
    for (std::size_t i = 0; i < vars_.size(); ++i)
        os << 'x' << i << ' ' << vars_[i].name << ' ' << vars_[i].lower << ' ' << vars_[i].upper
           << ' ' << objective_[i] << '\n';
    os << "OBJCONST " << objective_constant_ << '\n';
    os << "ROWS " << rows_.size() << '\n';
    for (const Row& r : rows_) {
        os << (r.sense == Sense::Equal ? "EQ" : r.sense == Sense::LessEqual ? "LE" : "GE") << ' '
           << (r.tag.empty() ? "-" : r.tag) << " :";
        write_expr(os, r.expr);
        os << '\n';
    }
    os << "CONES " << cones_.size() << '\n';
    for (const Cone& c : cones_) {
        os << (c.kind == ConeKind::Standard ? "SOC" : "RSOC") << ' ' << (c.tag.empty() ? "-" : c.tag)
           << ' ' << c.members.size() << '\n';
        for (const auto& m : c.members) {
            os << "  :";
            write_expr(os, m);
            os << '\n';
        }
    }
    os.precision(old_precision);
}

double Residuals::max() const { return std::max({bounds, linear, cones}); }

Residuals residuals(const ConicProgram& prog, const std::vector<double>& x)
{
    if (x.size() != prog.num_variables())
        throw Error(ErrorCode::MissingVariable,
                    "candidate has " + std::to_string(x.size()) + " values, program has " +
                        std::to_string(prog.num_variables()) + " variables");
    Residuals res;
    const auto& vars = prog.variables();
    for (std::size_t i = 0; i < vars.size(); ++i) {
        if (std::isfinite(vars[i].lower))
            res.bounds = std::max(res.bounds, vars[i].lower - x[i]);
        if (std::isfinite(vars[i].upper))
            res.bounds = std::max(res.bounds, x[i] - vars[i].upper);
    }
    for (const Row& r : prog.rows()) {
        const double v = r.expr.evaluate(x);
        double viol = 0.0;
        switch (r.sense) {
        case Sense::Equal: viol = std::abs(v); break;
        case Sense::LessEqual: viol = std::max(0.0, v); break;
        case Sense::GreaterEqual: viol = std::max(0.0, -v); break;
        }
        if (viol > res.linear) {
            res.linear = viol;
            res.worst_linear_tag = r.tag;
        }
    }
    for (const Cone& c : prog.cones()) {
        double viol = 0.0;
        if (c.kind == ConeKind::Standard) {
            double sq = 0.0;
            for (std::size_t k = 1; k < c.members.size(); ++k) {
                const double m = c.members[k].evaluate(x);
                sq += m * m;
            }
            viol = std::max(0.0, std::sqrt(sq) - c.members[0].evaluate(x));
        } else {
            const double u = c.members[0].evaluate(x);
            const double w = c.members[1].evaluate(x);
            double sq = (u - w) * (u - w);
            for (std::size_t k = 2; k < c.members.size(); ++k) {
                const double m = c.members[k].evaluate(x);
                sq += 4.0 * m * m;
            }
            viol = std::max(0.0, 0.5 * (std::sqrt(sq) - (u + w)));
        }
        if (viol > res.cones) {
            res.cones = viol;
            res.worst_cone_tag = c.tag;
        }
    }
    return res;
}

} // namespace gridflex::conic
