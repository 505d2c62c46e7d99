#pragma once

// Standard-form convex programs over linear rows, variable bounds and
// second-order cones, plus an embedded primal-dual interior-point solver.

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace gridflex::conic {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Var {
    int index = -1;
    friend bool operator==(Var, Var) = default;
};

struct Term {
    int var;
    double coeff;
};

/// Sparse affine expression sum(coeff * x[var]) + constant.
class AffineExpr {
public:
    AffineExpr() = default;
    AffineExpr(double constant) : constant_(constant) {}
    AffineExpr(Var v, double coeff = 1.0) { add(v, coeff); }

    AffineExpr& add(Var v, double coeff)
    {
        if (coeff != 0.0)
            terms_.push_back({v.index, coeff});
        return *this;
    }
    AffineExpr& add(const AffineExpr& other, double scale = 1.0);
    AffineExpr& add_constant(double c)
    {
        constant_ += c;
        return *this;
    }

    const std::vector<Term>& terms() const { return terms_; }
    double constant() const { return constant_; }

    double evaluate(const std::vector<double>& x) const;

private:
    std::vector<Term> terms_;
    double constant_ = 0.0;
};

AffineExpr operator+(AffineExpr a, const AffineExpr& b);
AffineExpr operator-(AffineExpr a, const AffineExpr& b);
AffineExpr operator*(double s, const AffineExpr& a);

enum class Sense { Equal, LessEqual, GreaterEqual };

/// expr (sense) 0
struct Row {
    AffineExpr expr;
    Sense sense;
    std::string tag;
};

enum class ConeKind {
    /// members[0] >= || members[1..] ||
    Standard,
    /// members[0] * members[1] >= || members[2..] ||^2, members[0], members[1] >= 0
    Rotated,
};

struct Cone {
    ConeKind kind;
    std::vector<AffineExpr> members;
    std::string tag;
};

struct Variable {
    std::string name;
    double lower = -kInf;
    double upper = kInf;
};

/// Minimization program. Built incrementally, then treated as an immutable value.
class ConicProgram {
public:
    Var add_variable(std::string name, double lower = -kInf, double upper = kInf);
    void add_row(AffineExpr expr, Sense sense, std::string tag = {});
    /// lhs (sense) rhs
    void add_row(AffineExpr lhs, Sense sense, double rhs, std::string tag = {});
    void add_cone(ConeKind kind, std::vector<AffineExpr> members, std::string tag = {});
    void add_objective(Var v, double coeff);
    void add_objective(const AffineExpr& e, double scale = 1.0);

    const std::vector<Variable>& variables() const { return vars_; }
    const std::vector<Row>& rows() const { return rows_; }
    const std::vector<Cone>& cones() const { return cones_; }
    const std::vector<double>& objective() const { return objective_; }
    double objective_constant() const { return objective_constant_; }

    std::size_t num_variables() const { return vars_.size(); }
    std::size_t count_rows(Sense sense) const;
    std::size_t count_rows_tagged(std::string_view prefix) const;
    std::size_t count_cones(ConeKind kind) const;
    std::size_t count_cones_tagged(std::string_view prefix) const;

    double objective_value(const std::vector<double>& x) const;

    /// Plain-text standard-form listing; see docs/program_listing.md.
    void dump(std::ostream& os) const;

private:
    void check_expr(const AffineExpr& e) const;

    std::vector<Variable> vars_;
    std::vector<Row> rows_;
    std::vector<Cone> cones_;
    std::vector<double> objective_;
    double objective_constant_ = 0.0;
};

enum class Status { Optimal, Infeasible, Unbounded, NumericalFailure };

std::string to_string(Status s);

struct Tolerances {
    double feas = 1e-6;
    double gap = 1e-6;
};

struct SolverSettings {
    Tolerances tol{};
    int max_iterations = 120;
    int equilibration_passes = 12;
    double static_regularization = 1e-8;
    int refinement_steps = 4;
};

struct Solution {
    Status status = Status::NumericalFailure;
    std::vector<double> x;
    double objective = 0.0;
    double dual_objective = 0.0;
    // relative measures on the problem with the cost vector scaled to unit size
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    int iterations = 0;
    double wall_time_s = 0.0;
    /// Certificate summary for Infeasible / Unbounded, worst row for NumericalFailure.
    std::string diagnostics;
};

Solution solve(const ConicProgram& prog, const SolverSettings& settings = {});

struct Residuals {
    double bounds = 0.0;
    double linear = 0.0;
    double cones = 0.0;
    std::string worst_linear_tag;
    std::string worst_cone_tag;

    double max() const;
};

/// Max violation per constraint class for a candidate point.
/// Throws Error(MissingVariable) when the candidate does not cover every variable.
Residuals residuals(const ConicProgram& prog, const std::vector<double>& candidate);

} // namespace gridflex::conic
