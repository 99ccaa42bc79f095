#ifndef STFE_LP_HPP
#define STFE_LP_HPP

#include <cstddef>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace stfe {

constexpr double kLpInf = std::numeric_limits<double>::infinity();

enum class Comparator { Le, Eq, Ge };
enum class ObjectiveSense { Minimize, Maximize };

/// Dimension mismatch, non-finite coefficient or crossed bounds.
class MalformedLpError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The solver lost numerical control (iteration limit, residual blow-up).
class LpNumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LpConstraint {
    std::vector<double> row;
    Comparator cmp = Comparator::Le;
    double rhs = 0.0;
};

class LinearProgram {
public:
    /// Existing constraints get a zero coefficient for the new variable.
    std::size_t add_variable(double lo, double hi, double cost = 0.0, std::string name = {});
    /// Dense row over all current variables. Returns the constraint id.
    std::size_t add_constraint(std::vector<double> row, Comparator cmp, double rhs);
    std::size_t add_sparse_constraint(const std::vector<std::pair<std::size_t, double>>& terms, Comparator cmp,
                                      double rhs);

    void set_cost(std::size_t var, double cost);
    void set_objective(std::vector<double> costs);
    void set_sense(ObjectiveSense s) { sense_ = s; }
    void set_bounds(std::size_t var, double lo, double hi);

    std::size_t num_variables() const { return lo_.size(); }
    std::size_t num_constraints() const { return rows_.size(); }
    const LpConstraint& constraint(std::size_t i) const { return rows_[i]; }
    const std::vector<LpConstraint>& constraints() const { return rows_; }
    double lower(std::size_t j) const { return lo_[j]; }
    double upper(std::size_t j) const { return hi_[j]; }
    const std::vector<double>& costs() const { return cost_; }
    ObjectiveSense sense() const { return sense_; }
    const std::string& name(std::size_t j) const { return names_[j]; }

    /// Objective at x (in the stated sense, no negation).
    double objective_at(const std::vector<double>& x) const;
    /// Largest constraint or bound violation at x.
    double max_violation(const std::vector<double>& x) const;

    void validate() const;

private:
    std::vector<double> lo_, hi_, cost_;
    std::vector<std::string> names_;
    std::vector<LpConstraint> rows_;
    ObjectiveSense sense_ = ObjectiveSense::Minimize;
};

inline std::size_t add_constraint(LinearProgram& lp, std::vector<double> row, Comparator cmp, double rhs)
{
    return lp.add_constraint(std::move(row), cmp, rhs);
}

struct LpOptimal {
    double value = 0.0;
    std::vector<double> point;
};
struct LpInfeasible {};
struct LpUnbounded {};

using LpOutcome = std::variant<LpOptimal, LpInfeasible, LpUnbounded>;

/// Boundary for swapping in another solver.
class LpSolver {
public:
    virtual ~LpSolver() = default;
    virtual LpOutcome solve(const LinearProgram& lp) = 0;
};

/// Two-phase bounded-variable tableau simplex. Dantzig pricing with a Bland
/// fallback under degeneracy.
class DenseSimplex : public LpSolver {
public:
    LpOutcome solve(const LinearProgram& lp) override;
};

LpOutcome solve(const LinearProgram& lp);

/// Keeps its tableau between solves: rows added after an optimal solve are
/// re-optimized by dual simplex from the previous basis.
class IncrementalSimplex {
public:
    explicit IncrementalSimplex(LinearProgram lp);
    ~IncrementalSimplex();
    IncrementalSimplex(IncrementalSimplex&&) noexcept;
    IncrementalSimplex& operator=(IncrementalSimplex&&) noexcept;

    LpOutcome solve();
    std::size_t add_constraint(std::vector<double> row, Comparator cmp, double rhs);
    const LinearProgram& program() const { return lp_; }
    /// Pivots spent by the last solve() call.
    std::size_t last_iterations() const;

private:
    struct Tableau;
    LinearProgram lp_;
    std::unique_ptr<Tableau> tab_;
};

/// CPLEX-style LP text (objective, constraints, bounds), for debugging with
/// external solvers.
std::string to_lp_format(const LinearProgram& lp);

} // namespace stfe

#endif // STFE_LP_HPP
