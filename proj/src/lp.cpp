#include "stfe/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

namespace stfe {

// ---------------------------------------------------------------- model

std::size_t LinearProgram::add_variable(double lo, double hi, double cost, std::string name)
{
    if (std::isnan(lo) || std::isnan(hi) || lo > hi || lo == kLpInf || hi == -kLpInf)
        throw MalformedLpError("variable bounds are invalid");
    if (!std::isfinite(cost)) throw MalformedLpError("objective coefficients must be finite");
    lo_.push_back(lo);
    hi_.push_back(hi);
    cost_.push_back(cost);
    if (name.empty()) name = "x" + std::to_string(lo_.size() - 1);
    names_.push_back(std::move(name));
    for (auto& c : rows_) c.row.push_back(0.0);
    return lo_.size() - 1;
}

std::size_t LinearProgram::add_constraint(std::vector<double> row, Comparator cmp, double rhs)
{
    if (row.size() != num_variables())
        throw MalformedLpError("constraint row has " + std::to_string(row.size()) + " entries, program has " +
                               std::to_string(num_variables()) + " variables");
    for (double v : row)
        if (!std::isfinite(v)) throw MalformedLpError("constraint coefficients must be finite");
    if (!std::isfinite(rhs)) throw MalformedLpError("right-hand side must be finite");
    rows_.push_back({std::move(row), cmp, rhs});
    return rows_.size() - 1;
}

std::size_t LinearProgram::add_sparse_constraint(const std::vector<std::pair<std::size_t, double>>& terms,
                                                 Comparator cmp, double rhs)
{
    std::vector<double> row(num_variables(), 0.0);
    for (const auto& [j, v] : terms) {
        if (j >= row.size()) throw MalformedLpError("constraint references an unknown variable");
        row[j] += v;
    }
    return add_constraint(std::move(row), cmp, rhs);
}

void LinearProgram::set_cost(std::size_t var, double cost)
{
    if (var >= num_variables()) throw MalformedLpError("unknown variable");
    if (!std::isfinite(cost)) throw MalformedLpError("objective coefficients must be finite");
    cost_[var] = cost;
}

void LinearProgram::set_objective(std::vector<double> costs)
{
    if (costs.size() != num_variables()) throw MalformedLpError("objective has the wrong length");
    for (double c : costs)
        if (!std::isfinite(c)) throw MalformedLpError("objective coefficients must be finite");
    cost_ = std::move(costs);
}

void LinearProgram::set_bounds(std::size_t var, double lo, double hi)
{
    if (var >= num_variables()) throw MalformedLpError("unknown variable");
    if (std::isnan(lo) || std::isnan(hi) || lo > hi || lo == kLpInf || hi == -kLpInf)
        throw MalformedLpError("variable bounds are invalid");
    lo_[var] = lo;
    hi_[var] = hi;
}

double LinearProgram::objective_at(const std::vector<double>& x) const
{
    double v = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) v += cost_[j] * x[j];
    return v;
}

double LinearProgram::max_violation(const std::vector<double>& x) const
{
    double worst = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) worst = std::max({worst, lo_[j] - x[j], x[j] - hi_[j]});
    for (const auto& c : rows_) {
        double s = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) s += c.row[j] * x[j];
        if (c.cmp != Comparator::Ge) worst = std::max(worst, s - c.rhs);
        if (c.cmp != Comparator::Le) worst = std::max(worst, c.rhs - s);
    }
    return worst;
}

void LinearProgram::validate() const
{
    for (std::size_t j = 0; j < num_variables(); ++j)
        if (std::isnan(lo_[j]) || std::isnan(hi_[j]) || lo_[j] > hi_[j]) throw MalformedLpError("variable bounds are invalid");
    for (const auto& c : rows_)
        if (c.row.size() != num_variables()) throw MalformedLpError("constraint row length differs from variable count");
}

// ---------------------------------------------------------------- tableau

namespace {

constexpr double kFeasTol = 1e-9;
constexpr double kPriceTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr double kInfeasibleSum = 1e-7;
constexpr int kDegenerateSwitch = 50;

enum class Status : std::uint8_t { Basic, AtLower, AtUpper, Free };

} // namespace

// Every row reads x_B(r) + sum_j T[r][j] x_j = 0 over the nonbasic columns;
// column n + i is the slack of constraint i, equal to the row's activity.
struct IncrementalSimplex::Tableau {
    std::size_t n_struct = 0;
    std::vector<std::vector<double>> T;
    std::vector<double> d;
    std::vector<double> lo, hi, val, cost;
    std::vector<Status> status;
    std::vector<std::size_t> basis;
    std::size_t iterations = 0;
    std::size_t limit = 0;
    bool optimal = false;

    std::size_t ncols() const { return lo.size(); }
    std::size_t nrows() const { return T.size(); }

    std::size_t add_column(double l, double h, double c)
    {
        lo.push_back(l);
        hi.push_back(h);
        cost.push_back(c);
        val.push_back(0.0);
        status.push_back(Status::AtLower);
        d.push_back(0.0);
        for (auto& row : T) row.push_back(0.0);
        return lo.size() - 1;
    }

    void place_nonbasic(std::size_t j)
    {
        if (std::isfinite(lo[j])) {
            status[j] = Status::AtLower;
            val[j] = lo[j];
        } else if (std::isfinite(hi[j])) {
            status[j] = Status::AtUpper;
            val[j] = hi[j];
        } else {
            status[j] = Status::Free;
            val[j] = 0.0;
        }
    }

    void set_limit() { limit = iterations + 100000 + 50 * (nrows() + ncols()); }

    void tick()
    {
        if (++iterations > limit) throw LpNumericalError("simplex iteration limit reached");
        if (iterations % 256 == 0) recompute_basics();
    }

    void pivot(std::size_t r, std::size_t q)
    {
        std::vector<double>& pr = T[r];
        const double inv = 1.0 / pr[q];
        for (double& v : pr) v *= inv;
        pr[q] = 1.0;
        const std::size_t n = ncols();
        for (std::size_t i = 0; i < nrows(); ++i) {
            if (i == r) continue;
            std::vector<double>& ri = T[i];
            const double f = ri[q];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j)
                if (pr[j] != 0.0) ri[j] -= f * pr[j];
            ri[q] = 0.0;
        }
        const double f = d[q];
        if (f != 0.0) {
            for (std::size_t j = 0; j < n; ++j)
                if (pr[j] != 0.0) d[j] -= f * pr[j];
            d[q] = 0.0;
        }
        basis[r] = q;
        status[q] = Status::Basic;
    }

    void recompute_basics()
    {
        const std::size_t n = ncols();
        for (std::size_t i = 0; i < nrows(); ++i) {
            double s = 0.0;
            const auto& row = T[i];
            for (std::size_t j = 0; j < n; ++j)
                if (status[j] != Status::Basic && row[j] != 0.0) s -= row[j] * val[j];
            val[basis[i]] = s;
        }
    }

    void reprice()
    {
        d = cost;
        for (std::size_t i = 0; i < nrows(); ++i) {
            const double cb = cost[basis[i]];
            if (cb == 0.0) continue;
            for (std::size_t j = 0; j < ncols(); ++j) d[j] -= cb * T[i][j];
        }
        for (std::size_t i = 0; i < nrows(); ++i) d[basis[i]] = 0.0;
    }

    enum class PrimalResult { Optimal, Unbounded };

    PrimalResult primal()
    {
        int degenerate = 0;
        for (;;) {
            const bool bland = degenerate > kDegenerateSwitch;
            std::size_t q = SIZE_MAX;
            int dir = 0;
            double best = 0.0;
            for (std::size_t j = 0; j < ncols(); ++j) {
                if (status[j] == Status::Basic || lo[j] == hi[j]) continue;
                int dj = 0;
                if ((status[j] == Status::AtLower || status[j] == Status::Free) && d[j] < -kPriceTol)
                    dj = 1;
                else if ((status[j] == Status::AtUpper || status[j] == Status::Free) && d[j] > kPriceTol)
                    dj = -1;
                if (!dj) continue;
                if (bland) {
                    q = j;
                    dir = dj;
                    break;
                }
                if (std::abs(d[j]) > best) {
                    best = std::abs(d[j]);
                    q = j;
                    dir = dj;
                }
            }
            if (q == SIZE_MAX) return PrimalResult::Optimal;

            double theta = std::isfinite(lo[q]) && std::isfinite(hi[q]) ? hi[q] - lo[q] : kLpInf;
            std::size_t leave = SIZE_MAX;
            bool leave_to_lower = false;
            double leave_alpha = 0.0;
            for (std::size_t i = 0; i < nrows(); ++i) {
                const double alpha = -dir * T[i][q];
                const std::size_t b = basis[i];
                double lim;
                if (alpha < -kPivotTol && std::isfinite(lo[b]))
                    lim = (val[b] - lo[b]) / -alpha;
                else if (alpha > kPivotTol && std::isfinite(hi[b]))
                    lim = (hi[b] - val[b]) / alpha;
                else
                    continue;
                lim = std::max(lim, 0.0);
                bool take = lim < theta - 1e-12;
                if (!take && leave != SIZE_MAX && lim <= theta + 1e-12)
                    take = bland ? b < basis[leave] : std::abs(alpha) > std::abs(leave_alpha);
                if (take) {
                    theta = lim;
                    leave = i;
                    leave_to_lower = alpha < 0;
                    leave_alpha = alpha;
                }
            }
            if (theta == kLpInf) return PrimalResult::Unbounded;

            tick();
            val[q] += dir * theta;
            for (std::size_t i = 0; i < nrows(); ++i) val[basis[i]] -= dir * T[i][q] * theta;
            if (leave == SIZE_MAX) {
                status[q] = dir > 0 ? Status::AtUpper : Status::AtLower;
                val[q] = dir > 0 ? hi[q] : lo[q];
            } else {
                const std::size_t b = basis[leave];
                status[b] = leave_to_lower ? Status::AtLower : Status::AtUpper;
                val[b] = leave_to_lower ? lo[b] : hi[b];
                pivot(leave, q);
            }
            degenerate = theta <= 1e-12 ? degenerate + 1 : 0;
        }
    }

    enum class DualResult { Optimal, Infeasible };

    DualResult dual()
    {
        int degenerate = 0;
        for (;;) {
            std::size_t r = SIZE_MAX;
            double worst = kFeasTol;
            for (std::size_t i = 0; i < nrows(); ++i) {
                const std::size_t b = basis[i];
                const double v = std::max(lo[b] - val[b], val[b] - hi[b]);
                if (v > worst) {
                    worst = v;
                    r = i;
                }
            }
            if (r == SIZE_MAX) return DualResult::Optimal;

            const std::size_t b = basis[r];
            const bool up = val[b] < lo[b];
            const bool bland = degenerate > kDegenerateSwitch;
            std::size_t q = SIZE_MAX;
            int dir = 0;
            double best_ratio = kLpInf, best_abs = 0.0;
            for (std::size_t j = 0; j < ncols(); ++j) {
                if (status[j] == Status::Basic || lo[j] == hi[j]) continue;
                const double a = T[r][j];
                if (std::abs(a) <= kPivotTol) continue;
                // x_B(r) moves by -a * dir per unit step of column j
                int dj;
                if (status[j] == Status::AtLower)
                    dj = 1;
                else if (status[j] == Status::AtUpper)
                    dj = -1;
                else
                    dj = (a < 0) == up ? 1 : -1;
                const double move = -a * dj;
                if (up ? move <= 0 : move >= 0) continue;
                const double ratio = std::abs(d[j]) / std::abs(a);
                bool take = ratio < best_ratio - 1e-12;
                if (!take && q != SIZE_MAX && ratio <= best_ratio + 1e-12)
                    take = bland ? false : std::abs(a) > best_abs;
                if (take) {
                    best_ratio = ratio;
                    best_abs = std::abs(a);
                    q = j;
                    dir = dj;
                }
            }
            if (q == SIZE_MAX) return DualResult::Infeasible;

            tick();
            const double delta = up ? lo[b] - val[b] : val[b] - hi[b];
            const double theta = delta / std::abs(T[r][q]);
            val[q] += dir * theta;
            for (std::size_t i = 0; i < nrows(); ++i) val[basis[i]] -= dir * T[i][q] * theta;
            status[b] = up ? Status::AtLower : Status::AtUpper;
            val[b] = up ? lo[b] : hi[b];
            pivot(r, q);
            degenerate = best_ratio <= 1e-12 ? degenerate + 1 : 0;
        }
    }

    /// Appends constraint `row` (over the structural columns) with its slack basic.
    void append_row(const std::vector<double>& a, Comparator cmp, double rhs)
    {
        const auto [sl, sh] = slack_bounds(cmp, rhs);
        const std::size_t sc = add_column(sl, sh, 0.0);
        std::vector<double> row(ncols(), 0.0);
        double activity = 0.0;
        for (std::size_t j = 0; j < n_struct; ++j) {
            row[j] = -a[j];
            activity += a[j] * val[j];
        }
        row[sc] = 1.0;
        for (std::size_t i = 0; i < nrows(); ++i) {
            const double c = row[basis[i]];
            if (c == 0.0) continue;
            const auto& ti = T[i];
            for (std::size_t j = 0; j < row.size(); ++j)
                if (ti[j] != 0.0) row[j] -= c * ti[j];
            row[basis[i]] = 0.0;
        }
        T.push_back(std::move(row));
        basis.push_back(sc);
        status[sc] = Status::Basic;
        val[sc] = activity;
    }

    static std::pair<double, double> slack_bounds(Comparator cmp, double rhs)
    {
        switch (cmp) {
        case Comparator::Le: return {-kLpInf, rhs};
        case Comparator::Ge: return {rhs, kLpInf};
        case Comparator::Eq: return {rhs, rhs};
        }
        return {rhs, rhs};
    }

    void set_phase2_costs(const LinearProgram& lp)
    {
        std::fill(cost.begin(), cost.end(), 0.0);
        const double sign = lp.sense() == ObjectiveSense::Maximize ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n_struct; ++j) cost[j] = sign * lp.costs()[j];
        reprice();
    }

    /// Cold start: slack basis, artificials on rows the starting point violates.
    enum class ColdResult { Optimal, Infeasible, Unbounded };

    ColdResult cold(const LinearProgram& lp)
    {
        const std::size_t n = lp.num_variables();
        const std::size_t m = lp.num_constraints();
        n_struct = n;
        T.clear();
        basis.assign(m, 0);
        lo.clear(), hi.clear(), val.clear(), cost.clear(), status.clear(), d.clear();
        for (std::size_t j = 0; j < n; ++j) {
            add_column(lp.lower(j), lp.upper(j), 0.0);
            place_nonbasic(j);
        }
        std::vector<double> activity(m, 0.0);
        std::vector<int> art_sign(m, 0);
        for (std::size_t i = 0; i < m; ++i) {
            const auto& c = lp.constraint(i);
            for (std::size_t j = 0; j < n; ++j) activity[i] += c.row[j] * val[j];
            const auto [sl, sh] = slack_bounds(c.cmp, c.rhs);
            add_column(sl, sh, 0.0);
        }
        std::size_t n_art = 0;
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t sc = n + i;
            if (activity[i] < lo[sc] - kFeasTol || activity[i] > hi[sc] + kFeasTol) {
                art_sign[i] = activity[i] > hi[sc] ? 1 : -1;
                ++n_art;
            }
        }
        const std::size_t first_art = ncols();
        T.assign(m, std::vector<double>(first_art + n_art, 0.0));
        for (std::size_t k = 0; k < n_art; ++k) {
            lo.push_back(0.0);
            hi.push_back(kLpInf);
            cost.push_back(1.0);
            val.push_back(0.0);
            status.push_back(Status::Basic);
            d.push_back(0.0);
        }
        std::size_t art = first_art;
        for (std::size_t i = 0; i < m; ++i) {
            const auto& c = lp.constraint(i);
            const std::size_t sc = n + i;
            auto& row = T[i];
            if (art_sign[i] == 0) {
                for (std::size_t j = 0; j < n; ++j) row[j] = -c.row[j];
                row[sc] = 1.0;
                basis[i] = sc;
                status[sc] = Status::Basic;
                val[sc] = activity[i];
            } else {
                // artificial = sign * (activity - slack), slack parked at the violated bound
                const double s = art_sign[i];
                const double bound = s > 0 ? hi[sc] : lo[sc];
                status[sc] = s > 0 ? Status::AtUpper : Status::AtLower;
                val[sc] = bound;
                for (std::size_t j = 0; j < n; ++j) row[j] = -s * c.row[j];
                row[sc] = s;
                row[art] = 1.0;
                basis[i] = art;
                val[art] = s * (activity[i] - bound);
                ++art;
            }
        }
        set_limit();

        if (n_art > 0) {
            reprice();
            primal();
            recompute_basics();
            double infeas = 0.0;
            for (std::size_t j = first_art; j < ncols(); ++j) infeas += std::max(0.0, val[j]);
            if (infeas > kInfeasibleSum) return ColdResult::Infeasible;
            for (std::size_t j = first_art; j < ncols(); ++j) {
                lo[j] = hi[j] = 0.0;
                cost[j] = 0.0;
                if (status[j] != Status::Basic) {
                    status[j] = Status::AtLower;
                    val[j] = 0.0;
                }
            }
            // drive remaining artificials out of the basis where a pivot exists
            for (std::size_t i = 0; i < nrows(); ++i) {
                if (basis[i] < first_art) continue;
                std::size_t q = SIZE_MAX;
                double best = 1e-7;
                for (std::size_t j = 0; j < first_art; ++j) {
                    if (status[j] == Status::Basic) continue;
                    if (std::abs(T[i][j]) > best) {
                        best = std::abs(T[i][j]);
                        q = j;
                    }
                }
                const std::size_t a = basis[i];
                if (q == SIZE_MAX) {
                    val[a] = 0.0;
                    continue;
                }
                status[a] = Status::AtLower;
                val[a] = 0.0;
                pivot(i, q);
            }
            recompute_basics();
        }

        set_phase2_costs(lp);
        const auto res = primal();
        recompute_basics();
        return res == PrimalResult::Optimal ? ColdResult::Optimal : ColdResult::Unbounded;
    }

    std::vector<double> structural_point(const LinearProgram& lp) const
    {
        std::vector<double> x(n_struct);
        for (std::size_t j = 0; j < n_struct; ++j) x[j] = std::clamp(val[j], lp.lower(j), lp.upper(j));
        return x;
    }
};

IncrementalSimplex::IncrementalSimplex(LinearProgram lp) : lp_(std::move(lp)) { lp_.validate(); }
IncrementalSimplex::~IncrementalSimplex() = default;
IncrementalSimplex::IncrementalSimplex(IncrementalSimplex&&) noexcept = default;
IncrementalSimplex& IncrementalSimplex::operator=(IncrementalSimplex&&) noexcept = default;

std::size_t IncrementalSimplex::last_iterations() const { return tab_ ? tab_->iterations : 0; }

std::size_t IncrementalSimplex::add_constraint(std::vector<double> row, Comparator cmp, double rhs)
{
    const std::size_t id = lp_.add_constraint(row, cmp, rhs);
    if (tab_ && tab_->optimal)
        tab_->append_row(lp_.constraint(id).row, cmp, rhs);
    else
        tab_.reset();
    return id;
}

LpOutcome IncrementalSimplex::solve()
{
    constexpr double kResidualTol = 1e-7;
    auto finish = [&](Tableau& t) -> LpOutcome {
        auto x = t.structural_point(lp_);
        return LpOptimal{lp_.objective_at(x), std::move(x)};
    };
    auto cold = [&]() -> LpOutcome {
        tab_ = std::make_unique<Tableau>();
        switch (tab_->cold(lp_)) {
        case Tableau::ColdResult::Infeasible:
            tab_->optimal = false;
            return LpInfeasible{};
        case Tableau::ColdResult::Unbounded:
            tab_->optimal = false;
            return LpUnbounded{};
        case Tableau::ColdResult::Optimal:
            break;
        }
        tab_->optimal = true;
        return finish(*tab_);
    };

    if (tab_ && tab_->optimal) {
        Tableau& t = *tab_;
        t.iterations = 0;
        t.set_limit();
        t.optimal = false;
        try {
            if (t.dual() == Tableau::DualResult::Infeasible) {
                // confirm from scratch before reporting, the warm basis may have drifted
                return cold();
            }
            t.recompute_basics();
            if (t.primal() == Tableau::PrimalResult::Unbounded) return cold();
            t.recompute_basics();
        } catch (const LpNumericalError&) {
            return cold();
        }
        t.optimal = true;
        LpOutcome out = finish(t);
        if (lp_.max_violation(std::get<LpOptimal>(out).point) <= kResidualTol) return out;
        return cold();
    }

    LpOutcome out = cold();
    if (auto* opt = std::get_if<LpOptimal>(&out)) {
        const double viol = lp_.max_violation(opt->point);
        if (viol > 1e-6) throw LpNumericalError("simplex residual " + std::to_string(viol) + " exceeds tolerance");
    }
    return out;
}

LpOutcome DenseSimplex::solve(const LinearProgram& lp) { return IncrementalSimplex(lp).solve(); }

LpOutcome solve(const LinearProgram& lp) { return DenseSimplex().solve(lp); }

// ---------------------------------------------------------------- export

namespace {

std::string num(double v)
{
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

void write_terms(std::ostringstream& out, const std::vector<double>& coeffs, const LinearProgram& lp)
{
    bool first = true;
    for (std::size_t j = 0; j < coeffs.size(); ++j) {
        const double c = coeffs[j];
        if (c == 0.0) continue;
        out << (c < 0 ? " - " : (first ? " " : " + ")) << num(std::abs(c)) << ' ' << lp.name(j);
        first = false;
    }
    if (first) out << " 0 " << (lp.num_variables() ? lp.name(0) : std::string("x0"));
}

} // namespace

std::string to_lp_format(const LinearProgram& lp)
{
    lp.validate();
    std::ostringstream out;
    out << (lp.sense() == ObjectiveSense::Minimize ? "Minimize\n" : "Maximize\n");
    out << " obj:";
    write_terms(out, lp.costs(), lp);
    out << "\nSubject To\n";
    for (std::size_t i = 0; i < lp.num_constraints(); ++i) {
        const auto& c = lp.constraint(i);
        out << " c" << i << ':';
        write_terms(out, c.row, lp);
        out << (c.cmp == Comparator::Le ? " <= " : c.cmp == Comparator::Ge ? " >= " : " = ") << num(c.rhs) << '\n';
    }
    out << "Bounds\n";
    for (std::size_t j = 0; j < lp.num_variables(); ++j) {
        const double l = lp.lower(j), u = lp.upper(j);
        if (!std::isfinite(l) && !std::isfinite(u))
            out << ' ' << lp.name(j) << " free\n";
        else if (l == u)
            out << ' ' << lp.name(j) << " = " << num(l) << '\n';
        else
            out << ' ' << (std::isfinite(l) ? num(l) : "-inf") << " <= " << lp.name(j) << " <= "
                << (std::isfinite(u) ? num(u) : "+inf") << '\n';
    }
    out << "End\n";
    return out.str();
}

} // namespace stfe
