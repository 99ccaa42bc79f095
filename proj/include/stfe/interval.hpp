#ifndef STFE_INTERVAL_HPP
#define STFE_INTERVAL_HPP

#include <cmath>
#include <string>

#include "stfe/errors.hpp"

namespace stfe {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    /// Checked constructor: both ends finite and lo <= hi.
    static Interval checked(double lo, double hi)
    {
        if (!std::isfinite(lo) || !std::isfinite(hi))
            throw InvalidArgument("interval endpoints must be finite");
        if (lo > hi)
            throw InvalidArgument("interval lower end exceeds upper end: [" + std::to_string(lo) +
                                  ", " + std::to_string(hi) + "]");
        return {lo, hi};
    }

    double width() const { return hi - lo; }
    bool contains(double z, double tol = 0.0) const { return z >= lo - tol && z <= hi + tol; }
    bool contains(const Interval& other) const { return other.lo >= lo && other.hi <= hi; }
    Interval negated() const { return {-hi, -lo}; }
    double clamp(double z) const { return z < lo ? lo : (z > hi ? hi : z); }

    friend bool operator==(const Interval&, const Interval&) = default;
};

} // namespace stfe

#endif // STFE_INTERVAL_HPP
