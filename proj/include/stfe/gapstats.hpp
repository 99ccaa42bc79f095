#ifndef STFE_GAPSTATS_HPP
#define STFE_GAPSTATS_HPP

#include <cstdint>
#include <string>

#include "stfe/envelope.hpp"

namespace stfe {

/// Monte Carlo averages over the box of f, the one-dimensional estimator h
/// and the concave envelope, with the total gaps they imply.
struct GapReport {
    std::uint64_t samples = 0;
    std::uint64_t seed = 0;
    double mean_f = 0.0;
    double mean_h = 0.0;
    double mean_conc = 0.0;
    double gap_h = 0.0;    // mean of h - f
    double gap_conc = 0.0; // mean of conc - f
    /// (gap_h - gap_conc) / gap_h, or 0 with `degenerate` set when gap_h ~ 0
    double improvement = 0.0;
    bool degenerate = false;
    double se_f = 0.0;
    double se_h = 0.0;
    double se_conc = 0.0;
    double se_gap_h = 0.0;
    double se_gap_conc = 0.0;

    std::string to_json() const;
    static GapReport from_json(const std::string& text);
    static std::string csv_header();
    std::string to_csv_row() const;
    static GapReport from_csv_row(const std::string& row);

    friend bool operator==(const GapReport&, const GapReport&) = default;
};

/// Sample i of the run uses counter-based draws i*m .. i*m+m-1 of `seed`, so
/// the result does not depend on `threads`.
GapReport gap_report(const RawInstance& inst, std::uint64_t samples, std::uint64_t seed, unsigned threads = 1);

} // namespace stfe

#endif // STFE_GAPSTATS_HPP
