#ifndef STFE_ENVELOPE_HPP
#define STFE_ENVELOPE_HPP

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <utility>
#include <vector>

#include "stfe/activation.hpp"

namespace stfe {

/// sigma(w'x + b) over an arbitrary box, weights of any sign.
struct RawInstance {
    std::vector<double> w;
    double b = 0.0;
    Activation act = Activation::sigmoid();
    std::vector<Interval> box;

    void validate() const;
};

/// Affine change of variables between the unit box of a normalized instance
/// and the caller's box: x[kept[j]] = scale[j] * t[j] + shift[j].
struct ReindexMap {
    std::size_t original_dim = 0;
    std::vector<std::size_t> kept;
    std::vector<double> scale; // negative for flipped coordinates
    std::vector<double> shift;
    std::vector<std::size_t> dropped;

    std::vector<double> to_unit(const std::vector<double>& x) const;
    /// Dropped coordinates are taken from `fill` (same length as the original).
    std::vector<double> from_unit(const std::vector<double>& t, const std::vector<double>& fill) const;
    /// Gradient w.r.t. t pulled back to the original coordinates.
    std::vector<double> pull_back(const std::vector<double>& grad_t) const;
};

struct RegionLabel {
    enum class Kind { Function, Linear, Face };
    Kind kind = Kind::Function;
    std::size_t index = 0; // only for Face

    friend bool operator==(const RegionLabel&, const RegionLabel&) = default;
};

class TieMemo;

/// sigma(w'x + b) on [0,1]^m with every weight strictly positive.
///
/// Upper side is the recursive concave envelope; the lower side is the same
/// construction applied to the reflected activation at 1 - x. The activation
/// must not be concave-then-convex (normalize() mirrors those away).
class NormalizedInstance {
public:
    NormalizedInstance(std::vector<double> w, double b, Activation act);

    std::size_t dim() const { return w_.size(); }
    const std::vector<double>& weights() const { return w_; }
    double bias() const { return upper_.bias; }
    const Activation& activation() const { return upper_.act; }
    Interval arg_range() const { return {upper_.bias, upper_.bias + wsum_}; }
    double tie() const;

    /// Instance restricted to the face x_i = 1.
    NormalizedInstance face(std::size_t i) const;

    double argument(const std::vector<double>& x) const;
    double f(const std::vector<double>& x) const;

    RegionLabel classify(const std::vector<double>& x) const;

    double conc_env(const std::vector<double>& x) const;
    std::vector<double> conc_env_supergrad(const std::vector<double>& x) const;
    double conv_env(const std::vector<double>& x) const;
    std::vector<double> conv_env_subgrad(const std::vector<double>& x) const;

    /// One-dimensional envelope composed with the affine argument.
    double h_over(const std::vector<double>& x) const;
    std::vector<double> h_over_supergrad(const std::vector<double>& x) const;
    double h_under(const std::vector<double>& x) const;
    std::vector<double> h_under_subgrad(const std::vector<double>& x) const;

private:
    struct Half {
        Activation act;
        double bias;
        std::shared_ptr<TieMemo> memo;
    };

    double side_tie(const Half& s, double lo, double hi) const;
    double recurse(const Half& s, std::vector<std::size_t>& active, double bias, const double* y,
                   double* grad, RegionLabel* label) const;
    double eval(const Half& s, const std::vector<double>& x, std::vector<double>* grad) const;
    double h_eval(const Half& s, const std::vector<double>& x, std::vector<double>* grad) const;
    void check_point(const std::vector<double>& x) const;
    bool convex_act() const;
    std::vector<double> f_grad(const std::vector<double>& x) const;

    std::vector<double> w_;
    double wsum_ = 0.0;
    Half upper_;
    Half lower_;
};

/// Tie points of every face visited so far, keyed by the face's argument
/// range. Fills are idempotent so concurrent readers only contend on insert.
class TieMemo {
public:
    double get(const Activation& act, double lo, double hi);
    std::size_t size() const;

private:
    mutable std::shared_mutex mu_;
    std::map<std::pair<double, double>, double> ties_;
};

struct Normalized {
    NormalizedInstance inst;
    ReindexMap map;
};

Normalized normalize(const RawInstance& raw);

enum class SeparationMode { Env, HEst };

enum class CutSense {
    UpperBoundsY, ///< y <= coeffs'x + offset
    LowerBoundsY, ///< y >= coeffs'x + offset
};

struct Cut {
    std::vector<double> coeffs; // over the original x coordinates
    double offset = 0.0;
    CutSense sense = CutSense::UpperBoundsY;
    double violation = 0.0; // at the separated point, always positive

    double rhs_at(const std::vector<double>& x) const;
};

/// Envelope machinery for a raw instance, in the caller's coordinates.
class BoxEnvelope {
public:
    static constexpr double kInsideTol = 1e-9;

    explicit BoxEnvelope(const RawInstance& raw);

    const NormalizedInstance& normalized() const { return norm_.inst; }
    const ReindexMap& map() const { return norm_.map; }
    const RawInstance& raw() const { return raw_; }

    double f(const std::vector<double>& x) const;
    double upper(const std::vector<double>& x, SeparationMode mode = SeparationMode::Env) const;
    double lower(const std::vector<double>& x, SeparationMode mode = SeparationMode::Env) const;
    std::vector<double> upper_grad(const std::vector<double>& x, SeparationMode mode = SeparationMode::Env) const;
    std::vector<double> lower_grad(const std::vector<double>& x, SeparationMode mode = SeparationMode::Env) const;

    /// nullopt when (x, y) lies between the two estimators (within kInsideTol).
    std::optional<Cut> separate(const std::vector<double>& x, double y, SeparationMode mode) const;

private:
    std::vector<double> to_unit_checked(const std::vector<double>& x) const;

    RawInstance raw_;
    Normalized norm_;
};

inline std::optional<Cut> separate(const RawInstance& raw, const std::vector<double>& x, double y,
                                   SeparationMode mode)
{
    return BoxEnvelope(raw).separate(x, y, mode);
}

} // namespace stfe

#endif // STFE_ENVELOPE_HPP
