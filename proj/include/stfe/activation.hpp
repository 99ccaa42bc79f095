#ifndef STFE_ACTIVATION_HPP
#define STFE_ACTIVATION_HPP

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stfe/interval.hpp"

namespace stfe {

enum class ActivationKind {
    Sigmoid,
    Tanh,
    Softsign,
    PenalizedTanh,
    BipolarSigmoid,
    ReLU,
    LeakyReLU,
    Softplus,
    ELU,
    SELU,
    SiLU,
    Maxtanh,
};

enum class Curvature {
    Convex,
    Concave,
    SShaped,          ///< convex on (-inf, z~], concave on [z~, inf)
    ReflectedSShaped, ///< concave on (-inf, z~], convex on [z~, inf)
};

struct Shape {
    Curvature curvature = Curvature::Convex;
    double inflection = 0.0; ///< only meaningful for the two S variants
};

enum class Side { Left, Right };

/// A catalogued scalar activation, optionally composed with the sign flips
/// z -> -z on the input and/or y -> -y on the output.
///
/// The flips are how reflections are represented: `reflected()` is
/// z -> -sigma(-z) and `mirrored()` is z -> sigma(-z). Both are involutions.
class Activation {
public:
    static constexpr double kSeluLambda = 1.0507;
    static constexpr double kSeluAlpha = 1.67326;

    static Activation sigmoid();
    static Activation tanh();
    static Activation softsign();
    static Activation penalized_tanh(double alpha);
    static Activation bipolar_sigmoid();
    static Activation relu();
    static Activation leaky_relu(double epsilon);
    static Activation softplus();
    static Activation elu(double alpha);
    static Activation selu();
    static Activation silu();
    static Activation maxtanh();

    /// Build from the serialized form {"tag": ..., "params": {...}}.
    /// Throws UnknownActivationError for tags outside the catalog and
    /// InvalidArgument for out-of-range parameters.
    static Activation from_tag(std::string_view tag, const std::map<std::string, double>& params = {});

    ActivationKind kind() const { return kind_; }
    std::string tag() const;
    std::map<std::string, double> params() const;
    bool input_negated() const { return negate_input_; }
    bool output_negated() const { return negate_output_; }
    /// Untransformed catalog member.
    bool is_plain() const { return !negate_input_ && !negate_output_; }

    double operator()(double z) const;
    double derivative(double z, Side side) const;
    Shape shape() const;

    Activation reflected() const;
    Activation mirrored() const;

    /// Largest interval on which the shape() classification holds exactly.
    /// Infinite for every member except SiLU, whose second inflection bounds it.
    Interval stfe_window() const;

    /// True if the function is affine on the whole of iv (read off the
    /// closed-form pieces, not probed numerically).
    bool is_affine_on(const Interval& iv) const;

    /// Points where left and right derivatives differ.
    std::vector<double> kinks() const;

    /// Exact image of iv.
    Interval range_on(const Interval& iv) const;

    friend bool operator==(const Activation&, const Activation&) = default;

private:
    Activation(ActivationKind kind, double p0 = 0.0, double p1 = 0.0);

    double base_value(double z) const;
    double base_derivative(double z, Side side) const;

    ActivationKind kind_;
    double p0_; // alpha / epsilon / lambda depending on kind
    double p1_; // SELU alpha
    bool negate_input_ = false;
    bool negate_output_ = false;
};

class UnknownActivationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Names of every catalog tag, in catalog order.
const std::vector<std::string>& activation_tags();

/// Numerically stable logistic function.
double logistic(double z);

// Free-function surface mirroring the operation names used across the project.
inline double eval(const Activation& act, double z) { return act(z); }
inline double derivative(const Activation& act, double z, Side side) { return act.derivative(z, side); }
inline Activation reflect(const Activation& act) { return act.reflected(); }
inline Interval range_on_interval(const Activation& act, const Interval& iv) { return act.range_on(iv); }

/// Smallest point zhat of iv such that the concave envelope of act over iv is
/// the secant from lo to zhat followed by act itself.
double tie_point(const Activation& act, const Interval& iv);

/// The one-dimensional concave envelope of an activation over a fixed
/// interval, with its tie point solved once at construction.
///
/// Concave-then-convex activations are handled by mirroring the domain, so
/// any activation that is STFE on the (possibly mirrored) interval works.
class ConcaveEnvelope1d {
public:
    ConcaveEnvelope1d(Activation act, Interval iv);
    /// Use a precomputed tie point (must be the one tie_point() would return).
    ConcaveEnvelope1d(Activation act, Interval iv, double tie);

    double value(double z) const;
    double supergradient(double z) const;

    const Interval& interval() const { return iv_; }
    /// Tie point in the (possibly mirrored) working coordinates.
    double tie() const { return tie_; }
    bool mirrored() const { return mirrored_; }
    /// Slope of the secant piece; zero when the envelope has no secant piece.
    double secant_slope() const { return slope_; }

private:
    void init_secant();

    Activation act_; // working activation (mirrored when needed)
    Interval iv_;    // caller's interval
    Interval work_;  // interval in working coordinates
    bool mirrored_ = false;
    double tie_ = 0.0;
    double f_lo_ = 0.0;
    double slope_ = 0.0;
};

double conc_env_1d(const Activation& act, const Interval& iv, double z);
double conc_env_1d_supergrad(const Activation& act, const Interval& iv, double z);

/// Convex envelope over iv, obtained as -conc_env_1d(reflect(act), -iv, -z).
double conv_env_1d(const Activation& act, const Interval& iv, double z);
double conv_env_1d_subgrad(const Activation& act, const Interval& iv, double z);

} // namespace stfe

#endif // STFE_ACTIVATION_HPP
