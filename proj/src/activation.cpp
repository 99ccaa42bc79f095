#include "stfe/activation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stfe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <typename F>
double bisect_root(F&& g, double lo, double hi)
{
    double glo = g(lo);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if ((gm < 0) == (glo < 0)) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// SiLU'(z) = 0
double silu_stationary_point()
{
    static const double z = bisect_root([](double t) { return 1.0 + t * (1.0 - logistic(t)); }, -2.0, -1.0);
    return z;
}

// SiLU''(z) = 0 on the positive side; SiLU'' is even, so the other root is its negation.
double silu_inflection()
{
    static const double z = bisect_root([](double t) { return 2.0 + t * (1.0 - 2.0 * logistic(t)); }, 2.0, 3.0);
    return z;
}

double sq(double v) { return v * v; }

} // namespace

double logistic(double z)
{
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

const std::vector<std::string>& activation_tags()
{
    static const std::vector<std::string> tags = {
        "sigmoid", "tanh", "softsign", "penalized_tanh", "bipolar_sigmoid", "relu",
        "leaky_relu", "softplus", "elu", "selu", "silu", "maxtanh",
    };
    return tags;
}

Activation::Activation(ActivationKind kind, double p0, double p1) : kind_(kind), p0_(p0), p1_(p1) {}

Activation Activation::sigmoid() { return Activation(ActivationKind::Sigmoid); }
Activation Activation::tanh() { return Activation(ActivationKind::Tanh); }
Activation Activation::softsign() { return Activation(ActivationKind::Softsign); }
Activation Activation::bipolar_sigmoid() { return Activation(ActivationKind::BipolarSigmoid); }
Activation Activation::relu() { return Activation(ActivationKind::ReLU); }
Activation Activation::softplus() { return Activation(ActivationKind::Softplus); }
Activation Activation::silu() { return Activation(ActivationKind::SiLU); }
Activation Activation::maxtanh() { return Activation(ActivationKind::Maxtanh); }
Activation Activation::selu() { return Activation(ActivationKind::SELU, kSeluLambda, kSeluAlpha); }

Activation Activation::penalized_tanh(double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0))
        throw InvalidArgument("penalized tanh requires 0 < alpha < 1");
    return Activation(ActivationKind::PenalizedTanh, alpha);
}

Activation Activation::leaky_relu(double epsilon)
{
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw InvalidArgument("leaky ReLU requires 0 < epsilon < 1");
    return Activation(ActivationKind::LeakyReLU, epsilon);
}

Activation Activation::elu(double alpha)
{
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw InvalidArgument("ELU requires alpha > 0");
    return Activation(ActivationKind::ELU, alpha);
}

Activation Activation::from_tag(std::string_view tag, const std::map<std::string, double>& params)
{
    auto take = [&](const char* name, double fallback) {
        auto it = params.find(name);
        return it == params.end() ? fallback : it->second;
    };
    auto only = [&](std::initializer_list<const char*> allowed) {
        for (const auto& [k, v] : params) {
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
                throw InvalidArgument("unexpected parameter '" + k + "' for activation '" + std::string(tag) + "'");
        }
    };

    if (tag == "sigmoid") { only({}); return sigmoid(); }
    if (tag == "tanh") { only({}); return tanh(); }
    if (tag == "softsign") { only({}); return softsign(); }
    if (tag == "bipolar_sigmoid") { only({}); return bipolar_sigmoid(); }
    if (tag == "relu") { only({}); return relu(); }
    if (tag == "softplus") { only({}); return softplus(); }
    if (tag == "silu") { only({}); return silu(); }
    if (tag == "maxtanh") { only({}); return maxtanh(); }
    if (tag == "penalized_tanh") { only({"alpha"}); return penalized_tanh(take("alpha", 0.25)); }
    if (tag == "leaky_relu") { only({"epsilon"}); return leaky_relu(take("epsilon", 0.01)); }
    if (tag == "elu") { only({"alpha"}); return elu(take("alpha", 1.0)); }
    if (tag == "selu") {
        only({"lambda", "alpha"});
        if (take("lambda", kSeluLambda) != kSeluLambda || take("alpha", kSeluAlpha) != kSeluAlpha)
            throw InvalidArgument("SELU parameters are fixed at lambda=1.0507, alpha=1.67326");
        return selu();
    }
    throw UnknownActivationError("unknown activation tag '" + std::string(tag) + "'");
}

std::string Activation::tag() const
{
    return activation_tags()[static_cast<std::size_t>(kind_)];
}

std::map<std::string, double> Activation::params() const
{
    switch (kind_) {
    case ActivationKind::PenalizedTanh:
    case ActivationKind::ELU:
        return {{"alpha", p0_}};
    case ActivationKind::LeakyReLU:
        return {{"epsilon", p0_}};
    case ActivationKind::SELU:
        return {{"lambda", p0_}, {"alpha", p1_}};
    default:
        return {};
    }
}

double Activation::base_value(double z) const
{
    switch (kind_) {
    case ActivationKind::Sigmoid: return logistic(z);
    case ActivationKind::Tanh: return std::tanh(z);
    case ActivationKind::Softsign: return z / (1.0 + std::abs(z));
    case ActivationKind::PenalizedTanh: return z > 0 ? std::tanh(z) : std::tanh(p0_ * z);
    case ActivationKind::BipolarSigmoid: return std::tanh(0.5 * z);
    case ActivationKind::ReLU: return z > 0 ? z : 0.0;
    case ActivationKind::LeakyReLU: return z > 0 ? z : p0_ * z;
    case ActivationKind::Softplus: return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    case ActivationKind::ELU: return z > 0 ? z : p0_ * std::expm1(z);
    case ActivationKind::SELU: return p0_ * (z > 0 ? z : p1_ * std::expm1(z));
    case ActivationKind::SiLU: return z * logistic(z);
    case ActivationKind::Maxtanh: return z >= 0 ? z : std::tanh(z);
    }
    return 0.0;
}

double Activation::base_derivative(double z, Side side) const
{
    const bool right_of_zero = z > 0 || (z == 0 && side == Side::Right);
    switch (kind_) {
    case ActivationKind::Sigmoid: {
        const double s = logistic(z);
        return s * (1.0 - s);
    }
    case ActivationKind::Tanh: return 1.0 - sq(std::tanh(z));
    case ActivationKind::Softsign: return 1.0 / sq(1.0 + std::abs(z));
    case ActivationKind::PenalizedTanh:
        return right_of_zero ? 1.0 - sq(std::tanh(z)) : p0_ * (1.0 - sq(std::tanh(p0_ * z)));
    case ActivationKind::BipolarSigmoid: return 0.5 * (1.0 - sq(std::tanh(0.5 * z)));
    case ActivationKind::ReLU: return right_of_zero ? 1.0 : 0.0;
    case ActivationKind::LeakyReLU: return right_of_zero ? 1.0 : p0_;
    case ActivationKind::Softplus: return logistic(z);
    case ActivationKind::ELU: return right_of_zero ? 1.0 : p0_ * std::exp(z);
    case ActivationKind::SELU: return p0_ * (right_of_zero ? 1.0 : p1_ * std::exp(z));
    case ActivationKind::SiLU: {
        const double s = logistic(z);
        return s + z * s * (1.0 - s);
    }
    case ActivationKind::Maxtanh: return z >= 0 ? 1.0 : 1.0 - sq(std::tanh(z));
    }
    return 0.0;
}

double Activation::operator()(double z) const
{
    const double v = base_value(negate_input_ ? -z : z);
    return negate_output_ ? -v : v;
}

double Activation::derivative(double z, Side side) const
{
    double d;
    if (negate_input_)
        d = -base_derivative(-z, side == Side::Left ? Side::Right : Side::Left);
    else
        d = base_derivative(z, side);
    return negate_output_ ? -d : d;
}

Shape Activation::shape() const
{
    Shape s;
    switch (kind_) {
    case ActivationKind::Sigmoid:
    case ActivationKind::Tanh:
    case ActivationKind::Softsign:
    case ActivationKind::PenalizedTanh:
    case ActivationKind::BipolarSigmoid:
    case ActivationKind::SELU:
        s = {Curvature::SShaped, 0.0};
        break;
    case ActivationKind::ELU:
        s = p0_ > 1.0 ? Shape{Curvature::SShaped, 0.0} : Shape{Curvature::Convex, 0.0};
        break;
    case ActivationKind::ReLU:
    case ActivationKind::LeakyReLU:
    case ActivationKind::Softplus:
    case ActivationKind::Maxtanh:
        s = {Curvature::Convex, 0.0};
        break;
    case ActivationKind::SiLU:
        s = {Curvature::ReflectedSShaped, -silu_inflection()};
        break;
    }
    if (negate_input_) {
        // z -> -z keeps convexity and swaps the order of the two pieces
        if (s.curvature == Curvature::SShaped) s.curvature = Curvature::ReflectedSShaped;
        else if (s.curvature == Curvature::ReflectedSShaped) s.curvature = Curvature::SShaped;
        s.inflection = -s.inflection;
    }
    if (negate_output_) {
        switch (s.curvature) {
        case Curvature::Convex: s.curvature = Curvature::Concave; break;
        case Curvature::Concave: s.curvature = Curvature::Convex; break;
        case Curvature::SShaped: s.curvature = Curvature::ReflectedSShaped; break;
        case Curvature::ReflectedSShaped: s.curvature = Curvature::SShaped; break;
        }
    }
    return s;
}

Activation Activation::reflected() const
{
    Activation r = *this;
    r.negate_input_ = !negate_input_;
    r.negate_output_ = !negate_output_;
    return r;
}

Activation Activation::mirrored() const
{
    Activation r = *this;
    r.negate_input_ = !negate_input_;
    return r;
}

Interval Activation::stfe_window() const
{
    Interval w{-kInf, kInf};
    if (kind_ == ActivationKind::SiLU) w = {-kInf, silu_inflection()};
    return negate_input_ ? w.negated() : w;
}

bool Activation::is_affine_on(const Interval& iv) const
{
    if (iv.lo == iv.hi) return true;
    const Interval b = negate_input_ ? iv.negated() : iv;
    switch (kind_) {
    case ActivationKind::ReLU:
    case ActivationKind::LeakyReLU:
        return b.hi <= 0.0 || b.lo >= 0.0;
    case ActivationKind::ELU:
    case ActivationKind::SELU:
    case ActivationKind::Maxtanh:
        return b.lo >= 0.0;
    default:
        return false;
    }
}

std::vector<double> Activation::kinks() const
{
    bool kink_at_zero = false;
    switch (kind_) {
    case ActivationKind::ReLU:
    case ActivationKind::LeakyReLU:
    case ActivationKind::PenalizedTanh:
    case ActivationKind::SELU:
        kink_at_zero = true;
        break;
    case ActivationKind::ELU:
        kink_at_zero = p0_ != 1.0;
        break;
    default:
        break;
    }
    // only ever a kink at zero, which input negation leaves in place
    if (!kink_at_zero) return {};
    return {0.0};
}

Interval Activation::range_on(const Interval& iv) const
{
    const Interval b = negate_input_ ? iv.negated() : iv;
    Interval r;
    if (kind_ == ActivationKind::SiLU) {
        const double zs = silu_stationary_point();
        const double flo = base_value(b.lo);
        const double fhi = base_value(b.hi);
        if (b.hi <= zs)
            r = {fhi, flo};
        else if (b.lo >= zs)
            r = {flo, fhi};
        else
            r = {base_value(zs), std::max(flo, fhi)};
    } else {
        // every other catalog member is non-decreasing
        r = {base_value(b.lo), base_value(b.hi)};
    }
    return negate_output_ ? r.negated() : r;
}

namespace {

double s_shaped_tie(const Activation& act, const Interval& iv, double inflection)
{
    const double lo = iv.lo;
    const double hi = iv.hi;
    const double flo = act(lo);
    // psi >= 0 exactly when the secant from lo to t is at least as steep as act at t
    auto psi = [&](double t, Side side) { return (act(t) - flo) - act.derivative(t, side) * (t - lo); };
    const double tol = 1e-12 * std::max(1.0, hi - lo);

    auto bisect = [&](double a, double b) {
        while (b - a > tol) {
            const double mid = 0.5 * (a + b);
            if (psi(mid, Side::Right) >= 0)
                b = mid;
            else
                a = mid;
        }
        return b;
    };

    if (psi(inflection, Side::Right) >= 0) {
        if (act.is_affine_on({lo, inflection})) return lo;
        return inflection;
    }
    double prev = inflection;
    std::vector<double> ks = act.kinks();
    std::sort(ks.begin(), ks.end());
    for (double k : ks) {
        if (k <= inflection || k >= hi) continue;
        if (psi(k, Side::Right) >= 0) {
            if (psi(k, Side::Left) < 0) return k;
            return bisect(prev, k);
        }
        prev = k;
    }
    if (psi(hi, Side::Left) < 0) return hi;
    return bisect(prev, hi);
}

} // namespace

double tie_point(const Activation& act, const Interval& iv_in)
{
    const Interval iv = Interval::checked(iv_in.lo, iv_in.hi);
    if (iv.lo == iv.hi) return iv.lo;
    if (!act.stfe_window().contains(iv))
        throw NotStfeError("interval [" + std::to_string(iv.lo) + ", " + std::to_string(iv.hi) +
                           "] leaves the range where " + act.tag() + " has a secant-then-function envelope");

    const Shape sh = act.shape();
    switch (sh.curvature) {
    case Curvature::Concave:
        return iv.lo;
    case Curvature::Convex:
        return act.is_affine_on(iv) ? iv.lo : iv.hi;
    case Curvature::SShaped:
        if (iv.lo >= sh.inflection) return iv.lo;
        if (iv.hi <= sh.inflection) return act.is_affine_on(iv) ? iv.lo : iv.hi;
        return s_shaped_tie(act, iv, sh.inflection);
    case Curvature::ReflectedSShaped: {
        if (iv.hi <= sh.inflection) return iv.lo;
        if (iv.lo >= sh.inflection) return act.is_affine_on(iv) ? iv.lo : iv.hi;
        // concave then convex: only a pure chord has the secant-then-function form
        const double chord = (act(iv.hi) - act(iv.lo)) / (iv.hi - iv.lo);
        if (act.derivative(iv.lo, Side::Right) <= chord + 1e-12 * (1.0 + std::abs(chord))) return iv.hi;
        throw NotStfeError("concave-then-convex activation has no secant-then-function envelope on this interval");
    }
    }
    return iv.hi;
}

ConcaveEnvelope1d::ConcaveEnvelope1d(Activation act, Interval iv)
    : act_(std::move(act)), iv_(Interval::checked(iv.lo, iv.hi))
{
    if (act_.shape().curvature == Curvature::ReflectedSShaped) {
        act_ = act_.mirrored();
        mirrored_ = true;
    }
    work_ = mirrored_ ? iv_.negated() : iv_;
    tie_ = tie_point(act_, work_);
    init_secant();
}

ConcaveEnvelope1d::ConcaveEnvelope1d(Activation act, Interval iv, double tie)
    : act_(std::move(act)), iv_(Interval::checked(iv.lo, iv.hi)), tie_(tie)
{
    if (act_.shape().curvature == Curvature::ReflectedSShaped)
        throw InvalidArgument("precomputed tie points require a secant-then-function activation");
    work_ = iv_;
    if (!work_.contains(tie_)) throw InvalidArgument("tie point outside its interval");
    init_secant();
}

void ConcaveEnvelope1d::init_secant()
{
    f_lo_ = act_(work_.lo);
    slope_ = tie_ > work_.lo ? (act_(tie_) - f_lo_) / (tie_ - work_.lo) : 0.0;
}

namespace {

double checked_arg(const Interval& iv, double z)
{
    const double tol = 1e-9 * std::max(1.0, std::max(std::abs(iv.lo), std::abs(iv.hi)));
    if (!iv.contains(z, tol))
        throw InvalidArgument("point " + std::to_string(z) + " outside envelope interval [" +
                              std::to_string(iv.lo) + ", " + std::to_string(iv.hi) + "]");
    return iv.clamp(z);
}

} // namespace

double ConcaveEnvelope1d::value(double z) const
{
    z = checked_arg(iv_, z);
    const double t = mirrored_ ? -z : z;
    if (t < tie_) return f_lo_ + slope_ * (t - work_.lo);
    return act_(t);
}

double ConcaveEnvelope1d::supergradient(double z) const
{
    z = checked_arg(iv_, z);
    const double t = mirrored_ ? -z : z;
    const double g = (tie_ > work_.lo && t <= tie_) ? slope_ : act_.derivative(t, Side::Left);
    return mirrored_ ? -g : g;
}

double conc_env_1d(const Activation& act, const Interval& iv, double z)
{
    return ConcaveEnvelope1d(act, iv).value(z);
}

double conc_env_1d_supergrad(const Activation& act, const Interval& iv, double z)
{
    return ConcaveEnvelope1d(act, iv).supergradient(z);
}

double conv_env_1d(const Activation& act, const Interval& iv, double z)
{
    return -ConcaveEnvelope1d(act.reflected(), iv.negated()).value(-z);
}

double conv_env_1d_subgrad(const Activation& act, const Interval& iv, double z)
{
    return ConcaveEnvelope1d(act.reflected(), iv.negated()).supergradient(-z);
}

} // namespace stfe
