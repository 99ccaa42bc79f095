#include "stfe/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>

namespace stfe {

namespace {

constexpr double kBoxTol = 1e-9;
// Below this the perspective division is float dust; the linear piece agrees there.
constexpr double kPerspectiveGuard = 1e-12;

} // namespace

void RawInstance::validate() const
{
    if (w.empty()) throw InvalidArgument("instance needs at least one coordinate");
    if (w.size() != box.size())
        throw InvalidArgument("weight vector has " + std::to_string(w.size()) + " entries but box has " +
                              std::to_string(box.size()));
    if (!std::isfinite(b)) throw InvalidArgument("bias must be finite");
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!std::isfinite(w[i])) throw InvalidArgument("weights must be finite");
        Interval::checked(box[i].lo, box[i].hi);
    }
}

std::vector<double> ReindexMap::to_unit(const std::vector<double>& x) const
{
    if (x.size() != original_dim) throw InvalidArgument("point has wrong dimension");
    std::vector<double> t(kept.size());
    for (std::size_t j = 0; j < kept.size(); ++j) t[j] = (x[kept[j]] - shift[j]) / scale[j];
    return t;
}

std::vector<double> ReindexMap::from_unit(const std::vector<double>& t, const std::vector<double>& fill) const
{
    if (t.size() != kept.size() || fill.size() != original_dim)
        throw InvalidArgument("point has wrong dimension");
    std::vector<double> x = fill;
    for (std::size_t j = 0; j < kept.size(); ++j) x[kept[j]] = scale[j] * t[j] + shift[j];
    return x;
}

std::vector<double> ReindexMap::pull_back(const std::vector<double>& grad_t) const
{
    std::vector<double> g(original_dim, 0.0);
    for (std::size_t j = 0; j < kept.size(); ++j) g[kept[j]] = grad_t[j] / scale[j];
    return g;
}

double TieMemo::get(const Activation& act, double lo, double hi)
{
    const auto key = std::make_pair(lo, hi);
    {
        std::shared_lock lock(mu_);
        auto it = ties_.find(key);
        if (it != ties_.end()) return it->second;
    }
    const double tie = tie_point(act, {lo, hi});
    std::unique_lock lock(mu_);
    ties_.emplace(key, tie);
    return tie;
}

std::size_t TieMemo::size() const
{
    std::shared_lock lock(mu_);
    return ties_.size();
}

NormalizedInstance::NormalizedInstance(std::vector<double> w, double b, Activation act)
    : w_(std::move(w)), upper_{act, b, std::make_shared<TieMemo>()}, lower_{act.reflected(), 0.0, std::make_shared<TieMemo>()}
{
    if (!std::isfinite(b)) throw InvalidArgument("bias must be finite");
    for (double wi : w_) {
        if (!(wi > 0.0) || !std::isfinite(wi)) throw InvalidArgument("normalized weights must be positive and finite");
        wsum_ += wi;
    }
    if (act.shape().curvature == Curvature::ReflectedSShaped)
        throw InvalidArgument("concave-then-convex activations must be mirrored before normalization");
    lower_.bias = -(wsum_ + b);
}

double NormalizedInstance::tie() const { return side_tie(upper_, upper_.bias, upper_.bias + wsum_); }

NormalizedInstance NormalizedInstance::face(std::size_t i) const
{
    if (i >= w_.size()) throw InvalidArgument("face index out of range");
    std::vector<double> w;
    w.reserve(w_.size() - 1);
    for (std::size_t j = 0; j < w_.size(); ++j)
        if (j != i) w.push_back(w_[j]);
    NormalizedInstance out(std::move(w), upper_.bias + w_[i], upper_.act);
    // memo keys are argument ranges, so the face can keep filling the parent's caches
    out.upper_.memo = upper_.memo;
    out.lower_.memo = lower_.memo;
    return out;
}

double NormalizedInstance::side_tie(const Half& s, double lo, double hi) const { return s.memo->get(s.act, lo, hi); }

void NormalizedInstance::check_point(const std::vector<double>& x) const
{
    if (x.size() != w_.size())
        throw InvalidArgument("point has dimension " + std::to_string(x.size()) + ", instance has " +
                              std::to_string(w_.size()));
    for (double v : x)
        if (!(v >= -kBoxTol && v <= 1.0 + kBoxTol)) throw InvalidArgument("point outside the unit box");
}

double NormalizedInstance::argument(const std::vector<double>& x) const
{
    check_point(x);
    double z = upper_.bias;
    for (std::size_t j = 0; j < w_.size(); ++j) z += w_[j] * std::clamp(x[j], 0.0, 1.0);
    return z;
}

double NormalizedInstance::f(const std::vector<double>& x) const { return upper_.act(argument(x)); }

double NormalizedInstance::recurse(const Half& s, std::vector<std::size_t>& active, double bias, const double* y,
                                   double* grad, RegionLabel* label) const
{
    const std::size_t k = active.size();
    const Activation& act = s.act;
    if (k == 0) return act(bias);

    double wsum = 0.0, z = bias, linf = 0.0;
    std::size_t imax = 0;
    for (std::size_t j = 0; j < k; ++j) {
        const double wj = w_[active[j]];
        wsum += wj;
        z += wj * y[j];
        if (y[j] > linf) { // strict: first maximizer wins
            linf = y[j];
            imax = j;
        }
    }

    const double tie = side_tie(s, bias, bias + wsum);
    if (z >= tie) {
        if (label) *label = {RegionLabel::Kind::Function, 0};
        if (grad) {
            const double d = act.derivative(z, Side::Left);
            for (std::size_t j = 0; j < k; ++j) grad[j] = d * w_[active[j]];
        }
        return act(z);
    }

    // z >= bias always, so here tie > bias
    const double fb = act(bias);
    const double slope = (act(tie) - fb) / (tie - bias);
    const double lin = z - bias;
    if (lin + bias * linf >= tie * linf || linf < kPerspectiveGuard) {
        if (label) *label = {RegionLabel::Kind::Linear, 0};
        if (grad)
            for (std::size_t j = 0; j < k; ++j) grad[j] = slope * w_[active[j]];
        return fb + slope * lin;
    }

    const std::size_t removed = active[imax];
    if (label) *label = {RegionLabel::Kind::Face, removed};
    const double yi = y[imax];
    std::vector<double> sub_y;
    sub_y.reserve(k - 1);
    for (std::size_t j = 0; j < k; ++j)
        if (j != imax) sub_y.push_back(y[j] / yi);
    std::vector<double> sub_grad(grad ? k - 1 : 0);

    active.erase(active.begin() + static_cast<std::ptrdiff_t>(imax));
    const double g = recurse(s, active, bias + w_[removed], sub_y.data(), grad ? sub_grad.data() : nullptr, nullptr);
    active.insert(active.begin() + static_cast<std::ptrdiff_t>(imax), removed);

    if (grad) {
        double dot = 0.0;
        for (std::size_t j = 0, q = 0; j < k; ++j) {
            if (j == imax) continue;
            grad[j] = sub_grad[q];
            dot += sub_grad[q] * sub_y[q];
            ++q;
        }
        grad[imax] = g - fb - dot;
    }
    return fb + yi * (g - fb);
}

double NormalizedInstance::eval(const Half& s, const std::vector<double>& x, std::vector<double>* grad) const
{
    check_point(x);
    std::vector<double> y(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) y[j] = std::clamp(x[j], 0.0, 1.0);
    std::vector<std::size_t> active(x.size());
    for (std::size_t j = 0; j < active.size(); ++j) active[j] = j;
    if (grad) grad->assign(x.size(), 0.0);
    return recurse(s, active, s.bias, y.data(), grad ? grad->data() : nullptr, nullptr);
}

RegionLabel NormalizedInstance::classify(const std::vector<double>& x) const
{
    check_point(x);
    std::vector<double> y(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) y[j] = std::clamp(x[j], 0.0, 1.0);
    std::vector<std::size_t> active(x.size());
    for (std::size_t j = 0; j < active.size(); ++j) active[j] = j;
    RegionLabel label;
    recurse(upper_, active, upper_.bias, y.data(), nullptr, &label);
    return label;
}

namespace {

std::vector<double> flipped(const std::vector<double>& x)
{
    std::vector<double> y(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) y[j] = 1.0 - x[j];
    return y;
}

} // namespace

double NormalizedInstance::conc_env(const std::vector<double>& x) const { return eval(upper_, x, nullptr); }

std::vector<double> NormalizedInstance::conc_env_supergrad(const std::vector<double>& x) const
{
    std::vector<double> g;
    eval(upper_, x, &g);
    return g;
}

bool NormalizedInstance::convex_act() const { return upper_.act.shape().curvature == Curvature::Convex; }

std::vector<double> NormalizedInstance::f_grad(const std::vector<double>& x) const
{
    const double d = upper_.act.derivative(argument(x), Side::Right);
    std::vector<double> g(w_.size());
    for (std::size_t j = 0; j < w_.size(); ++j) g[j] = d * w_[j];
    return g;
}

double NormalizedInstance::conv_env(const std::vector<double>& x) const
{
    check_point(x);
    if (convex_act()) return f(x);
    return -eval(lower_, flipped(x), nullptr);
}

std::vector<double> NormalizedInstance::conv_env_subgrad(const std::vector<double>& x) const
{
    check_point(x);
    if (convex_act()) return f_grad(x);
    std::vector<double> g;
    eval(lower_, flipped(x), &g);
    return g;
}

double NormalizedInstance::h_eval(const Half& s, const std::vector<double>& x, std::vector<double>* grad) const
{
    check_point(x);
    const Interval range{s.bias, s.bias + wsum_};
    const ConcaveEnvelope1d env(s.act, range, side_tie(s, range.lo, range.hi));
    double z = s.bias;
    for (std::size_t j = 0; j < w_.size(); ++j) z += w_[j] * std::clamp(x[j], 0.0, 1.0);
    z = range.clamp(z);
    if (grad) {
        const double d = env.supergradient(z);
        grad->resize(w_.size());
        for (std::size_t j = 0; j < w_.size(); ++j) (*grad)[j] = d * w_[j];
    }
    return env.value(z);
}

double NormalizedInstance::h_over(const std::vector<double>& x) const { return h_eval(upper_, x, nullptr); }

std::vector<double> NormalizedInstance::h_over_supergrad(const std::vector<double>& x) const
{
    std::vector<double> g;
    h_eval(upper_, x, &g);
    return g;
}

double NormalizedInstance::h_under(const std::vector<double>& x) const
{
    check_point(x);
    if (convex_act()) return f(x);
    return -h_eval(lower_, flipped(x), nullptr);
}

std::vector<double> NormalizedInstance::h_under_subgrad(const std::vector<double>& x) const
{
    check_point(x);
    if (convex_act()) return f_grad(x);
    std::vector<double> g;
    h_eval(lower_, flipped(x), &g);
    return g;
}

Normalized normalize(const RawInstance& raw)
{
    raw.validate();
    Activation act = raw.act;
    double sign = 1.0;
    if (act.shape().curvature == Curvature::ReflectedSShaped) {
        // sigma(z) = mirrored(-z): flip every weight and the bias
        act = act.mirrored();
        sign = -1.0;
    }
    double b = sign * raw.b;
    ReindexMap map;
    map.original_dim = raw.w.size();
    std::vector<double> w;
    for (std::size_t i = 0; i < raw.w.size(); ++i) {
        const double wi = sign * raw.w[i];
        const Interval& iv = raw.box[i];
        if (wi == 0.0) {
            map.dropped.push_back(i);
            continue;
        }
        if (iv.lo == iv.hi) {
            b += wi * iv.lo;
            map.dropped.push_back(i);
            continue;
        }
        const double width = iv.hi - iv.lo;
        map.kept.push_back(i);
        if (wi > 0) {
            map.scale.push_back(width);
            map.shift.push_back(iv.lo);
            w.push_back(wi * width);
            b += wi * iv.lo;
        } else {
            map.scale.push_back(-width);
            map.shift.push_back(iv.hi);
            w.push_back(-wi * width);
            b += wi * iv.hi;
        }
    }
    return {NormalizedInstance(std::move(w), b, act), std::move(map)};
}

double Cut::rhs_at(const std::vector<double>& x) const
{
    double v = offset;
    for (std::size_t k = 0; k < coeffs.size(); ++k) v += coeffs[k] * x[k];
    return v;
}

BoxEnvelope::BoxEnvelope(const RawInstance& raw) : raw_(raw), norm_(normalize(raw)) {}

std::vector<double> BoxEnvelope::to_unit_checked(const std::vector<double>& x) const
{
    if (x.size() != raw_.w.size())
        throw InvalidArgument("point has dimension " + std::to_string(x.size()) + ", box has " +
                              std::to_string(raw_.w.size()));
    for (std::size_t k = 0; k < x.size(); ++k) {
        const Interval& iv = raw_.box[k];
        const double tol = kBoxTol * std::max({1.0, std::abs(iv.lo), std::abs(iv.hi)});
        if (!iv.contains(x[k], tol)) throw InvalidArgument("point outside the instance box");
    }
    std::vector<double> t = norm_.map.to_unit(x);
    for (double& v : t) v = std::clamp(v, 0.0, 1.0);
    return t;
}

double BoxEnvelope::f(const std::vector<double>& x) const
{
    to_unit_checked(x);
    double z = raw_.b;
    for (std::size_t k = 0; k < x.size(); ++k) z += raw_.w[k] * raw_.box[k].clamp(x[k]);
    return raw_.act(z);
}

double BoxEnvelope::upper(const std::vector<double>& x, SeparationMode mode) const
{
    const auto t = to_unit_checked(x);
    return mode == SeparationMode::Env ? norm_.inst.conc_env(t) : norm_.inst.h_over(t);
}

double BoxEnvelope::lower(const std::vector<double>& x, SeparationMode mode) const
{
    const auto t = to_unit_checked(x);
    return mode == SeparationMode::Env ? norm_.inst.conv_env(t) : norm_.inst.h_under(t);
}

std::vector<double> BoxEnvelope::upper_grad(const std::vector<double>& x, SeparationMode mode) const
{
    const auto t = to_unit_checked(x);
    return norm_.map.pull_back(mode == SeparationMode::Env ? norm_.inst.conc_env_supergrad(t)
                                                           : norm_.inst.h_over_supergrad(t));
}

std::vector<double> BoxEnvelope::lower_grad(const std::vector<double>& x, SeparationMode mode) const
{
    const auto t = to_unit_checked(x);
    return norm_.map.pull_back(mode == SeparationMode::Env ? norm_.inst.conv_env_subgrad(t)
                                                           : norm_.inst.h_under_subgrad(t));
}

std::optional<Cut> BoxEnvelope::separate(const std::vector<double>& x, double y, SeparationMode mode) const
{
    const auto t = to_unit_checked(x);
    std::vector<double> xc(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) xc[k] = raw_.box[k].clamp(x[k]);

    const NormalizedInstance& inst = norm_.inst;
    const double up = mode == SeparationMode::Env ? inst.conc_env(t) : inst.h_over(t);
    const double lo = mode == SeparationMode::Env ? inst.conv_env(t) : inst.h_under(t);
    const double over = y - up;
    const double under = lo - y;
    if (over <= kInsideTol && under <= kInsideTol) return std::nullopt;

    Cut cut;
    double value;
    std::vector<double> grad_t;
    if (over >= under) {
        cut.sense = CutSense::UpperBoundsY;
        cut.violation = over;
        value = up;
        grad_t = mode == SeparationMode::Env ? inst.conc_env_supergrad(t) : inst.h_over_supergrad(t);
    } else {
        cut.sense = CutSense::LowerBoundsY;
        cut.violation = under;
        value = lo;
        grad_t = mode == SeparationMode::Env ? inst.conv_env_subgrad(t) : inst.h_under_subgrad(t);
    }
    cut.coeffs = norm_.map.pull_back(grad_t);
    cut.offset = value;
    for (std::size_t k = 0; k < xc.size(); ++k) cut.offset -= cut.coeffs[k] * xc[k];
    return cut;
}

} // namespace stfe
