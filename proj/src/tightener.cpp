#include "stfe/tightener.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json_text.hpp"
#include "parallel.hpp"

namespace stfe {

const char* to_string(Direction d) { return d == Direction::Lower ? "lower" : "upper"; }
const char* to_string(SeparationMode m) { return m == SeparationMode::Env ? "env" : "hest"; }

namespace {

void check_target(const NetworkModel& net, const ActivationBounds& bounds, std::size_t layer, std::size_t neuron)
{
    if (layer < 1 || layer > net.depth())
        throw InvalidArgument("layer " + std::to_string(layer) + " outside 1.." + std::to_string(net.depth()));
    if (neuron >= net.layers[layer - 1].width())
        throw InvalidArgument("neuron " + std::to_string(neuron) + " outside layer " + std::to_string(layer));
    if (bounds.size() < layer) throw InvalidArgument("bounds do not cover the target layer");
    for (std::size_t j = 0; j < layer; ++j) {
        if (bounds[j].size() != net.layers[j].width()) throw InvalidArgument("bounds have the wrong layer width");
        for (const auto& iv : bounds[j])
            if (!(iv.lo <= iv.hi))
                throw InconsistentBoundsError("bounds of layer " + std::to_string(j + 1) + " are inconsistent");
    }
}

// h <= / >= sigma(p) + g (a - p) at both interval ends; the caps max/min sigma
// are carried by h's variable bounds.
void add_activation_rows(LinearProgram& lp, std::size_t a, std::size_t h, const Activation& act, const Interval& iv)
{
    const std::size_t n = lp.num_variables();
    auto line = [&](double p, double g, Comparator cmp) {
        std::vector<double> row(n, 0.0);
        row[h] = 1.0;
        row[a] = -g;
        lp.add_constraint(std::move(row), cmp, act(p) - g * p);
    };
    if (iv.lo == iv.hi) {
        std::vector<double> row(n, 0.0);
        row[h] = 1.0;
        lp.add_constraint(std::move(row), Comparator::Eq, act(iv.lo));
        return;
    }
    auto add_side = [&](auto&& slope_at, Comparator cmp) {
        double g_lo, g_hi;
        try {
            g_lo = slope_at(iv.lo);
            g_hi = slope_at(iv.hi);
        } catch (const NotStfeError&) {
            return; // no exact one-dimensional envelope here; variable bounds remain
        }
        line(iv.lo, g_lo, cmp);
        // same line twice when the envelope is a single secant
        const double off_lo = act(iv.lo) - g_lo * iv.lo;
        const double off_hi = act(iv.hi) - g_hi * iv.hi;
        const double scale = 1.0 + std::abs(g_lo) + std::abs(off_lo);
        if (std::abs(g_lo - g_hi) > 1e-12 * scale || std::abs(off_lo - off_hi) > 1e-12 * scale) line(iv.hi, g_hi, cmp);
    };
    add_side([&](double p) { return conc_env_1d_supergrad(act, iv, p); }, Comparator::Le);
    add_side([&](double p) { return conv_env_1d_subgrad(act, iv, p); }, Comparator::Ge);
}

} // namespace

RelaxationState build_base_relaxation(const NetworkModel& net, const ActivationBounds& bounds, std::size_t layer,
                                      std::size_t neuron)
{
    check_target(net, bounds, layer, neuron);
    RelaxationState st;
    st.layer = layer;
    st.neuron = neuron;
    st.bounds = ActivationBounds(bounds.begin(), bounds.begin() + static_cast<std::ptrdiff_t>(layer));
    for (std::size_t j = 0; j < layer; ++j) st.boxes.push_back(input_box_of(net, bounds, j));

    LinearProgram& lp = st.lp;
    for (std::size_t k = 0; k < net.input_dim; ++k)
        st.x_vars.push_back(lp.add_variable(net.input_box[k].lo, net.input_box[k].hi, 0.0, "x" + std::to_string(k)));
    for (std::size_t j = 0; j + 1 < layer; ++j) {
        const Layer& L = net.layers[j];
        std::vector<std::size_t> av, hv;
        for (std::size_t r = 0; r < L.width(); ++r) {
            const Interval& iv = bounds[j][r];
            const Interval post = post_interval(L, iv);
            const std::string tag = std::to_string(j + 1) + "_" + std::to_string(r);
            av.push_back(lp.add_variable(iv.lo, iv.hi, 0.0, "a" + tag));
            hv.push_back(lp.add_variable(post.lo, post.hi, 0.0, "h" + tag));
        }
        st.a_vars.push_back(std::move(av));
        st.h_vars.push_back(std::move(hv));
    }
    const Interval& tiv = bounds[layer - 1][neuron];
    st.target_var = lp.add_variable(tiv.lo, tiv.hi, 0.0, "target");

    auto affine_row = [&](std::size_t j, std::size_t r, std::size_t out_var) {
        const Layer& L = net.layers[j];
        const auto& in = st.inputs_of(j + 1);
        std::vector<std::pair<std::size_t, double>> terms{{out_var, 1.0}};
        for (std::size_t c = 0; c < L.W.cols; ++c)
            if (L.W(r, c) != 0.0) terms.emplace_back(in[c], -L.W(r, c));
        lp.add_sparse_constraint(terms, Comparator::Eq, L.b[r]);
    };
    for (std::size_t j = 0; j + 1 < layer; ++j) {
        const Layer& L = net.layers[j];
        for (std::size_t r = 0; r < L.width(); ++r) {
            affine_row(j, r, st.a_vars[j][r]);
            if (L.act) {
                add_activation_rows(lp, st.a_vars[j][r], st.h_vars[j][r], *L.act, bounds[j][r]);
            } else {
                lp.add_sparse_constraint({{st.h_vars[j][r], 1.0}, {st.a_vars[j][r], -1.0}}, Comparator::Eq, 0.0);
            }
        }
    }
    affine_row(layer - 1, neuron, st.target_var);
    return st;
}

UpstreamEnvelopes build_upstream(const NetworkModel& net, const ActivationBounds& bounds, std::size_t layer)
{
    UpstreamEnvelopes ups;
    for (std::size_t j = 0; j + 1 < layer; ++j) {
        const Layer& L = net.layers[j];
        const auto box = input_box_of(net, bounds, j);
        std::vector<std::shared_ptr<const BoxEnvelope>> row;
        for (std::size_t r = 0; r < L.width(); ++r) {
            if (!L.act) {
                row.push_back(nullptr);
                continue;
            }
            RawInstance raw{L.W.row(r), L.b[r], *L.act, box};
            row.push_back(std::make_shared<const BoxEnvelope>(raw));
        }
        ups.push_back(std::move(row));
    }
    return ups;
}

namespace {

RelaxationState with_objective(RelaxationState st, Direction dir)
{
    st.lp.set_cost(st.target_var, 1.0);
    st.lp.set_sense(dir == Direction::Lower ? ObjectiveSense::Minimize : ObjectiveSense::Maximize);
    return st;
}

} // namespace

CutSession::CutSession(const NetworkModel& net, const ActivationBounds& bounds, std::size_t layer, std::size_t neuron,
                       Direction dir, SeparationMode mode, TightenOptions opts,
                       std::shared_ptr<const UpstreamEnvelopes> upstream)
    : state_(with_objective(build_base_relaxation(net, bounds, layer, neuron), dir)),
      solver_(state_.lp),
      upstream_(upstream ? std::move(upstream) : std::make_shared<const UpstreamEnvelopes>(build_upstream(net, bounds, layer))),
      mode_(mode),
      opts_(opts)
{
}

double CutSession::solve()
{
    const LpOutcome out = solver_.solve();
    if (std::holds_alternative<LpInfeasible>(out))
        throw InconsistentBoundsError("relaxation for layer " + std::to_string(state_.layer) + " neuron " +
                                      std::to_string(state_.neuron) + " is infeasible");
    if (std::holds_alternative<LpUnbounded>(out)) throw LpNumericalError("bounded relaxation reported unbounded");
    const auto& opt = std::get<LpOptimal>(out);
    incumbent_ = opt.point;
    return opt.value;
}

std::size_t CutSession::cut_round()
{
    if (incumbent_.empty()) throw InvalidArgument("cut_round needs a solved relaxation");
    std::size_t added = 0;
    const std::size_t n = solver_.program().num_variables();
    for (std::size_t j = 0; j + 1 < state_.layer; ++j) {
        const auto& in_vars = state_.inputs_of(j + 1);
        const auto& box = state_.boxes[j];
        std::vector<double> xin(in_vars.size());
        for (std::size_t k = 0; k < in_vars.size(); ++k) xin[k] = box[k].clamp(incumbent_[in_vars[k]]);
        for (std::size_t r = 0; r < state_.h_vars[j].size(); ++r) {
            const auto& env = (*upstream_)[j][r];
            if (!env) continue;
            std::optional<Cut> cut;
            try {
                cut = env->separate(xin, incumbent_[state_.h_vars[j][r]], mode_);
            } catch (const NotStfeError&) {
                continue;
            }
            if (!cut || cut->violation < opts_.min_violation) continue;
            std::vector<double> row(n, 0.0);
            row[state_.h_vars[j][r]] = 1.0;
            for (std::size_t k = 0; k < in_vars.size(); ++k) row[in_vars[k]] -= cut->coeffs[k];
            solver_.add_constraint(std::move(row),
                                   cut->sense == CutSense::UpperBoundsY ? Comparator::Le : Comparator::Ge,
                                   cut->offset);
            cuts_.push_back({j + 1, r, std::move(*cut)});
            ++added;
        }
    }
    return added;
}

NeuronResult tighten_neuron(const NetworkModel& net, const ActivationBounds& bounds, std::size_t layer,
                            std::size_t neuron, Direction dir, SeparationMode mode, const TightenOptions& opts,
                            std::shared_ptr<const UpstreamEnvelopes> upstream)
{
    CutSession session(net, bounds, layer, neuron, dir, mode, opts, std::move(upstream));
    NeuronResult res;
    double value = session.solve();
    res.objective_trace.push_back(value);
    while (res.rounds < opts.max_rounds) {
        ++res.rounds;
        const std::size_t added = session.cut_round();
        if (added == 0) break;
        res.cuts += static_cast<int>(added);
        const double next = session.solve();
        res.objective_trace.push_back(next);
        const bool stall = std::abs(next - value) <= opts.stall_tol;
        value = next;
        if (stall) {
            res.stalled = true;
            break;
        }
    }
    res.bound = value;
    return res;
}

double base_bound(const NetworkModel& net, const ActivationBounds& bounds, std::size_t layer, std::size_t neuron,
                  Direction dir)
{
    RelaxationState st = with_objective(build_base_relaxation(net, bounds, layer, neuron), dir);
    const LpOutcome out = solve(st.lp);
    if (std::holds_alternative<LpInfeasible>(out))
        throw InconsistentBoundsError("base relaxation for layer " + std::to_string(layer) + " is infeasible");
    if (std::holds_alternative<LpUnbounded>(out)) throw LpNumericalError("bounded relaxation reported unbounded");
    return std::get<LpOptimal>(out).value;
}

double improvement_ratio(double initial, double tightened, Direction dir, bool* absolute)
{
    const double delta = dir == Direction::Lower ? tightened - initial : initial - tightened;
    const bool abs_change = std::abs(initial) < 1e-12;
    if (absolute) *absolute = abs_change;
    return abs_change ? delta : delta / std::abs(initial);
}

BoundsReport tighten_all(const NetworkModel& net, SeparationMode mode, const TightenOptions& opts)
{
    net.validate();
    const ActivationBounds initial_bounds = interval_propagate(net);
    ActivationBounds bounds = initial_bounds;
    BoundsReport report;

    // hidden layers only; the last layer is the network's output
    for (std::size_t layer = 2; layer < net.depth(); ++layer) {
        const std::size_t width = net.layers[layer - 1].width();
        auto upstream = std::make_shared<const UpstreamEnvelopes>(build_upstream(net, bounds, layer));
        std::vector<BoundsRow> rows(2 * width);
        detail::parallel_for(rows.size(), opts.threads, [&](std::size_t task) {
            const std::size_t v = task / 2;
            const Direction dir = task % 2 == 0 ? Direction::Lower : Direction::Upper;
            const double initial = base_bound(net, initial_bounds, layer, v, dir);
            const NeuronResult nr = tighten_neuron(net, bounds, layer, v, dir, mode, opts, upstream);
            BoundsRow& row = rows[task];
            row.layer = layer;
            row.neuron = v;
            row.direction = dir;
            row.initial = initial;
            // both are valid bounds; keep the better
            row.tightened = dir == Direction::Lower ? std::max(nr.bound, initial) : std::min(nr.bound, initial);
            row.improvement = improvement_ratio(initial, row.tightened, dir, &row.absolute);
            row.rounds = nr.rounds;
            row.cuts = nr.cuts;
            row.stalled = nr.stalled;
        });

        for (std::size_t v = 0; v < width; ++v) {
            Interval& cur = bounds[layer - 1][v];
            double lo = std::max(cur.lo, rows[2 * v].tightened);
            double hi = std::min(cur.hi, rows[2 * v + 1].tightened);
            if (lo > hi) {
                if (lo - hi > 1e-9 * std::max({1.0, std::abs(lo), std::abs(hi)}))
                    throw InconsistentBoundsError("tightened bounds of layer " + std::to_string(layer) + " neuron " +
                                                  std::to_string(v) + " crossed");
                lo = hi = 0.5 * (lo + hi);
            }
            cur = {lo, hi};
        }
        refine_bounds(net, bounds, layer);
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    }
    report.final_bounds = std::move(bounds);
    return report;
}

std::string BoundsReport::to_csv() const
{
    std::string out = "layer,neuron,direction,initial,tightened,improvement,rounds,cuts,stalled,absolute\n";
    for (const auto& r : rows) {
        out += std::to_string(r.layer) + ',' + std::to_string(r.neuron) + ',' + to_string(r.direction) + ',' +
               detail::format_double(r.initial) + ',' + detail::format_double(r.tightened) + ',' +
               detail::format_double(r.improvement) + ',' + std::to_string(r.rounds) + ',' + std::to_string(r.cuts) +
               ',' + (r.stalled ? "true" : "false") + ',' + (r.absolute ? "true" : "false") + '\n';
    }
    return out;
}

BoundsReport BoundsReport::from_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("layer,neuron,direction", 0) != 0)
        throw InvalidArgument("bounds CSV lacks its header");
    auto flag = [](const std::string& s) {
        if (s == "true") return true;
        if (s == "false") return false;
        throw InvalidArgument("expected true/false in bounds CSV, got '" + s + "'");
    };
    BoundsReport rep;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
        if (f.size() != 10) throw InvalidArgument("bounds CSV row has " + std::to_string(f.size()) + " fields");
        try {
            BoundsRow r;
            r.layer = std::stoul(f[0]);
            r.neuron = std::stoul(f[1]);
            if (f[2] == "lower")
                r.direction = Direction::Lower;
            else if (f[2] == "upper")
                r.direction = Direction::Upper;
            else
                throw InvalidArgument("unknown direction '" + f[2] + "'");
            r.initial = std::stod(f[3]);
            r.tightened = std::stod(f[4]);
            r.improvement = std::stod(f[5]);
            r.rounds = std::stoi(f[6]);
            r.cuts = std::stoi(f[7]);
            r.stalled = flag(f[8]);
            r.absolute = flag(f[9]);
            rep.rows.push_back(r);
        } catch (const std::logic_error& e) {
            throw InvalidArgument(std::string("malformed bounds CSV row: ") + e.what());
        }
    }
    return rep;
}

} // namespace stfe
