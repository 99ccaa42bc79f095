#include <doctest.h>

#include <cmath>
#include <random>

#include "stfe/tightener.hpp"

using namespace stfe;

namespace {

/// x in [0,1], a = 2x - 1 through `act`, then an affine read-out of h.
NetworkModel single_neuron(const Activation& act, double scale = 2.0, double shift = -1.0)
{
    NetworkModel net;
    net.input_dim = 1;
    net.input_box = {{0, 1}};
    Layer l1;
    l1.W = DenseMatrix(1, 1, scale);
    l1.b = {shift};
    l1.act = act;
    Layer l2;
    l2.W = DenseMatrix(1, 1, 1.0);
    l2.b = {0.0};
    net.layers = {l1, l2};
    return net;
}

/// Max of c'(a, h) over the base relaxation of the single-neuron net.
double support(const RelaxationState& st, double ca, double ch)
{
    LinearProgram lp = st.lp;
    lp.set_cost(st.a_vars[0][0], ca);
    lp.set_cost(st.h_vars[0][0], ch);
    lp.set_sense(ObjectiveSense::Maximize);
    const auto out = solve(lp);
    REQUIRE(std::holds_alternative<LpOptimal>(out));
    return std::get<LpOptimal>(out).value;
}

std::vector<double> random_input(const NetworkModel& net, std::mt19937_64& rng)
{
    std::vector<double> x(net.input_dim);
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::uniform_real_distribution<double>(net.input_box[i].lo, net.input_box[i].hi)(rng);
    return x;
}

/// Empirical [min, max] of every preactivation.
ActivationBounds empirical_ranges(const NetworkModel& net, int samples, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    ActivationBounds r;
    for (const auto& l : net.layers) r.emplace_back(l.width(), Interval{1e300, -1e300});
    for (int s = 0; s < samples; ++s) {
        const auto st = forward(net, random_input(net, rng));
        for (std::size_t k = 0; k < r.size(); ++k)
            for (std::size_t v = 0; v < r[k].size(); ++v) {
                r[k][v].lo = std::min(r[k][v].lo, st.pre[k][v]);
                r[k][v].hi = std::max(r[k][v].hi, st.pre[k][v]);
            }
    }
    return r;
}

} // namespace

TEST_CASE("base relaxation of a ReLU neuron is the triangle")
{
    const auto net = single_neuron(Activation::relu());
    const auto bounds = interval_propagate(net);
    REQUIRE(bounds[0][0] == Interval{-1, 1});
    const auto st = build_base_relaxation(net, bounds, 2, 0);
    // triangle with vertices (-1,0), (0,0), (1,1)
    const std::vector<std::pair<double, double>> verts{{-1, 0}, {0, 0}, {1, 1}};
    for (int k = 0; k < 64; ++k) {
        const double t = 2 * M_PI * k / 64;
        const double ca = std::cos(t), ch = std::sin(t);
        double best = -1e300;
        for (auto [a, h] : verts) best = std::max(best, ca * a + ch * h);
        CHECK(support(st, ca, ch) == doctest::Approx(best).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("base relaxation of a concave piece caps the output")
{
    const auto net = single_neuron(Activation::tanh(), 1.5, 0.5); // a in [0.5, 2]
    const auto bounds = interval_propagate(net);
    const auto st = build_base_relaxation(net, bounds, 2, 0);
    CHECK(support(st, 0, 1) == doctest::Approx(std::tanh(2.0)));
    CHECK(-support(st, 0, -1) == doctest::Approx(std::tanh(0.5)));
    // not exact: the chord lies strictly below tanh in the middle
    CHECK(support(st, -0.1, 1) > std::tanh(1.0) - 0.1 * 1.0 + 1e-6);

    const auto lin = single_neuron(Activation::leaky_relu(0.1), 1.0, -2.0); // a in [-2, -1], affine
    const auto lst = build_base_relaxation(lin, interval_propagate(lin), 2, 0);
    for (double c : {-1.0, 1.0}) {
        // h = 0.1 a exactly on this interval
        CHECK(support(lst, 0.1 * c, -c) == doctest::Approx(0.0).scale(1.0));
    }
}

TEST_CASE("base relaxation bounds are valid")
{
    for (const auto& act : {Activation::sigmoid(), Activation::selu(), Activation::elu(1.0), Activation::silu()}) {
        const auto net = make_random_net({4, 5, 5, 5, 2}, act, 3);
        const auto bounds = interval_propagate(net);
        const auto emp = empirical_ranges(net, 100000, 1);
        for (std::size_t layer = 2; layer <= net.depth(); ++layer)
            for (std::size_t v = 0; v < net.layers[layer - 1].width(); ++v) {
                INFO(act.tag(), " layer ", layer, " neuron ", v);
                CHECK(base_bound(net, bounds, layer, v, Direction::Lower) <= emp[layer - 1][v].lo + 1e-7);
                CHECK(base_bound(net, bounds, layer, v, Direction::Upper) >= emp[layer - 1][v].hi - 1e-7);
            }
    }
}

TEST_CASE("cut rounds")
{
    // affine on the whole interval: the relaxation is exact, the incumbent is a true trace
    const auto exact = single_neuron(Activation::relu(), 0.5, 0.5);
    CutSession s0(exact, interval_propagate(exact), 2, 0, Direction::Lower, SeparationMode::Env);
    s0.solve();
    CHECK(cut_round(s0) == 0);
    CHECK_THROWS_AS(CutSession(exact, interval_propagate(exact), 2, 0, Direction::Lower, SeparationMode::Env).cut_round(),
                    InvalidArgument);

    const auto net = make_random_net({4, 5, 5, 5, 2}, Activation::sigmoid(), 7);
    const auto bounds = interval_propagate(net);
    int sessions_with_cuts = 0;
    for (std::size_t v = 0; v < 5; ++v)
        for (Direction dir : {Direction::Lower, Direction::Upper}) {
            CutSession s(net, bounds, 3, v, dir, SeparationMode::Env);
            const double before = s.solve();
            const std::size_t added = s.cut_round();
            CHECK(added <= 10); // at most one per upstream neuron
            if (added == 0) continue;
            ++sessions_with_cuts;
            const double after = s.solve();
            if (dir == Direction::Lower) CHECK(after >= before - 1e-9);
            else CHECK(after <= before + 1e-9);
        }
    CHECK(sessions_with_cuts > 0);
}

TEST_CASE("every cut holds on forward traces")
{
    const auto net = make_random_net({3, 5, 5, 5, 2}, Activation::elu(1.0), 21);
    const auto bounds = interval_propagate(net);
    std::vector<AddedCut> cuts;
    for (SeparationMode mode : {SeparationMode::Env, SeparationMode::HEst})
        for (std::size_t v = 0; v < 5; ++v)
            for (Direction dir : {Direction::Lower, Direction::Upper}) {
                CutSession s(net, bounds, 3, v, dir, mode);
                s.solve();
                for (int r = 0; r < 5 && s.cut_round() > 0; ++r) s.solve();
                cuts.insert(cuts.end(), s.cuts().begin(), s.cuts().end());
            }
    REQUIRE(!cuts.empty());
    std::mt19937_64 rng(2);
    double worst = 0;
    for (int t = 0; t < 10000; ++t) {
        const auto x = random_input(net, rng);
        const auto st = forward(net, x);
        for (const auto& c : cuts) {
            const auto& in = c.layer == 1 ? x : st.post[c.layer - 2];
            const double y = st.post[c.layer - 1][c.neuron];
            const double rhs = c.cut.rhs_at(in);
            const double viol = c.cut.sense == CutSense::UpperBoundsY ? y - rhs : rhs - y;
            worst = std::max(worst, viol);
        }
    }
    CHECK(worst <= 1e-7);
}

TEST_CASE("tighten_neuron")
{
    const auto net = make_random_net({4, 5, 5, 5, 2}, Activation::sigmoid(), 5);
    const auto bounds = interval_propagate(net);
    const auto emp = empirical_ranges(net, 100000, 9);
    for (std::size_t layer = 2; layer <= 4; ++layer)
        for (std::size_t v = 0; v < net.layers[layer - 1].width(); ++v)
            for (Direction dir : {Direction::Lower, Direction::Upper}) {
                const auto r = tighten_neuron(net, bounds, layer, v, dir, SeparationMode::Env);
                INFO("layer ", layer, " neuron ", v, " ", to_string(dir));
                CHECK(r.rounds <= 20);
                const double base = base_bound(net, bounds, layer, v, dir);
                if (dir == Direction::Lower) {
                    CHECK(r.bound <= emp[layer - 1][v].lo + 1e-7);
                    CHECK(r.bound >= base - 1e-9);
                } else {
                    CHECK(r.bound >= emp[layer - 1][v].hi - 1e-7);
                    CHECK(r.bound <= base + 1e-9);
                }
                for (std::size_t k = 1; k < r.objective_trace.size(); ++k) {
                    if (dir == Direction::Lower) CHECK(r.objective_trace[k] >= r.objective_trace[k - 1] - 1e-9);
                    else CHECK(r.objective_trace[k] <= r.objective_trace[k - 1] + 1e-9);
                }
            }

    // first-layer targets have nothing upstream to cut
    for (std::size_t v = 0; v < 5; ++v) {
        const auto e = tighten_neuron(net, bounds, 1, v, Direction::Lower, SeparationMode::Env);
        const auto h = tighten_neuron(net, bounds, 1, v, Direction::Lower, SeparationMode::HEst);
        CHECK(e.cuts == 0);
        CHECK(std::abs(e.bound - h.bound) <= 1e-6);
        CHECK(e.bound == doctest::Approx(bounds[0][v].lo));
    }
}

TEST_CASE("inconsistent bounds are reported")
{
    const auto net = make_random_net({2, 3, 3, 1}, Activation::sigmoid(), 4);
    auto bounds = interval_propagate(net);
    bounds[0][0] = {bounds[0][0].hi + 1.0, bounds[0][0].hi + 2.0};
    CHECK_THROWS_AS(tighten_neuron(net, bounds, 2, 0, Direction::Lower, SeparationMode::Env), InconsistentBoundsError);
    bounds[0][0] = {1.0, 0.0};
    CHECK_THROWS_AS(build_base_relaxation(net, bounds, 2, 0), InconsistentBoundsError);
}

TEST_CASE("tighten_all")
{
    const auto net = make_random_net({4, 5, 5, 5, 2}, Activation::selu(), 13);
    const auto env = tighten_all(net, SeparationMode::Env);
    const auto hest = tighten_all(net, SeparationMode::HEst);
    REQUIRE(env.rows.size() == 2 * (5 + 5));
    REQUIRE(hest.rows.size() == env.rows.size());

    TightenOptions four;
    four.threads = 4;
    const auto again = tighten_all(net, SeparationMode::Env, four);
    CHECK(again.rows == env.rows);
    CHECK(tighten_all(net, SeparationMode::Env).rows == env.rows);

    const auto emp = empirical_ranges(net, 100000, 3);
    for (std::size_t i = 0; i < env.rows.size(); ++i) {
        const auto& e = env.rows[i];
        const auto& h = hest.rows[i];
        INFO("layer ", e.layer, " neuron ", e.neuron, " ", to_string(e.direction));
        CHECK(e.layer == h.layer);
        CHECK(e.initial == h.initial);
        CHECK(e.improvement >= h.improvement - 1e-6);
        CHECK(e.improvement >= -1e-9);
        CHECK(e.rounds <= 20);
        const auto& r = emp[e.layer - 1][e.neuron];
        for (const auto* row : {&e, &h}) {
            if (row->direction == Direction::Lower) CHECK(row->tightened <= r.lo + 1e-7);
            else CHECK(row->tightened >= r.hi - 1e-7);
        }
    }
    for (std::size_t k = 0; k < env.final_bounds.size(); ++k)
        for (std::size_t v = 0; v < env.final_bounds[k].size(); ++v) CHECK(env.final_bounds[k][v].contains(emp[k][v]));

    // a single hidden layer leaves nothing to target
    const auto shallow = make_random_net({4, 5, 2}, Activation::sigmoid(), 1);
    CHECK(tighten_all(shallow, SeparationMode::Env).rows.empty());
}

TEST_CASE("report csv and improvement ratio")
{
    bool abs_flag = true;
    CHECK(improvement_ratio(-2.0, -1.5, Direction::Lower, &abs_flag) == doctest::Approx(0.25));
    CHECK_FALSE(abs_flag);
    CHECK(improvement_ratio(4.0, 3.0, Direction::Upper) == doctest::Approx(0.25));
    CHECK(improvement_ratio(0.0, 0.3, Direction::Lower, &abs_flag) == doctest::Approx(0.3));
    CHECK(abs_flag);

    const auto net = make_random_net({3, 4, 4, 2}, Activation::elu(1.0), 8);
    const auto rep = tighten_all(net, SeparationMode::Env);
    const auto csv = rep.to_csv();
    CHECK(csv.rfind("layer,neuron,direction,initial,tightened,improvement,rounds,cuts,stalled", 0) == 0);
    const auto back = BoundsReport::from_csv(csv);
    CHECK(back.rows == rep.rows);
    CHECK(back.to_csv() == csv);
    CHECK_THROWS(BoundsReport::from_csv("layer,neuron\n1,2\n"));
}
