#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>

#include "stfe/network.hpp"

using namespace stfe;

namespace {

std::string data_dir()
{
    const char* d = std::getenv("STFE_TEST_DATA");
    return d ? d : "tests/data";
}

std::filesystem::path temp_file(const std::string& name)
{
    return std::filesystem::temp_directory_path() / ("stfe_net_" + std::to_string(::getpid()) + "_" + name);
}

std::vector<double> random_input(const NetworkModel& net, std::mt19937_64& rng)
{
    std::vector<double> x(net.input_dim);
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::uniform_real_distribution<double>(net.input_box[i].lo, net.input_box[i].hi)(rng);
    return x;
}

NetworkFormatError::Kind parse_kind(const std::string& text)
{
    try {
        parse_network_json(text);
    } catch (const NetworkFormatError& e) {
        return e.kind();
    }
    FAIL("parse succeeded");
    return NetworkFormatError::Kind::Io;
}

} // namespace

TEST_CASE("forward examples")
{
    NetworkModel id;
    id.input_dim = 1;
    id.input_box = {{0, 1}};
    Layer l;
    l.W = DenseMatrix(1, 1, 1.0);
    l.b = {0.0};
    l.act = Activation::relu();
    id.layers.push_back(l);
    const auto st = forward(id, {0.3});
    CHECK(st.pre[0][0] == 0.3);
    CHECK(st.post[0][0] == 0.3);

    auto zero = make_random_net({3, 4, 2}, Activation::sigmoid(), 1);
    for (auto& layer : zero.layers) std::fill(layer.W.data.begin(), layer.W.data.end(), 0.0);
    const auto zs = forward(zero, {0.1, 0.5, 0.9});
    for (std::size_t k = 0; k < zero.layers.size(); ++k)
        for (std::size_t r = 0; r < zero.layers[k].width(); ++r) CHECK(zs.pre[k][r] == zero.layers[k].b[r]);

    // direct re-evaluation of a random 2-layer net
    const auto net = make_random_net({3, 4, 2}, Activation::tanh(), 5);
    std::mt19937_64 rng(1);
    for (int t = 0; t < 100; ++t) {
        const auto x = random_input(net, rng);
        const auto s = forward(net, x);
        std::vector<double> h(4);
        for (int r = 0; r < 4; ++r) {
            double a = net.layers[0].b[r];
            for (int c = 0; c < 3; ++c) a += net.layers[0].W(r, c) * x[c];
            h[r] = std::tanh(a);
            CHECK(std::abs(s.post[0][r] - h[r]) <= 1e-12);
        }
        for (int r = 0; r < 2; ++r) {
            double a = net.layers[1].b[r];
            for (int c = 0; c < 4; ++c) a += net.layers[1].W(r, c) * h[c];
            CHECK(std::abs(s.post[1][r] - a) <= 1e-12);
        }
    }
    CHECK_THROWS_AS(forward(net, {0.1, 0.2}), InvalidArgument);
    CHECK_THROWS_AS(forward(net, {0.1, 0.2, 1.5}), InvalidArgument);
}

TEST_CASE("interval propagation")
{
    NetworkModel net;
    net.input_dim = 2;
    net.input_box = {{0, 1}, {0, 1}};
    Layer l;
    l.W = DenseMatrix(1, 2);
    l.W(0, 0) = 1;
    l.W(0, 1) = -1;
    l.b = {0};
    l.act = Activation::sigmoid();
    net.layers.push_back(l);
    Layer out;
    out.W = DenseMatrix(1, 1, 2.0);
    out.b = {0.5};
    net.layers.push_back(out);
    const auto b = interval_propagate(net);
    CHECK(b[0][0] == Interval{-1, 1});
    const auto post = post_interval(net.layers[0], b[0][0]);
    CHECK(post.lo == doctest::Approx(1 / (1 + std::exp(1.0))));
    CHECK(post.hi == doctest::Approx(1 / (1 + std::exp(-1.0))));
    CHECK(b[1][0].lo == doctest::Approx(2 * post.lo + 0.5));

    std::mt19937_64 rng(3);
    for (const auto& act : {Activation::sigmoid(), Activation::silu(), Activation::elu(1.0)}) {
        const auto n = make_random_net({4, 5, 5, 5, 2}, act, 9);
        const auto bounds = interval_propagate(n);
        for (int t = 0; t < 100000; ++t) {
            const auto s = forward(n, random_input(n, rng));
            for (std::size_t k = 0; k < n.layers.size(); ++k)
                for (std::size_t r = 0; r < s.pre[k].size(); ++r)
                    if (!bounds[k][r].contains(s.pre[k][r], 1e-12)) FAIL("preactivation escaped its interval");
        }
    }
}

TEST_CASE("sub-boxes never loosen propagated intervals")
{
    std::mt19937_64 rng(4);
    const auto net = make_random_net({3, 5, 5, 2}, Activation::selu(), 2);
    const auto wide = interval_propagate(net);
    for (int t = 0; t < 50; ++t) {
        auto sub = net;
        for (auto& iv : sub.input_box) {
            double a = std::uniform_real_distribution<double>(0, 1)(rng), b = std::uniform_real_distribution<double>(0, 1)(rng);
            if (a > b) std::swap(a, b);
            iv = {a, b};
        }
        const auto narrow = interval_propagate(sub);
        for (std::size_t k = 0; k < wide.size(); ++k)
            for (std::size_t r = 0; r < wide[k].size(); ++r) CHECK(wide[k][r].contains(narrow[k][r]));
    }
}

TEST_CASE("refine bounds")
{
    const auto net = make_random_net({3, 4, 4, 2}, Activation::sigmoid(), 11);
    auto bounds = interval_propagate(net);
    const auto before = bounds;
    bounds[0][0].hi = 0.5 * (bounds[0][0].lo + bounds[0][0].hi);
    refine_bounds(net, bounds, 1);
    for (std::size_t k = 1; k < bounds.size(); ++k)
        for (std::size_t r = 0; r < bounds[k].size(); ++r) CHECK(before[k][r].contains(bounds[k][r]));
    auto bad = interval_propagate(net);
    bad[1][0] = {bad[1][0].hi + 1.0, bad[1][0].hi + 2.0};
    CHECK_THROWS_AS(refine_bounds(net, bad, 1), InconsistentBoundsError);
}

TEST_CASE("json round trip and errors")
{
    const auto net = make_random_net({3, 5, 5, 2}, Activation::elu(2.0), 42);
    const auto path = temp_file("rt.nn.json");
    save_json(net, path.string());
    const auto back = load_json(path.string());
    CHECK(back == net);
    CHECK(network_to_json(back) == network_to_json(net));

    const std::string text = network_to_json(net);
    CHECK(parse_kind(text.substr(0, text.size() / 2)) == NetworkFormatError::Kind::MalformedJson);
    CHECK(parse_kind(R"({"input_dim": 2, "input_box": [[0,1],[0,1]], "layers": [{"W": [[1,2,3]], "b": [0], "activation": null}]})") ==
          NetworkFormatError::Kind::DimensionMismatch);
    CHECK(parse_kind(R"({"input_dim": 1, "input_box": [[0,1]], "layers": [{"W": [[1]], "b": [0], "activation": {"tag": "gelu"}}, {"W": [[1]], "b": [0], "activation": null}]})") ==
          NetworkFormatError::Kind::UnknownActivation);
    CHECK(parse_kind(R"({"input_dim": 1, "input_box": [[0,1]]})") == NetworkFormatError::Kind::MalformedJson);
    CHECK(parse_kind(R"({"input_dim": 1, "input_box": [[0,1]], "layers": [{"W": [[1]], "b": [0, 1], "activation": null}]})") ==
          NetworkFormatError::Kind::DimensionMismatch);
    try {
        load_json((std::filesystem::temp_directory_path() / "definitely_missing.nn.json").string());
        FAIL("missing file loaded");
    } catch (const NetworkFormatError& e) {
        CHECK(e.kind() == NetworkFormatError::Kind::Io);
    }
    std::filesystem::remove(path);
}

TEST_CASE("fixture network loads and evaluates")
{
    const auto net = load_json(data_dir() + "/sigmoid_5x5.nn.json");
    CHECK(net.input_dim == 4);
    CHECK(net.depth() == 6);
    CHECK(!net.layers.back().act.has_value());
    const auto s = forward(net, {0.2, 0.4, 0.6, 0.8});
    CHECK(s.post.back().size() == 3);
    for (double v : s.post.back()) CHECK(std::isfinite(v));
}

TEST_CASE("random networks")
{
    const auto a = make_random_net({10, 5, 5, 2}, Activation::sigmoid(), 0);
    const auto b = make_random_net({10, 5, 5, 2}, Activation::sigmoid(), 1);
    const auto c = make_random_net({10, 5, 5, 2}, Activation::sigmoid(), 2);
    CHECK(a != b);
    CHECK(b != c);
    CHECK(a != c);
    CHECK(make_random_net({10, 5, 5, 2}, Activation::sigmoid(), 1) == b);
    CHECK(a.layers.size() == 3);
    CHECK(a.layers[0].W.rows == 5);
    CHECK(a.layers[0].W.cols == 10);
    CHECK(a.layers[2].W.rows == 2);
    CHECK(!a.layers[2].act.has_value());
    for (const auto& l : a.layers) {
        const double c0 = 4.0 / static_cast<double>(l.W.cols);
        for (double w : l.W.data) CHECK(std::abs(w) <= c0);
        for (double v : l.b) CHECK(std::abs(v) <= 1.0);
    }
    CHECK_THROWS_AS(make_random_net({3}, Activation::sigmoid(), 0), InvalidArgument);

    // first hidden preactivations (layer 2 when the input counts as layer 1)
    // reach across the sigmoid's inflection at 0
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto n = make_random_net({10, 5, 5, 5, 2}, Activation::sigmoid(), seed);
        const auto bounds = interval_propagate(n);
        int straddle = 0;
        for (const auto& iv : bounds[0]) straddle += iv.lo < 0 && iv.hi > 0;
        CHECK(straddle > 0);
    }
}
