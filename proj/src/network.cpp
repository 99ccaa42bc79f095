#include "stfe/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json_text.hpp"
#include "stfe/rng.hpp"

namespace stfe {

namespace {

using Kind = NetworkFormatError::Kind;

[[noreturn]] void mismatch(const std::string& what) { throw NetworkFormatError(Kind::DimensionMismatch, what); }

} // namespace

void NetworkModel::validate() const
{
    if (input_dim == 0) mismatch("network needs at least one input");
    if (input_box.size() != input_dim)
        mismatch("input box has " + std::to_string(input_box.size()) + " entries, expected " + std::to_string(input_dim));
    for (const auto& iv : input_box)
        if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi) mismatch("input box interval is invalid");
    if (layers.empty()) mismatch("network has no layers");
    std::size_t prev = input_dim;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Layer& layer = layers[l];
        const std::string where = "layer " + std::to_string(l + 1);
        if (layer.W.rows == 0) mismatch(where + " has no neurons");
        if (layer.W.cols != prev)
            mismatch(where + " expects " + std::to_string(layer.W.cols) + " inputs but receives " + std::to_string(prev));
        if (layer.W.data.size() != layer.W.rows * layer.W.cols) mismatch(where + " weight storage is inconsistent");
        if (layer.b.size() != layer.W.rows)
            mismatch(where + " has " + std::to_string(layer.b.size()) + " biases for " + std::to_string(layer.W.rows) +
                     " neurons");
        if (!layer.act && l + 1 != layers.size()) mismatch(where + " is hidden but has no activation");
        prev = layer.W.rows;
    }
}

LayerState forward(const NetworkModel& net, const std::vector<double>& x)
{
    if (x.size() != net.input_dim)
        throw InvalidArgument("input has " + std::to_string(x.size()) + " entries, network expects " +
                              std::to_string(net.input_dim));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const Interval& iv = net.input_box[i];
        const double tol = 1e-9 * std::max({1.0, std::abs(iv.lo), std::abs(iv.hi)});
        if (!iv.contains(x[i], tol)) throw InvalidArgument("input outside the network's input box");
    }
    LayerState st;
    const std::vector<double>* in = &x;
    for (const Layer& layer : net.layers) {
        std::vector<double> a(layer.width());
        for (std::size_t r = 0; r < layer.width(); ++r) {
            double s = layer.b[r];
            for (std::size_t c = 0; c < layer.W.cols; ++c) s += layer.W(r, c) * (*in)[c];
            a[r] = s;
        }
        std::vector<double> h = a;
        if (layer.act)
            for (double& v : h) v = (*layer.act)(v);
        st.pre.push_back(std::move(a));
        st.post.push_back(std::move(h));
        in = &st.post.back();
    }
    return st;
}

Interval post_interval(const Layer& layer, const Interval& pre)
{
    return layer.act ? layer.act->range_on(pre) : pre;
}

std::vector<Interval> input_box_of(const NetworkModel& net, const ActivationBounds& bounds, std::size_t layer)
{
    if (layer == 0) return net.input_box;
    const Layer& prev = net.layers[layer - 1];
    std::vector<Interval> box(prev.width());
    for (std::size_t j = 0; j < box.size(); ++j) box[j] = post_interval(prev, bounds[layer - 1][j]);
    return box;
}

namespace {

std::vector<Interval> propagate_layer(const Layer& layer, const std::vector<Interval>& in)
{
    std::vector<Interval> out(layer.width());
    for (std::size_t r = 0; r < layer.width(); ++r) {
        double lo = layer.b[r], hi = layer.b[r];
        for (std::size_t c = 0; c < layer.W.cols; ++c) {
            const double w = layer.W(r, c);
            if (w >= 0) {
                lo += w * in[c].lo;
                hi += w * in[c].hi;
            } else {
                lo += w * in[c].hi;
                hi += w * in[c].lo;
            }
        }
        out[r] = {lo, hi};
    }
    return out;
}

} // namespace

ActivationBounds interval_propagate(const NetworkModel& net)
{
    ActivationBounds bounds;
    bounds.reserve(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l)
        bounds.push_back(propagate_layer(net.layers[l], input_box_of(net, bounds, l)));
    return bounds;
}

void refine_bounds(const NetworkModel& net, ActivationBounds& bounds, std::size_t first_layer)
{
    for (std::size_t l = first_layer; l < net.layers.size(); ++l) {
        const auto fresh = propagate_layer(net.layers[l], input_box_of(net, bounds, l));
        for (std::size_t r = 0; r < fresh.size(); ++r) {
            Interval& cur = bounds[l][r];
            double lo = std::max(cur.lo, fresh[r].lo);
            double hi = std::min(cur.hi, fresh[r].hi);
            if (lo > hi) {
                const double scale = std::max({1.0, std::abs(lo), std::abs(hi)});
                if (lo - hi > 1e-9 * scale)
                    throw InconsistentBoundsError("bounds of layer " + std::to_string(l + 1) + " neuron " +
                                                  std::to_string(r) + " became empty");
                lo = hi = 0.5 * (lo + hi);
            }
            cur = {lo, hi};
        }
    }
}

namespace {

std::vector<double> read_numbers(const nlohmann::json& j, const std::string& what)
{
    if (!j.is_array()) throw NetworkFormatError(Kind::MalformedJson, what + " must be an array of numbers");
    std::vector<double> v;
    v.reserve(j.size());
    for (const auto& e : j) {
        if (!e.is_number()) throw NetworkFormatError(Kind::MalformedJson, what + " must be an array of numbers");
        v.push_back(e.get<double>());
    }
    return v;
}

Activation read_activation(const nlohmann::json& j)
{
    if (!j.is_object() || !j.contains("tag") || !j["tag"].is_string())
        throw NetworkFormatError(Kind::MalformedJson, "activation must be an object with a string 'tag'");
    std::map<std::string, double> params;
    if (j.contains("params")) {
        if (!j["params"].is_object()) throw NetworkFormatError(Kind::MalformedJson, "activation params must be an object");
        for (auto it = j["params"].begin(); it != j["params"].end(); ++it) {
            if (!it.value().is_number())
                throw NetworkFormatError(Kind::MalformedJson, "activation parameter '" + it.key() + "' must be a number");
            params[it.key()] = it.value().get<double>();
        }
    }
    try {
        return Activation::from_tag(j["tag"].get<std::string>(), params);
    } catch (const UnknownActivationError& e) {
        throw NetworkFormatError(Kind::UnknownActivation, e.what());
    } catch (const InvalidArgument& e) {
        throw NetworkFormatError(Kind::MalformedJson, e.what());
    }
}

} // namespace

NetworkModel parse_network_json(const std::string& text)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw NetworkFormatError(Kind::MalformedJson, std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw NetworkFormatError(Kind::MalformedJson, "network document must be an object");
    for (const char* key : {"input_dim", "input_box", "layers"})
        if (!doc.contains(key)) throw NetworkFormatError(Kind::MalformedJson, std::string("missing field '") + key + "'");
    if (!doc["input_dim"].is_number_unsigned())
        throw NetworkFormatError(Kind::MalformedJson, "input_dim must be a non-negative integer");

    NetworkModel net;
    net.input_dim = doc["input_dim"].get<std::size_t>();
    if (!doc["input_box"].is_array()) throw NetworkFormatError(Kind::MalformedJson, "input_box must be an array");
    for (const auto& iv : doc["input_box"]) {
        const auto v = read_numbers(iv, "input_box entry");
        if (v.size() != 2) throw NetworkFormatError(Kind::MalformedJson, "input_box entries must be [lo, hi] pairs");
        net.input_box.push_back({v[0], v[1]});
    }
    if (!doc["layers"].is_array()) throw NetworkFormatError(Kind::MalformedJson, "layers must be an array");
    for (const auto& lj : doc["layers"]) {
        if (!lj.is_object() || !lj.contains("W") || !lj.contains("b"))
            throw NetworkFormatError(Kind::MalformedJson, "each layer needs 'W' and 'b'");
        Layer layer;
        if (!lj["W"].is_array()) throw NetworkFormatError(Kind::MalformedJson, "W must be a 2-D array");
        layer.W.rows = lj["W"].size();
        for (const auto& row : lj["W"]) {
            auto r = read_numbers(row, "W row");
            if (layer.W.data.empty()) layer.W.cols = r.size();
            if (r.size() != layer.W.cols) mismatch("W rows have different lengths");
            layer.W.data.insert(layer.W.data.end(), r.begin(), r.end());
        }
        layer.b = read_numbers(lj["b"], "b");
        if (lj.contains("activation") && !lj["activation"].is_null()) layer.act = read_activation(lj["activation"]);
        net.layers.push_back(std::move(layer));
    }
    net.validate();
    return net;
}

std::string network_to_json(const NetworkModel& net)
{
    net.validate();
    nlohmann::ordered_json doc;
    doc["input_dim"] = net.input_dim;
    doc["input_box"] = nlohmann::ordered_json::array();
    for (const auto& iv : net.input_box) doc["input_box"].push_back({iv.lo, iv.hi});
    doc["layers"] = nlohmann::ordered_json::array();
    for (const Layer& layer : net.layers) {
        nlohmann::ordered_json lj;
        lj["W"] = nlohmann::ordered_json::array();
        for (std::size_t r = 0; r < layer.W.rows; ++r) lj["W"].push_back(layer.W.row(r));
        lj["b"] = layer.b;
        if (layer.act) {
            if (!layer.act->is_plain()) throw InvalidArgument("only catalog activations can be serialized");
            nlohmann::ordered_json params = nlohmann::ordered_json::object();
            for (const auto& [k, v] : layer.act->params()) params[k] = v;
            lj["activation"] = {{"tag", layer.act->tag()}, {"params", params}};
        } else {
            lj["activation"] = nullptr;
        }
        doc["layers"].push_back(std::move(lj));
    }
    return detail::dump_json(doc) + "\n";
}

NetworkModel load_json(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NetworkFormatError(Kind::Io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_network_json(ss.str());
}

void save_json(const NetworkModel& net, const std::string& path)
{
    const std::string text = network_to_json(net);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw NetworkFormatError(Kind::Io, "cannot write '" + path + "'");
    out << text;
    if (!out) throw NetworkFormatError(Kind::Io, "write to '" + path + "' failed");
}

NetworkModel make_random_net(const std::vector<std::size_t>& sizes, const Activation& act, std::uint64_t seed)
{
    if (sizes.size() < 2) throw InvalidArgument("need at least input and output sizes");
    for (std::size_t s : sizes)
        if (s == 0) throw InvalidArgument("layer sizes must be positive");
    CounterRng rng(seed);
    NetworkModel net;
    net.input_dim = sizes.front();
    net.input_box.assign(net.input_dim, Interval{0.0, 1.0});
    for (std::size_t l = 1; l < sizes.size(); ++l) {
        Layer layer;
        layer.W = DenseMatrix(sizes[l], sizes[l - 1]);
        const double c = 4.0 / static_cast<double>(sizes[l - 1]);
        for (double& v : layer.W.data) v = rng.uniform(-c, c);
        layer.b.resize(sizes[l]);
        for (double& v : layer.b) v = rng.uniform(-1.0, 1.0);
        if (l + 1 < sizes.size()) layer.act = act;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

} // namespace stfe
