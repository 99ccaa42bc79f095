#ifndef STFE_NETWORK_HPP
#define STFE_NETWORK_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stfe/activation.hpp"

namespace stfe {

/// Row-major dense matrix.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::vector<double> row(std::size_t r) const
    {
        return {data.begin() + static_cast<std::ptrdiff_t>(r * cols),
                data.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols)};
    }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;
};

/// One affine map followed by an optional activation. W maps the previous
/// layer's outputs to this layer: W is (width x previous width).
struct Layer {
    DenseMatrix W;
    std::vector<double> b;
    std::optional<Activation> act;

    std::size_t width() const { return W.rows; }
    friend bool operator==(const Layer&, const Layer&) = default;
};

struct NetworkModel {
    std::size_t input_dim = 0;
    std::vector<Interval> input_box;
    std::vector<Layer> layers;

    /// Throws NetworkFormatError(DimensionMismatch) on inconsistent shapes.
    void validate() const;
    std::size_t depth() const { return layers.size(); }

    friend bool operator==(const NetworkModel&, const NetworkModel&) = default;
};

/// Preactivations and postactivations of every layer (0-based). For a layer
/// without activation the two coincide.
struct LayerState {
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
};

/// Preactivation interval of every neuron, indexed [layer][neuron].
using ActivationBounds = std::vector<std::vector<Interval>>;

class NetworkFormatError : public std::runtime_error {
public:
    enum class Kind { MalformedJson, DimensionMismatch, UnknownActivation, Io };

    NetworkFormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

LayerState forward(const NetworkModel& net, const std::vector<double>& x);

/// Output of `layer`'s activation applied to its preactivation interval.
Interval post_interval(const Layer& layer, const Interval& pre);

/// Box over the inputs of layer `layer` (0-based): the input box for layer 0,
/// otherwise the image of the previous layer's bounds.
std::vector<Interval> input_box_of(const NetworkModel& net, const ActivationBounds& bounds, std::size_t layer);

/// Plain interval arithmetic over the whole network.
ActivationBounds interval_propagate(const NetworkModel& net);

/// Re-propagate layers from `first_layer` on, intersecting with what `bounds`
/// already holds there. Throws InconsistentBoundsError on an empty intersection.
void refine_bounds(const NetworkModel& net, ActivationBounds& bounds, std::size_t first_layer);

NetworkModel parse_network_json(const std::string& text);
std::string network_to_json(const NetworkModel& net);
NetworkModel load_json(const std::string& path);
void save_json(const NetworkModel& net, const std::string& path);

/// `sizes` lists input width, hidden widths, then output width. Hidden layers
/// use `act`; the output layer is affine.
NetworkModel make_random_net(const std::vector<std::size_t>& sizes, const Activation& act, std::uint64_t seed);

} // namespace stfe

#endif // STFE_NETWORK_HPP
