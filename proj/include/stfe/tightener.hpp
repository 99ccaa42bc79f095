#ifndef STFE_TIGHTENER_HPP
#define STFE_TIGHTENER_HPP

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stfe/envelope.hpp"
#include "stfe/lp.hpp"
#include "stfe/network.hpp"

namespace stfe {

// Layers are numbered from 1 in this API and in reports: layer 1 is
// net.layers[0], the first affine map applied to the input.

enum class Direction { Lower, Upper };

struct TightenOptions {
    int max_rounds = 20;
    double stall_tol = 1e-5;
    /// Cuts violated by less than this are not worth an LP row.
    double min_violation = 1e-6;
    unsigned threads = 1;
};

/// LP over the inputs and every neuron before the target, plus the target's
/// preactivation. Variable indices are recorded per layer.
struct RelaxationState {
    LinearProgram lp;
    std::size_t layer = 0; // 1-based
    std::size_t neuron = 0;
    std::vector<std::size_t> x_vars;
    std::vector<std::vector<std::size_t>> a_vars; // [layer-1][neuron], layers before the target
    std::vector<std::vector<std::size_t>> h_vars;
    std::size_t target_var = 0;
    ActivationBounds bounds;
    std::vector<std::vector<Interval>> boxes; // boxes[j]: domain of layer j+1's inputs

    /// Variables feeding layer `layer` (1-based): inputs for layer 1, else h of the previous layer.
    const std::vector<std::size_t>& inputs_of(std::size_t layer) const
    {
        return layer == 1 ? x_vars : h_vars[layer - 2];
    }
};

RelaxationState build_base_relaxation(const NetworkModel& net, const ActivationBounds& bounds, std::size_t layer,
                                      std::size_t neuron);

/// Envelope of every neuron strictly before `layer`, over its current input box.
/// Shared read-only between concurrent sessions of the same layer.
using UpstreamEnvelopes = std::vector<std::vector<std::shared_ptr<const BoxEnvelope>>>;
UpstreamEnvelopes build_upstream(const NetworkModel& net, const ActivationBounds& bounds, std::size_t layer);

struct AddedCut {
    std::size_t layer = 0; // 1-based layer of the neuron the cut relaxes
    std::size_t neuron = 0;
    Cut cut;
};

/// One bound computation: solve, separate, add cuts, repeat.
class CutSession {
public:
    CutSession(const NetworkModel& net, const ActivationBounds& bounds, std::size_t layer, std::size_t neuron,
               Direction dir, SeparationMode mode, TightenOptions opts = {},
               std::shared_ptr<const UpstreamEnvelopes> upstream = nullptr);

    /// Throws InconsistentBoundsError if the relaxation is empty.
    double solve();
    /// Separate the incumbent against every upstream neuron; returns cuts added.
    std::size_t cut_round();

    const RelaxationState& state() const { return state_; }
    const std::vector<double>& incumbent() const { return incumbent_; }
    const std::vector<AddedCut>& cuts() const { return cuts_; }
    const LinearProgram& program() const { return solver_.program(); }

private:
    RelaxationState state_;
    IncrementalSimplex solver_;
    std::shared_ptr<const UpstreamEnvelopes> upstream_;
    SeparationMode mode_;
    TightenOptions opts_;
    std::vector<double> incumbent_;
    std::vector<AddedCut> cuts_;
};

inline std::size_t cut_round(CutSession& session) { return session.cut_round(); }

struct NeuronResult {
    double bound = 0.0;
    int rounds = 0;
    int cuts = 0;
    bool stalled = false;
    std::vector<double> objective_trace; // LP value after each solve
};

NeuronResult tighten_neuron(const NetworkModel& net, const ActivationBounds& bounds, std::size_t layer,
                            std::size_t neuron, Direction dir, SeparationMode mode, const TightenOptions& opts = {},
                            std::shared_ptr<const UpstreamEnvelopes> upstream = nullptr);

/// Optimal value of the base relaxation without cuts.
double base_bound(const NetworkModel& net, const ActivationBounds& bounds, std::size_t layer, std::size_t neuron,
                  Direction dir);

struct BoundsRow {
    std::size_t layer = 0;
    std::size_t neuron = 0;
    Direction direction = Direction::Lower;
    double initial = 0.0;
    double tightened = 0.0;
    double improvement = 0.0;
    int rounds = 0;
    int cuts = 0;
    bool stalled = false;
    /// improvement is an absolute change because |initial| was ~0
    bool absolute = false;

    friend bool operator==(const BoundsRow&, const BoundsRow&) = default;
};

struct BoundsReport {
    std::vector<BoundsRow> rows;
    ActivationBounds final_bounds;

    std::string to_csv() const;
    /// Reads back what to_csv() writes (final_bounds is not part of the CSV).
    static BoundsReport from_csv(const std::string& text);
};

double improvement_ratio(double initial, double tightened, Direction dir, bool* absolute = nullptr);

/// Sweep hidden layers 2..depth-1, both directions per neuron, feeding each
/// finished layer's bounds into the deeper ones. The output layer is not a
/// target.
BoundsReport tighten_all(const NetworkModel& net, SeparationMode mode, const TightenOptions& opts = {});

const char* to_string(Direction d);
const char* to_string(SeparationMode m);

} // namespace stfe

#endif // STFE_TIGHTENER_HPP
