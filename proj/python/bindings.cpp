#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stfe/activation.hpp"
#include "stfe/envelope.hpp"
#include "stfe/gapstats.hpp"
#include "stfe/network.hpp"
#include "stfe/tightener.hpp"

namespace py = pybind11;
using namespace stfe;

namespace {

Interval to_interval(const std::pair<double, double>& p) { return Interval::checked(p.first, p.second); }

RawInstance make_instance(std::vector<double> w, double b, const Activation& act,
                          std::optional<std::vector<std::pair<double, double>>> box)
{
    RawInstance inst;
    inst.w = std::move(w);
    inst.b = b;
    inst.act = act;
    if (box) {
        for (const auto& p : *box) inst.box.push_back(to_interval(p));
    } else {
        inst.box.assign(inst.w.size(), Interval{0, 1});
    }
    inst.validate();
    return inst;
}

SeparationMode parse_mode(const std::string& m)
{
    if (m == "env") return SeparationMode::Env;
    if (m == "hest") return SeparationMode::HEst;
    throw InvalidArgument("mode must be 'env' or 'hest'");
}

py::dict gap_dict(const GapReport& r)
{
    py::dict d;
    d["samples"] = r.samples;
    d["seed"] = r.seed;
    d["mean_f"] = r.mean_f;
    d["mean_h"] = r.mean_h;
    d["mean_conc"] = r.mean_conc;
    d["gap_h"] = r.gap_h;
    d["gap_conc"] = r.gap_conc;
    d["improvement"] = r.improvement;
    d["degenerate"] = r.degenerate;
    d["se_gap_h"] = r.se_gap_h;
    d["se_gap_conc"] = r.se_gap_conc;
    return d;
}

py::list bounds_list(const ActivationBounds& b)
{
    py::list out;
    for (const auto& layer : b) {
        py::list l;
        for (const auto& iv : layer) l.append(py::make_tuple(iv.lo, iv.hi));
        out.append(l);
    }
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Envelopes of activation-after-affine functions and LP bound tightening";

    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<NotStfeError>(m, "NotStfeError", PyExc_ValueError);
    py::register_exception<InconsistentBoundsError>(m, "InconsistentBoundsError", PyExc_RuntimeError);
    py::register_exception<UnknownActivationError>(m, "UnknownActivationError", PyExc_ValueError);
    py::register_exception<NetworkFormatError>(m, "NetworkFormatError", PyExc_ValueError);
    py::register_exception<LpNumericalError>(m, "LpNumericalError", PyExc_RuntimeError);

    py::class_<Activation>(m, "Activation")
        .def(py::init([](const std::string& tag, const std::map<std::string, double>& params) {
                 return Activation::from_tag(tag, params);
             }),
             py::arg("tag"), py::arg("params") = std::map<std::string, double>{})
        .def_property_readonly("tag", &Activation::tag)
        .def_property_readonly("params", &Activation::params)
        .def("__call__", &Activation::operator(), py::arg("z"))
        .def("derivative", [](const Activation& a, double z) { return a.derivative(z, Side::Right); }, py::arg("z"))
        .def("__repr__", [](const Activation& a) { return "Activation('" + a.tag() + "')"; });

    m.def("activation_tags", &activation_tags);
    m.def(
        "tie_point", [](const Activation& a, std::pair<double, double> iv) { return tie_point(a, to_interval(iv)); },
        py::arg("act"), py::arg("interval"));
    m.def(
        "conc_env_1d",
        [](const Activation& a, std::pair<double, double> iv, double z) { return conc_env_1d(a, to_interval(iv), z); },
        py::arg("act"), py::arg("interval"), py::arg("z"));

    py::class_<BoxEnvelope>(m, "Envelope")
        .def(py::init([](std::vector<double> w, double b, const Activation& act,
                         std::optional<std::vector<std::pair<double, double>>> box) {
                 return BoxEnvelope(make_instance(std::move(w), b, act, std::move(box)));
             }),
             py::arg("w"), py::arg("b"), py::arg("act"), py::arg("box") = py::none())
        .def("f", &BoxEnvelope::f, py::arg("x"))
        .def(
            "conc", [](const BoxEnvelope& e, const std::vector<double>& x) { return e.upper(x); }, py::arg("x"))
        .def(
            "conv", [](const BoxEnvelope& e, const std::vector<double>& x) { return e.lower(x); }, py::arg("x"))
        .def(
            "supergradient", [](const BoxEnvelope& e, const std::vector<double>& x) { return e.upper_grad(x); },
            py::arg("x"))
        .def(
            "subgradient", [](const BoxEnvelope& e, const std::vector<double>& x) { return e.lower_grad(x); },
            py::arg("x"))
        .def(
            "h_over", [](const BoxEnvelope& e, const std::vector<double>& x) { return e.upper(x, SeparationMode::HEst); },
            py::arg("x"))
        .def(
            "h_under",
            [](const BoxEnvelope& e, const std::vector<double>& x) { return e.lower(x, SeparationMode::HEst); },
            py::arg("x"))
        .def(
            "separate",
            [](const BoxEnvelope& e, const std::vector<double>& x, double y, const std::string& mode) -> py::object {
                const auto cut = e.separate(x, y, parse_mode(mode));
                if (!cut) return py::none();
                py::dict d;
                d["sense"] = cut->sense == CutSense::UpperBoundsY ? "upper" : "lower";
                d["coeffs"] = cut->coeffs;
                d["offset"] = cut->offset;
                d["violation"] = cut->violation;
                return std::move(d);
            },
            py::arg("x"), py::arg("y"), py::arg("mode") = "env");

    m.def(
        "gap_report",
        [](std::vector<double> w, double b, const Activation& act, std::uint64_t samples, std::uint64_t seed,
           unsigned threads) {
            const auto inst = make_instance(std::move(w), b, act, std::nullopt);
            GapReport r;
            {
                py::gil_scoped_release release;
                r = gap_report(inst, samples, seed, threads);
            }
            return gap_dict(r);
        },
        py::arg("w"), py::arg("b"), py::arg("act"), py::arg("samples") = 1000000, py::arg("seed") = 1,
        py::arg("threads") = 1);

    py::class_<NetworkModel>(m, "Network")
        .def_static("load", &load_json, py::arg("path"))
        .def_static("from_json", &parse_network_json, py::arg("text"))
        .def_static(
            "random",
            [](const std::vector<std::size_t>& sizes, const Activation& act, std::uint64_t seed) {
                return make_random_net(sizes, act, seed);
            },
            py::arg("sizes"), py::arg("act"), py::arg("seed") = 0)
        .def("save", [](const NetworkModel& n, const std::string& path) { save_json(n, path); }, py::arg("path"))
        .def("to_json", &network_to_json)
        .def_readonly("input_dim", &NetworkModel::input_dim)
        .def_property_readonly("depth", &NetworkModel::depth)
        .def_property_readonly("widths",
                               [](const NetworkModel& n) {
                                   std::vector<std::size_t> w;
                                   for (const auto& l : n.layers) w.push_back(l.width());
                                   return w;
                               })
        .def(
            "forward", [](const NetworkModel& n, const std::vector<double>& x) { return forward(n, x).post; },
            py::arg("x"))
        .def("interval_bounds", [](const NetworkModel& n) { return bounds_list(interval_propagate(n)); });

    m.def(
        "tighten_all",
        [](const NetworkModel& net, const std::string& mode, unsigned threads, int max_rounds) {
            TightenOptions opts;
            opts.threads = threads;
            opts.max_rounds = max_rounds;
            BoundsReport rep;
            {
                py::gil_scoped_release release;
                rep = tighten_all(net, parse_mode(mode), opts);
            }
            py::list rows;
            for (const auto& r : rep.rows) {
                py::dict d;
                d["layer"] = r.layer;
                d["neuron"] = r.neuron;
                d["direction"] = to_string(r.direction);
                d["initial"] = r.initial;
                d["tightened"] = r.tightened;
                d["improvement"] = r.improvement;
                d["rounds"] = r.rounds;
                d["cuts"] = r.cuts;
                d["stalled"] = r.stalled;
                rows.append(d);
            }
            py::dict out;
            out["rows"] = rows;
            out["final_bounds"] = bounds_list(rep.final_bounds);
            out["csv"] = rep.to_csv();
            return out;
        },
        py::arg("net"), py::arg("mode") = "env", py::arg("threads") = 1, py::arg("max_rounds") = 20);
}
