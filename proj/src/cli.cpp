#include "stfe/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "json_text.hpp"
#include "stfe/envelope.hpp"
#include "stfe/gapstats.hpp"
#include "stfe/lp.hpp"
#include "stfe/network.hpp"
#include "stfe/tightener.hpp"

namespace stfe {

namespace {

using detail::dump_json;
using detail::format_double;
using ojson = nlohmann::ordered_json;

/// Bad user data (as opposed to bad flags).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string part; std::getline(ss, part, sep);) out.push_back(part);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

double parse_number(const std::string& s)
{
    std::size_t used = 0;
    double v;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw InputError("not a number: '" + s + "'");
    }
    if (used != s.size() || !std::isfinite(v)) throw InputError("not a finite number: '" + s + "'");
    return v;
}

std::vector<double> parse_list(const std::string& s)
{
    std::vector<double> v;
    for (const auto& part : split(s, ',')) v.push_back(parse_number(part));
    return v;
}

/// "a:b,c:d" -> intervals
std::vector<Interval> parse_box(const std::string& s)
{
    std::vector<Interval> box;
    for (const auto& part : split(s, ',')) {
        const auto ends = split(part, ':');
        if (ends.size() != 2) throw InputError("box entries are lo:hi, got '" + part + "'");
        box.push_back(Interval::checked(parse_number(ends[0]), parse_number(ends[1])));
    }
    return box;
}

/// "elu:alpha=2" -> Activation
Activation parse_activation(const std::string& s)
{
    const auto colon = s.find(':');
    const std::string tag = s.substr(0, colon);
    std::map<std::string, double> params;
    if (colon != std::string::npos) {
        for (const auto& kv : split(s.substr(colon + 1), ',')) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw InputError("activation parameters are name=value, got '" + kv + "'");
            params[kv.substr(0, eq)] = parse_number(kv.substr(eq + 1));
        }
    }
    return Activation::from_tag(tag, params);
}

struct InstanceFlags {
    std::string w, act = "sigmoid", box;
    double b = 0.0;

    void attach(CLI::App* app)
    {
        app->add_option("-w,--weights", w, "comma-separated weights")->required()->allow_extra_args(false);
        app->add_option("-b,--bias", b, "bias");
        app->add_option("--act", act, "activation tag, optionally tag:name=value,...");
        app->add_option("--box", box, "domain as lo:hi,lo:hi,... (default unit box)");
    }

    RawInstance build() const
    {
        RawInstance raw;
        raw.w = parse_list(w);
        raw.b = b;
        raw.act = parse_activation(act);
        raw.box = box.empty() ? std::vector<Interval>(raw.w.size(), Interval{0.0, 1.0}) : parse_box(box);
        raw.validate();
        return raw;
    }
};

SeparationMode parse_mode(const std::string& s) { return s == "hest" ? SeparationMode::HEst : SeparationMode::Env; }

ojson number_array(const std::vector<double>& v)
{
    ojson a = ojson::array();
    for (double x : v) a.push_back(x);
    return a;
}

std::string region_name(const RegionLabel& label, const ReindexMap& map)
{
    switch (label.kind) {
    case RegionLabel::Kind::Function: return "f";
    case RegionLabel::Kind::Linear: return "l";
    case RegionLabel::Kind::Face: return "i" + std::to_string(map.kept[label.index]);
    }
    return "?";
}

void write_output(const std::string& path, const std::string& text, std::ostream& out)
{
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write '" + path + "'");
    f << text;
    if (!f) throw InputError("write to '" + path + "' failed");
}

std::string read_file(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

unsigned default_threads()
{
    if (const char* env = std::getenv("STFE_HULL_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    return 1;
}

std::string eval_json(const RawInstance& raw, const std::vector<double>& x)
{
    const BoxEnvelope env(raw);
    const auto t = env.map().to_unit(x);
    std::vector<double> tc(t.size());
    for (std::size_t j = 0; j < t.size(); ++j) tc[j] = std::clamp(t[j], 0.0, 1.0);
    ojson j;
    j["x"] = number_array(x);
    j["f"] = env.f(x);
    j["conc"] = env.upper(x);
    j["supergradient"] = number_array(env.upper_grad(x));
    j["conv"] = env.lower(x);
    j["subgradient"] = number_array(env.lower_grad(x));
    j["h_over"] = env.upper(x, SeparationMode::HEst);
    j["h_under"] = env.lower(x, SeparationMode::HEst);
    j["region"] = region_name(env.normalized().classify(tc), env.map());
    j["tie"] = env.normalized().tie();
    return dump_json(j) + "\n";
}

std::string separate_json(const RawInstance& raw, const std::vector<double>& x, double y, SeparationMode mode)
{
    const BoxEnvelope env(raw);
    const auto cut = env.separate(x, y, mode);
    ojson j;
    j["mode"] = to_string(mode);
    j["inside"] = !cut.has_value();
    if (cut) {
        j["sense"] = cut->sense == CutSense::UpperBoundsY ? "upper" : "lower";
        j["coeffs"] = number_array(cut->coeffs);
        j["offset"] = cut->offset;
        j["violation"] = cut->violation;
    }
    return dump_json(j) + "\n";
}

const char* kSurfaceHeader = "x0,x1,f,h_over,conc,conv,h_under,region";

std::string surface_csv(const RawInstance& raw, int grid)
{
    if (raw.w.size() != 2) throw InputError("surface needs a 2-dimensional instance");
    if (grid < 2) throw InputError("grid needs at least 2 points per axis");
    const BoxEnvelope env(raw);
    std::string out = std::string(kSurfaceHeader) + "\n";
    for (int i = 0; i < grid; ++i) {
        for (int k = 0; k < grid; ++k) {
            const double s = static_cast<double>(i) / (grid - 1);
            const double t = static_cast<double>(k) / (grid - 1);
            const std::vector<double> x{raw.box[0].lo + s * raw.box[0].width(), raw.box[1].lo + t * raw.box[1].width()};
            auto u = env.map().to_unit(x);
            for (double& v : u) v = std::clamp(v, 0.0, 1.0);
            out += format_double(x[0]) + ',' + format_double(x[1]) + ',' + format_double(env.f(x)) + ',' +
                   format_double(env.upper(x, SeparationMode::HEst)) + ',' + format_double(env.upper(x)) + ',' +
                   format_double(env.lower(x)) + ',' + format_double(env.lower(x, SeparationMode::HEst)) + ',' +
                   region_name(env.normalized().classify(u), env.map()) + '\n';
        }
    }
    return out;
}

/// Re-emits a surface CSV after checking every row parses.
std::string reread_surface(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kSurfaceHeader) throw InputError("surface CSV lacks its header");
    std::string out = line + "\n";
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 8) throw InputError("surface CSV row needs 8 fields");
        for (std::size_t k = 0; k < 7; ++k) out += format_double(parse_number(f[k])) + ',';
        const std::string& r = f[7];
        if (r != "f" && r != "l" && (r.size() < 2 || r[0] != 'i')) throw InputError("unknown region label '" + r + "'");
        out += r + '\n';
    }
    return out;
}

std::string reread(const std::string& kind, const std::string& text)
{
    if (kind == "net") return network_to_json(parse_network_json(text));
    if (kind == "bounds") {
        const auto rep = BoundsReport::from_csv(text);
        return rep.to_csv();
    }
    if (kind == "gap") return GapReport::from_json(text).to_json() + "\n";
    if (kind == "gap-csv") {
        std::istringstream in(text);
        std::string header, row;
        std::getline(in, header);
        if (header != GapReport::csv_header()) throw InputError("gap CSV lacks its header");
        std::getline(in, row);
        return GapReport::csv_header() + "\n" + GapReport::from_csv_row(row).to_csv_row() + "\n";
    }
    if (kind == "surface") return reread_surface(text);
    if (kind == "eval" || kind == "separate") {
        ojson j;
        try {
            j = ojson::parse(text);
        } catch (const ojson::parse_error& e) {
            throw InputError(std::string("invalid JSON: ") + e.what());
        }
        const char* need = kind == "eval" ? "conc" : "inside";
        if (!j.is_object() || !j.contains(need)) throw InputError("not a " + kind + " document");
        return dump_json(j) + "\n";
    }
    throw InputError("unknown kind '" + kind + "'");
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Envelopes of activation-after-affine functions and cutting-plane bound tightening"};
    app.name(args.empty() ? "stfe-hull" : args[0]);
    app.require_subcommand(1);
    app.allow_extras(false);

    // envelope eval
    auto* envelope = app.add_subcommand("envelope", "envelope evaluations");
    envelope->require_subcommand(1);
    auto* eval = envelope->add_subcommand("eval", "value and gradients of both envelopes at a point");
    InstanceFlags eval_inst;
    std::string eval_x;
    eval_inst.attach(eval);
    eval->add_option("--x", eval_x, "point, comma-separated")->required();

    // separate
    auto* sep = app.add_subcommand("separate", "separate (x, y) from the hull, emitting a cut if violated");
    InstanceFlags sep_inst;
    std::string sep_x, sep_mode = "env";
    double sep_y = 0.0;
    sep_inst.attach(sep);
    sep->add_option("--x", sep_x, "point, comma-separated")->required();
    sep->add_option("--y", sep_y, "value of the lifted coordinate")->required();
    sep->add_option("--mode", sep_mode, "env or hest")->check(CLI::IsMember({"env", "hest"}));

    // tighten
    auto* tighten = app.add_subcommand("tighten", "cutting-plane bound tightening of a network");
    std::string net_path, tighten_mode = "env", tighten_out;
    unsigned threads = default_threads();
    int max_rounds = 20;
    tighten->add_option("--net", net_path, "network .nn.json")->required();
    tighten->add_option("--mode", tighten_mode, "env or hest")->check(CLI::IsMember({"env", "hest"}));
    tighten->add_option("--out", tighten_out, "CSV destination (stdout if omitted)");
    tighten->add_option("--threads", threads, "worker threads (env STFE_HULL_THREADS)")->check(CLI::PositiveNumber);
    tighten->add_option("--max-rounds", max_rounds, "cut rounds per bound")->check(CLI::NonNegativeNumber);

    // gap-report
    auto* gap = app.add_subcommand("gap-report", "Monte Carlo total gaps of h and the envelope");
    InstanceFlags gap_inst;
    std::uint64_t samples = 1000000, seed = 0;
    std::string gap_format = "json", gap_out;
    gap_inst.attach(gap);
    gap->add_option("--samples", samples, "sample count")->check(CLI::PositiveNumber);
    gap->add_option("--seed", seed, "random seed");
    gap->add_option("--format", gap_format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    gap->add_option("--threads", threads, "worker threads (env STFE_HULL_THREADS)")->check(CLI::PositiveNumber);
    gap->add_option("--out", gap_out, "destination (stdout if omitted)");

    // make-net
    auto* mk = app.add_subcommand("make-net", "random network with reproducible weights");
    std::string mk_layers, mk_act = "sigmoid", mk_out;
    std::uint64_t mk_seed = 0;
    mk->add_option("--layers", mk_layers, "sizes: input,hidden...,output")->required();
    mk->add_option("--act", mk_act, "hidden activation");
    mk->add_option("--seed", mk_seed, "random seed");
    mk->add_option("--out", mk_out, "destination (stdout if omitted)");

    // surface
    auto* surf = app.add_subcommand("surface", "grid of f, estimators and region labels for a 2-D instance");
    InstanceFlags surf_inst;
    int grid = 51;
    std::string surf_out;
    surf_inst.attach(surf);
    surf->add_option("--grid", grid, "points per axis");
    surf->add_option("--out", surf_out, "destination (stdout if omitted)");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "re-read an emitted file and print it in canonical form");
    std::string inspect_kind, inspect_path;
    inspect->add_option("--kind", inspect_kind, "net, bounds, gap, gap-csv, eval, separate, surface")
        ->required()
        ->check(CLI::IsMember({"net", "bounds", "gap", "gap-csv", "eval", "separate", "surface"}));
    inspect->add_option("file", inspect_path, "file to read")->required();

    std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(rest.begin(), rest.end());
    try {
        app.parse(rest);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*eval) {
            out << eval_json(eval_inst.build(), parse_list(eval_x));
        } else if (*sep) {
            out << separate_json(sep_inst.build(), parse_list(sep_x), sep_y, parse_mode(sep_mode));
        } else if (*tighten) {
            const NetworkModel net = load_json(net_path);
            TightenOptions opts;
            opts.threads = threads;
            opts.max_rounds = max_rounds;
            write_output(tighten_out, tighten_all(net, parse_mode(tighten_mode), opts).to_csv(), out);
        } else if (*gap) {
            const GapReport rep = gap_report(gap_inst.build(), samples, seed, threads);
            write_output(gap_out,
                         gap_format == "csv" ? GapReport::csv_header() + "\n" + rep.to_csv_row() + "\n"
                                             : rep.to_json() + "\n",
                         out);
        } else if (*mk) {
            std::vector<std::size_t> sizes;
            for (const auto& s : split(mk_layers, ',')) {
                const double v = parse_number(s);
                if (v < 1 || v != std::floor(v)) throw InputError("layer sizes must be positive integers");
                sizes.push_back(static_cast<std::size_t>(v));
            }
            write_output(mk_out, network_to_json(make_random_net(sizes, parse_activation(mk_act), mk_seed)), out);
        } else if (*surf) {
            write_output(surf_out, surface_csv(surf_inst.build(), grid), out);
        } else if (*inspect) {
            out << reread(inspect_kind, read_file(inspect_path));
        }
    } catch (const InconsistentBoundsError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const LpNumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const NetworkFormatError& e) {
        err << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const NotStfeError& e) {
        err << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        // InvalidArgument, UnknownActivationError, MalformedLpError
        err << "input error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}

} // namespace stfe
