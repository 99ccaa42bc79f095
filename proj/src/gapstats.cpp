#include "stfe/gapstats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json_text.hpp"
#include "parallel.hpp"
#include "stfe/rng.hpp"

namespace stfe {

namespace {

constexpr std::uint64_t kBlock = 1 << 15;
constexpr double kDegenerateGap = 1e-14;

struct Sums {
    double f = 0, h = 0, c = 0;
    double f2 = 0, h2 = 0, c2 = 0;
    double gh2 = 0, gc2 = 0;

    void add(const Sums& o)
    {
        f += o.f, h += o.h, c += o.c;
        f2 += o.f2, h2 += o.h2, c2 += o.c2;
        gh2 += o.gh2, gc2 += o.gc2;
    }
};

double std_error(double sum, double sum_sq, double n)
{
    if (n < 2) return 0.0;
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1));
    return std::sqrt(var / n);
}

} // namespace

GapReport gap_report(const RawInstance& inst, std::uint64_t samples, std::uint64_t seed, unsigned threads)
{
    if (samples == 0) throw InvalidArgument("gap report needs at least one sample");
    const Normalized norm = normalize(inst);
    const NormalizedInstance& ni = norm.inst;
    const std::size_t m = ni.dim();

    const std::uint64_t blocks = (samples + kBlock - 1) / kBlock;
    std::vector<Sums> partial(blocks);
    detail::parallel_for(blocks, threads, [&](std::size_t blk) {
        Sums s;
        std::vector<double> x(m);
        const std::uint64_t first = blk * kBlock;
        const std::uint64_t last = std::min<std::uint64_t>(samples, first + kBlock);
        CounterRng rng(seed, first * m);
        for (std::uint64_t i = first; i < last; ++i) {
            for (double& v : x) v = rng.uniform();
            const double f = ni.f(x);
            const double h = ni.h_over(x);
            const double c = ni.conc_env(x);
            s.f += f, s.h += h, s.c += c;
            s.f2 += f * f, s.h2 += h * h, s.c2 += c * c;
            s.gh2 += (h - f) * (h - f), s.gc2 += (c - f) * (c - f);
        }
        partial[blk] = s;
    });
    Sums tot;
    for (const Sums& s : partial) tot.add(s);

    const double n = static_cast<double>(samples);
    GapReport r;
    r.samples = samples;
    r.seed = seed;
    r.mean_f = tot.f / n;
    r.mean_h = tot.h / n;
    r.mean_conc = tot.c / n;
    r.gap_h = (tot.h - tot.f) / n;
    r.gap_conc = (tot.c - tot.f) / n;
    if (r.gap_h <= kDegenerateGap) {
        r.improvement = 0.0;
        r.degenerate = true;
    } else {
        r.improvement = (r.gap_h - r.gap_conc) / r.gap_h;
    }
    r.se_f = std_error(tot.f, tot.f2, n);
    r.se_h = std_error(tot.h, tot.h2, n);
    r.se_conc = std_error(tot.c, tot.c2, n);
    r.se_gap_h = std_error(tot.h - tot.f, tot.gh2, n);
    r.se_gap_conc = std_error(tot.c - tot.f, tot.gc2, n);
    return r;
}

std::string GapReport::to_json() const
{
    nlohmann::ordered_json j;
    j["samples"] = samples;
    j["seed"] = seed;
    j["mean_f"] = mean_f;
    j["mean_h"] = mean_h;
    j["mean_conc"] = mean_conc;
    j["gap_h"] = gap_h;
    j["gap_conc"] = gap_conc;
    j["improvement"] = improvement;
    j["degenerate"] = degenerate;
    j["se_f"] = se_f;
    j["se_h"] = se_h;
    j["se_conc"] = se_conc;
    j["se_gap_h"] = se_gap_h;
    j["se_gap_conc"] = se_gap_conc;
    return detail::dump_json(j);
}

GapReport GapReport::from_json(const std::string& text)
{
    try {
        const auto j = nlohmann::json::parse(text);
        GapReport r;
        r.samples = j.at("samples").get<std::uint64_t>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.mean_f = j.at("mean_f").get<double>();
        r.mean_h = j.at("mean_h").get<double>();
        r.mean_conc = j.at("mean_conc").get<double>();
        r.gap_h = j.at("gap_h").get<double>();
        r.gap_conc = j.at("gap_conc").get<double>();
        r.improvement = j.at("improvement").get<double>();
        r.degenerate = j.at("degenerate").get<bool>();
        r.se_f = j.at("se_f").get<double>();
        r.se_h = j.at("se_h").get<double>();
        r.se_conc = j.at("se_conc").get<double>();
        r.se_gap_h = j.at("se_gap_h").get<double>();
        r.se_gap_conc = j.at("se_gap_conc").get<double>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed gap report: ") + e.what());
    }
}

std::string GapReport::csv_header()
{
    return "samples,seed,mean_f,mean_h,mean_conc,gap_h,gap_conc,improvement,degenerate,se_f,se_h,se_conc,se_gap_h,"
           "se_gap_conc";
}

std::string GapReport::to_csv_row() const
{
    using detail::format_double;
    std::string s = std::to_string(samples) + ',' + std::to_string(seed);
    for (double v : {mean_f, mean_h, mean_conc, gap_h, gap_conc, improvement}) s += ',' + format_double(v);
    s += degenerate ? ",true" : ",false";
    for (double v : {se_f, se_h, se_conc, se_gap_h, se_gap_conc}) s += ',' + format_double(v);
    return s;
}

GapReport GapReport::from_csv_row(const std::string& row)
{
    std::vector<std::string> f;
    std::stringstream ss(row);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (!f.empty() && !f.back().empty() && f.back().back() == '\r') f.back().pop_back();
    if (f.size() != 14) throw InvalidArgument("gap report CSV row needs 14 fields");
    try {
        GapReport r;
        r.samples = std::stoull(f[0]);
        r.seed = std::stoull(f[1]);
        double* dst[] = {&r.mean_f, &r.mean_h, &r.mean_conc, &r.gap_h, &r.gap_conc, &r.improvement};
        for (std::size_t k = 0; k < 6; ++k) *dst[k] = std::stod(f[2 + k]);
        if (f[8] != "true" && f[8] != "false") throw InvalidArgument("degenerate flag must be true/false");
        r.degenerate = f[8] == "true";
        double* se[] = {&r.se_f, &r.se_h, &r.se_conc, &r.se_gap_h, &r.se_gap_conc};
        for (std::size_t k = 0; k < 5; ++k) *se[k] = std::stod(f[9 + k]);
        return r;
    } catch (const std::logic_error& e) {
        throw InvalidArgument(std::string("malformed gap report row: ") + e.what());
    }
}

} // namespace stfe
