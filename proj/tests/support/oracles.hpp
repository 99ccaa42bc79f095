// Brute-force reference computations used by the tests. Deliberately naive:
// none of this shares code with the library's envelope or simplex routines.
#ifndef STFE_TEST_ORACLES_HPP
#define STFE_TEST_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace oracle {

struct Pt {
    double x, y;
};

inline double cross(const Pt& o, const Pt& a, const Pt& b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

/// Upper hull of points sorted by x (Andrew's monotone chain).
inline std::vector<Pt> upper_hull(std::vector<Pt> pts)
{
    std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) { return a.x < b.x || (a.x == b.x && a.y > b.y); });
    std::vector<Pt> h;
    for (const Pt& p : pts) {
        if (!h.empty() && h.back().x == p.x) continue; // keep the highest of equal x
        while (h.size() >= 2 && cross(h[h.size() - 2], h.back(), p) >= 0) h.pop_back();
        h.push_back(p);
    }
    return h;
}

inline std::vector<Pt> lower_hull(std::vector<Pt> pts)
{
    for (Pt& p : pts) p.y = -p.y;
    auto h = upper_hull(std::move(pts));
    for (Pt& p : h) p.y = -p.y;
    return h;
}

/// Piecewise-linear interpolation of a hull at x (clamped to its range).
inline double hull_at(const std::vector<Pt>& h, double x)
{
    if (x <= h.front().x) return h.front().y;
    if (x >= h.back().x) return h.back().y;
    auto it = std::upper_bound(h.begin(), h.end(), x, [](double v, const Pt& p) { return v < p.x; });
    const Pt& b = *it;
    const Pt& a = *(it - 1);
    return a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x);
}

inline std::vector<Pt> graph_samples(const std::function<double(double)>& f, double lo, double hi, std::size_t n)
{
    std::vector<Pt> pts;
    pts.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double z = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
        pts.push_back({z, f(z)});
    }
    return pts;
}

/// Central differences.
inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        const std::vector<double>& x, double h = 1e-6)
{
    std::vector<double> g(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        auto xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        g[j] = (f(xp) - f(xm)) / (2 * h);
    }
    return g;
}

/// Gaussian elimination with partial pivoting; nullopt if singular.
inline std::optional<std::vector<double>> solve_square(std::vector<std::vector<double>> a, std::vector<double> b)
{
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
        if (std::abs(a[p][c]) < 1e-11) return std::nullopt;
        std::swap(a[p], a[c]);
        std::swap(b[p], b[c]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = a[r][c] / a[c][c];
            if (f == 0.0) continue;
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
    return x;
}

/// Half-space a'x <= b, or a'x == b when `eq`.
struct Row {
    std::vector<double> a;
    double b;
    bool eq = false;
};

struct VertexResult {
    bool feasible = false;
    double value = 0.0;
    std::vector<double> point;
};

/// Minimize c'x over a bounded polytope by enumerating every basic point.
/// Only sensible for a handful of variables.
inline VertexResult vertex_enumeration_min(const std::vector<double>& c, const std::vector<Row>& rows, double tol = 1e-8)
{
    const std::size_t n = c.size();
    const std::size_t m = rows.size();
    VertexResult best;
    best.value = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> pick(n);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t depth) {
        if (depth == n) {
            std::vector<std::vector<double>> a(n);
            std::vector<double> b(n);
            for (std::size_t k = 0; k < n; ++k) {
                a[k] = rows[pick[k]].a;
                b[k] = rows[pick[k]].b;
            }
            auto x = solve_square(a, b);
            if (!x) return;
            for (const Row& r : rows) {
                double s = 0;
                for (std::size_t j = 0; j < n; ++j) s += r.a[j] * (*x)[j];
                const double scale = 1.0 + std::abs(r.b);
                if (s > r.b + tol * scale) return;
                if (r.eq && s < r.b - tol * scale) return;
            }
            double v = 0;
            for (std::size_t j = 0; j < n; ++j) v += c[j] * (*x)[j];
            if (v < best.value) {
                best.value = v;
                best.point = *x;
                best.feasible = true;
            }
            return;
        }
        for (std::size_t r = start; r < m; ++r) {
            pick[depth] = r;
            rec(r + 1, depth + 1);
        }
    };
    rec(0, 0);
    return best;
}

} // namespace oracle

#endif // STFE_TEST_ORACLES_HPP
