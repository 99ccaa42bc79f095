#include "json_text.hpp"

#include <cmath>
#include <cstdio>

namespace stfe::detail {

std::string format_double(double v)
{
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

void write(std::string& out, const nlohmann::ordered_json& j, int indent, int level)
{
    auto newline = [&](int lvl) {
        if (indent < 0) return;
        out += '\n';
        out.append(static_cast<std::size_t>(indent * lvl), ' ');
    };
    switch (j.type()) {
    case nlohmann::ordered_json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += '{';
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) out += ',';
            first = false;
            newline(level + 1);
            out += nlohmann::ordered_json(it.key()).dump();
            out += indent < 0 ? ":" : ": ";
            write(out, it.value(), indent, level + 1);
        }
        newline(level);
        out += '}';
        return;
    }
    case nlohmann::ordered_json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        // arrays of scalars stay on one line
        bool flat = true;
        for (const auto& e : j)
            if (e.is_structured()) flat = false;
        out += '[';
        bool first = true;
        for (const auto& e : j) {
            if (!first) out += flat && indent >= 0 ? ", " : ",";
            first = false;
            if (!flat) newline(level + 1);
            write(out, e, indent, level + 1);
        }
        if (!flat) newline(level);
        out += ']';
        return;
    }
    case nlohmann::ordered_json::value_t::number_float:
        out += format_double(j.get<double>());
        return;
    default:
        out += j.dump();
        return;
    }
}

} // namespace

std::string dump_json(const nlohmann::ordered_json& j, int indent)
{
    std::string out;
    write(out, j, indent, 0);
    return out;
}

} // namespace stfe::detail
