// JSON serialization with every number written as 17 significant digits,
// so emitted files are byte-stable across platforms.
#ifndef STFE_JSON_TEXT_HPP
#define STFE_JSON_TEXT_HPP

#include <string>

#include <json.hpp>

namespace stfe::detail {

std::string format_double(double v);
std::string dump_json(const nlohmann::ordered_json& j, int indent = 2);

} // namespace stfe::detail

#endif // STFE_JSON_TEXT_HPP
