#ifndef STFE_CLI_HPP
#define STFE_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace stfe {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitInput = 2,
    kExitNumerical = 3,
};

/// Entry point of the stfe-hull tool. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace stfe

#endif // STFE_CLI_HPP
