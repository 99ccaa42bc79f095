#include <iostream>
#include <string>
#include <vector>

#include "stfe/cli.hpp"

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv, argv + argc);
    return stfe::run_cli(args, std::cout, std::cerr);
}
