#include <iostream>
#include <string>
#include <vector>

#include "ragvv/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ragvv::cli::run(args, std::cout, std::cerr);
}
