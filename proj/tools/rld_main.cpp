#include "rld/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return rld::run_cli(argc, argv, std::cout, std::cerr);
}
