#include <iostream>

#include "gnnstrat/cli.hpp"

int main(int argc, char** argv) { return gnnstrat::run_cli(argc, argv, std::cout, std::cerr); }
