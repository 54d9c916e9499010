#include "tofgrid/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return tofgrid::run_cli(argc, argv, std::cout, std::cerr); }
