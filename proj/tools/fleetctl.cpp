#include "fleetdspl/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return fleet::cli::run_cli(argc, argv, std::cout, std::cerr); }
