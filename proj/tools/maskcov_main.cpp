#include "maskcov/cli_io.hpp"

#include <iostream>

int main(int argc, char** argv) { return maskcov::run_cli(argc, argv, std::cout, std::cerr); }
