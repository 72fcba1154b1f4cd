#include "fontmanifold_cli/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return fm::cli::run(argc, argv, std::cout, std::cerr); }
