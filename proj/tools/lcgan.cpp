#include <iostream>

#include "lcgan/cli/cli.hpp"

int main(int argc, char** argv) { return lcgan::cli::run(argc, argv, std::cout, std::cerr); }
