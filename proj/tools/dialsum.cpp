#include "dialsum/cli.hpp"

#include <iostream>

int main(int argc, char **argv) { return dialsum::cli::run(argc, argv, std::cout, std::cerr); }
