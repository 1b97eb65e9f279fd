#include <iostream>

#include "c2f/cli.hpp"

int main(int argc, char** argv) { return c2f::cli::run(argc, argv, std::cout, std::cerr); }
