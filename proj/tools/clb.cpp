#include "clb/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return clb::cli::run(argc, argv, std::cout, std::cerr); }
