#include <iostream>

#include "wncs/cli.hpp"

int main(int argc, char** argv) { return wncs::cli::run(argc, argv, std::cout, std::cerr); }
