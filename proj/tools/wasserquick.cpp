#include <iostream>

#include "wasserquick/cli.hpp"

int main(int argc, char** argv) { return wasserquick::run_cli(argc, argv, std::cout, std::cerr); }
