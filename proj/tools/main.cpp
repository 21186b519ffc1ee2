#include <iostream>

#include "absprobe/cli.hpp"

int main(int argc, char **argv) { return absprobe::run_cli(argc, argv, std::cout, std::cerr); }
