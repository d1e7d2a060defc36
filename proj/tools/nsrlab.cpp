#include <iostream>

#include "nsrlab/cli.hpp"

int main(int argc, char** argv) { return nsrlab::run_cli(argc, argv, std::cout, std::cerr); }
