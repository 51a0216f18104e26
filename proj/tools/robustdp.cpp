#include <iostream>

#include "robustdp/cli.hpp"

int main(int argc, char** argv) { return robustdp::run_cli(argc, argv, std::cout, std::cerr); }
