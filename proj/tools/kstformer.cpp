#include <iostream>

#include "kst/cli.hpp"

int main(int argc, char** argv) { return kst::run_cli(argc, argv, std::cout, std::cerr); }
