#include <iostream>

#include "rbgrad/runner.hpp"

int main(int argc, char** argv) { return rbgrad::cli_main(argc, argv, std::cout, std::cerr); }
