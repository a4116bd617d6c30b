#include <iostream>

#include "odoslam/cli.hpp"

int main(int argc, char** argv) { return odoslam::run_cli(argc, argv, std::cout, std::cerr); }
