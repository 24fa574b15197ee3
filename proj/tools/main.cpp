#include <iostream>

#include "msflow/cli.hpp"

int main(int argc, char** argv) { return msflow::run_cli(argc, argv, std::cout, std::cerr); }
