#include <iostream>

#include "transnet/cli.hpp"

int main(int argc, char** argv) { return transnet::run_cli(argc, argv, std::cout, std::cerr); }
