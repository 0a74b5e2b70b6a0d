#include <iostream>

#include "dcmerge/cli.hpp"

int main(int argc, char** argv) { return dcmerge::run_cli(argc, argv, std::cout, std::cerr); }
