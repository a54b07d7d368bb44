#include <iostream>

#include "dlmtrial/cli.hpp"

int main(int argc, char** argv) { return dlmtrial::run_cli(argc, argv, std::cout, std::cerr); }
