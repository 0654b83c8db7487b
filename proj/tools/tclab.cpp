#include <iostream>

#include "tclab/cli.hpp"

int main(int argc, char** argv) { return tclab::cli_main(argc, argv, std::cout, std::cerr); }
