#include <iostream>

#include "aad/cli.hpp"

int main(int argc, char** argv) { return aad::cli::main(argc, argv, std::cin, std::cout, std::cerr); }
