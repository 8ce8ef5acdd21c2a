#include <iostream>

#include "sae/cli.hpp"

int main(int argc, char** argv) { return sae::cli_main(argc, argv, std::cout, std::cerr); }
