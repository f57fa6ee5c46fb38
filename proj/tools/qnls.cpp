#include "qnls/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return qnls::cli_main(argc, argv, std::cout, std::cerr); }
