#include <iostream>

#include "vrcount/cli.hpp"

int main(int argc, char** argv) { return vrc::cli_dispatch(argc, argv, std::cout, std::cerr); }
