#include <iostream>

#include "omk/cli.hpp"

int main(int argc, char** argv) { return omk::cli::run(argc, argv, std::cout, std::cerr); }
