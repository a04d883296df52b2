#include <iostream>

#include "cli/commands.hpp"

int main(int argc, char** argv) { return lcmh::cli::run(argc, argv, std::cout, std::cerr); }
