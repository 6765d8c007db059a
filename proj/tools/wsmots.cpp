#include <iostream>

#include "wsmots/cli.hpp"

int main(int argc, char** argv) { return wsmots::cli::run(argc, argv, std::cout, std::cerr); }
