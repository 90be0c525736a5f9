#include <iostream>

#include "stochlyap/cli/app.hpp"

int main(int argc, char** argv) { return stochlyap::cli::run(argc, argv, std::cout, std::cerr); }
