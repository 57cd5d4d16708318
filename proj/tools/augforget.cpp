#include "augforget/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return augforget::cli::run(argc, argv, std::cout, std::cerr); }
