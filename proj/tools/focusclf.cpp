#include <iostream>

#include "focusclf/cli/commands.hpp"

int main(int argc, char** argv) { return focusclf::cli::run(argc, argv, std::cout, std::cerr); }
