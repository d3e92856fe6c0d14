#include <iostream>

#include "crossing/commands.hpp"

int main(int argc, char** argv) { return crossing::run_cli(argc, argv, std::cout, std::cerr); }
