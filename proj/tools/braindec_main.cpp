#include <iostream>

#include "braindec/app.hpp"

int main(int argc, char** argv) { return braindec::run_cli(argc, argv, std::cout, std::cerr); }
