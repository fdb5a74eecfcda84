#include <iostream>

#include "glucoctl/cli.hpp"

int main(int argc, char** argv) {
  return glucoctl::cli::run_command(argc, argv, std::cout, std::cerr);
}
