#include "opidmd/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return opidmd::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
