#include <iostream>

#include "bglm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return bglm::run_cli(args, std::cout, std::cerr);
}
