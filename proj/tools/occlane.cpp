#include <iostream>
#include <string>
#include <vector>

#include "occlane/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return occlane::run_cli(args, std::cout, std::cerr);
}
