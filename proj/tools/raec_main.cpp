#include <iostream>
#include <string>
#include <vector>

#include "raec/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return raec::run_cli(args, std::cout, std::cerr);
}
