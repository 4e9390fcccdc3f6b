#include <iostream>
#include <string>
#include <vector>

#include "lowmt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return lowmt::cli::dispatch(args, std::cout, std::cerr);
}
