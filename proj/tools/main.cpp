#include <iostream>

#include "plateau/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return plateau::cli::run(args, std::cout, std::cerr);
}
