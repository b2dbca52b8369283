#include <string>
#include <vector>

#include <iostream>

#include "tlkit/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return tlkit::cli::run(args, std::cout, std::cerr);
}
