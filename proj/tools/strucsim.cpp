#include <iostream>
#include <string>
#include <vector>

#include "strucsim/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return strucsim::cli::run(args, std::cout, std::cerr);
}
