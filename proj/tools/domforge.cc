#include <iostream>
#include <string>
#include <vector>

#include "domforge/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return domforge::cli::run(args, std::cout, std::cerr);
}
