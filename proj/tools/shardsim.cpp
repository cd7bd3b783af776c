// Command-line entry point; all logic lives in the library (shardsim/run.hpp)
// so tests can drive the exact same paths in-process.
#include "shardsim/run.hpp"

#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return shardsim::run_cli(args, std::cout, std::cerr);
}
