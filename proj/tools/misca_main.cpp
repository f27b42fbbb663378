#include <vector>

#include "misca/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return misca::run_cli(args);
}
