#include <vector>

#include "z2eigen/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return z2eigen::run_cli(args);
}
