#include <string>
#include <vector>

#include "lar/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return lar::cli::run(args);
}
