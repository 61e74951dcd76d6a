#include <vector>
#include <string>

#include "deconv/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return deconv::cli::run(std::move(args));
}
