#include <string>
#include <vector>

#include "smpriv/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return smpriv::cli::run_cli(std::move(args));
}
