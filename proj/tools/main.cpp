#include <string>
#include <vector>

#include "fairflow_cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fairflow::cli::run(std::move(args));
}
