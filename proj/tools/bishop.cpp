#include <string>
#include <vector>

#include "bishop/cli.hpp"

int main(int argc, char** argv) {
  return bishop::cli::run(std::vector<std::string>(argv, argv + argc));
}
