#include <string>
#include <vector>

#include "egolayers/cli.hpp"

int main(int argc, char** argv) {
  return egolayers::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
