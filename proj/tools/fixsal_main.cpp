#include <iostream>

#include "fixsal/cli.hpp"

int main(int argc, char** argv) {
  return fixsal::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
