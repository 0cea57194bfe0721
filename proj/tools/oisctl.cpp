#include <iostream>

#include "ois/cli/commands.hpp"

int main(int argc, char** argv) {
  return ois::RunCli(std::vector<std::string>(argv + 1, argv + argc), std::cout,
                     std::cerr);
}
