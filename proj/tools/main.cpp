#include <iostream>

#include "cli/commands.h"

int main(int argc, char** argv) {
  return clarigen::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
