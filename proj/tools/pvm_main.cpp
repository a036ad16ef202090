#include <iostream>
#include <string>
#include <vector>

#include "pvm/cli.hpp"

int main(int argc, char** argv) {
  return pvm::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
