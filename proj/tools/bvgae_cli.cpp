#include <iostream>

#include "bvgae/cli.hpp"

int main(int argc, char** argv) {
  return bvgae::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
