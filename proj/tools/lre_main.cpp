#include <iostream>

#include "lre/cli.hpp"

int main(int argc, char** argv) {
  return lre::cli::run(argc, argv, std::cout, std::cerr);
}
