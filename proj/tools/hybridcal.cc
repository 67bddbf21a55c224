#include <iostream>

#include "hybridcal/cli.h"

int main(int argc, char** argv) {
  return hybridcal::run_cli(argc, argv, std::cout, std::cerr);
}
