#include <iostream>
#include <string>
#include <vector>

#include "bwesid/cli.hpp"

int main(int argc, char** argv) {
  return bwesid::RunCli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
