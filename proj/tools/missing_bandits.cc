#include <iostream>
#include <string>
#include <vector>

#include "mbandit/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mbandit::RunCli(args, std::cout, std::cerr);
}
