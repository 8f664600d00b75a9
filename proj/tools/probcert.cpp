#include <iostream>
#include <string>
#include <vector>

#include "probcert/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return probcert::cli::run_command(args, std::cout, std::cerr).exit_code;
}
