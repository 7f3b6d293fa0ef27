// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#include <iostream>
#include <string>
#include <vector>

#include "kws/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return kws::run_cli(args, std::cout, std::cerr);
}
