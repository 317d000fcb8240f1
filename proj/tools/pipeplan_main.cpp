// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "pipeplan/cli.hpp"

int main(int argc, char** argv) {
  return pipeplan::run_cli(argc, argv, std::cout, std::cerr);
}
