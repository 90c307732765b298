// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "agenet/cli.hpp"

int main(int argc, char** argv) { return agenet::run_cli(argc, argv, std::cout, std::cerr); }
