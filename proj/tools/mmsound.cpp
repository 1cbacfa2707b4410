// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "mmsound/cli.hpp"

int main(int argc, char** argv) { return mmsound::cli::run(argc, argv, std::cout, std::cerr); }
