// SPDX-License-Identifier: Apache-2.0
#include "rfclip/cli.hpp"

int main(int argc, char** argv) { return rfclip::cli::main(argc, argv); }
