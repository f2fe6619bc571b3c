// SPDX-License-Identifier: Apache-2.0
#include "cvtassd/cli.hpp"

int main(int argc, char** argv) { return cvtassd::run(argc, argv); }
