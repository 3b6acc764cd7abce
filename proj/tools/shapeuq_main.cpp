// SPDX-License-Identifier: Apache-2.0

#include "shapeuq/cli.hpp"

int main(int argc, char **argv) { return shapeuq::run_cli(argc, argv); }
