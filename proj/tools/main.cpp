// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "modvid/cli.hpp"

int main(int argc, char** argv) { return modvid::run_cli(argc, argv, std::cout, std::cerr); }
