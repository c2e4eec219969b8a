// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "commands.hpp"

int main(int argc, char **argv) { return medrg::cli::run(argc, argv, std::cout, std::cerr); }
