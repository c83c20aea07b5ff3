// Copyright 2026 the conan authors
// SPDX-License-Identifier: Apache-2.0

#include "conan/cli.hpp"

int main(int argc, char** argv) { return conan::cli::run(argc, argv); }
