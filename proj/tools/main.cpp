// Copyright 2026 The tracefix Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <iostream>

#include "cli.hpp"
#include "tracefix/process.hpp"

int main(int argc, char** argv) {
  tracefix::cli::Invocation inv;
  inv.args.assign(argv + 1, argv + argc);
  std::error_code ec;
  inv.self_exe = std::filesystem::read_symlink("/proc/self/exe", ec);
  if (ec) inv.self_exe = argv[0];
  inv.env = tracefix::current_environment();
  return tracefix::cli::run(inv, std::cout, std::cerr);
}
