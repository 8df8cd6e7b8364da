// Copyright 2026 The GM-DF Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance suite: runs every check and prints one line per criterion.
// Usage: gmdf_acceptance [--work DIR] [--only ID]...

#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include "gmdf/selftest.hpp"

int main(int argc, char** argv) {
  gmdf::selftest::Options opt;
  opt.work_dir = "acceptance_work";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) {
      opt.work_dir = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      opt.only.push_back(std::stoi(argv[++i]));
    } else {
      std::cerr << "usage: gmdf_acceptance [--work DIR] [--only ID]...\n";
      return 2;
    }
  }
  opt.threads = 1;
  if (const char* env = std::getenv("GMDF_THREADS")) opt.threads = std::max(1, std::atoi(env));
  opt.log = &std::cerr;
  const auto results = gmdf::selftest::run(opt);
  int failed = 0;
  std::cout << "\n==== acceptance summary ====\n";
  for (const auto& r : results) {
    std::cout << gmdf::selftest::format(r) << "\n";
    if (!r.pass) ++failed;
  }
  std::cout << (failed == 0 ? "ALL CRITERIA PASSED" : std::to_string(failed) + " CRITERIA FAILED") << std::endl;
  return failed == 0 ? 0 : 1;
}
