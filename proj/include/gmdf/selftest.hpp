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

// Acceptance checks shared by `gmdf selftest` and the acceptance test
// binary. Each check carries its own oracle and runtime budget.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace gmdf::selftest {

struct CheckResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;
};

struct Options {
  /// Checks to run by id; empty runs every check.
  std::vector<int> only;
  /// Scratch directory for generated data, checkpoints and reports.
  std::filesystem::path work_dir = "selftest_work";
  int threads = 1;
  std::ostream* log = nullptr;
};

/// Ids of the fast checks (oracles and contracts) that need no training.
std::vector<int> fast_checks();

std::vector<CheckResult> run(const Options& opt);

/// One line per check: "[PASS] 3 name (1.2 s / 5 s) detail".
std::string format(const CheckResult& r);

}  // namespace gmdf::selftest
