// Copyright 2026 The mlembed Authors
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

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mlembed/expr.hpp"

namespace mlembed {

// Runs the command-line front end. `args` excludes the program name.
// Returns 0 on success, 1 on a domain error, 2 on a usage error.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Input box flag: a count n (box [0,1]^n), an inline list "lo:hi,lo:hi", or
// a file with one "lo hi" pair per line. Throws ParseError.
std::vector<Interval> ParseInputBox(const std::string& spec);

}  // namespace mlembed
