/**
 * Copyright (c) The sitecl Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef SITECL_TOOLS_CLI_HPP
#define SITECL_TOOLS_CLI_HPP

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace sitecl {

/// Exit codes of the sitecl command.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitInvalid = 2,
  kExitAudit = 3,
  kExitNumeric = 4,
};

/// Maps an exception escaping a subcommand to its exit code and prints it.
int exit_code_for(std::exception_ptr e, std::ostream& err);

/// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sitecl

#endif  // SITECL_TOOLS_CLI_HPP
