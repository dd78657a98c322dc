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
#ifndef SITECL_REPORT_HPP
#define SITECL_REPORT_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "sitecl/harness.hpp"

namespace sitecl {

/// Column order of the comparison table.
const std::vector<std::string>& report_columns();

struct ReportRow {
  std::string run;
  RunSummary summary;
};

/// Reads summary.json of a run folder and recomputes BWT, FWT and BWT+ from
/// its matrix CSVs. Throws ValidationError when a file is missing.
ReportRow load_run(const std::filesystem::path& dir);

std::string report_csv(const std::vector<ReportRow>& rows);

}  // namespace sitecl

#endif  // SITECL_REPORT_HPP
