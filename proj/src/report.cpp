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
#include "sitecl/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "sitecl/errors.hpp"
#include "sitecl/metrics.hpp"

namespace sitecl {

namespace fs = std::filesystem;

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols = {
      "run",          "mode",         "seed",       "previous_dsc", "incoming_dsc",
      "unseen_dsc",   "overall_dsc",  "bwt",        "fwt",          "previous_asd",
      "incoming_asd", "unseen_asd",   "overall_asd", "bwt_plus",    "mean_cos_incoming_replay",
      "mean_cos_vtrain_vtest"};
  return cols;
}

ReportRow load_run(const fs::path& dir) {
  const fs::path summary = dir / "summary.json";
  if (!fs::exists(summary)) throw ValidationError("report: missing " + summary.string());
  if (fs::exists(dir / "INCOMPLETE")) throw ValidationError("report: run " + dir.string() + " is incomplete");
  std::ifstream in(summary);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("report: " + summary.string() + " is not valid JSON: " + e.what());
  }
  ReportRow row{dir.filename().string(), summary_from_json(j)};
  for (const char* f : {"matrix_dsc.csv", "matrix_asd.csv"})
    if (!fs::exists(dir / f)) throw ValidationError("report: missing " + (dir / f).string());
  const auto dsc_m = read_matrix_csv(dir / "matrix_dsc.csv");
  const auto asd_m = read_matrix_csv(dir / "matrix_asd.csv");
  if (dsc_m.n() >= 2) {
    row.summary.bwt = bwt(dsc_m);
    row.summary.fwt = fwt(dsc_m);
    row.summary.bwt_plus = bwt_plus(asd_m);
  } else {
    row.summary.bwt.reset();
    row.summary.fwt.reset();
    row.summary.bwt_plus.reset();
  }
  return row;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  const auto& cols = report_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  auto num = [&](std::optional<double> v) {
    os << ',';
    if (v && std::isfinite(*v)) os << *v;
  };
  for (const auto& r : rows) {
    const auto& s = r.summary;
    os << r.run << ',' << s.mode << ',' << s.seed;
    num(s.previous_dsc);
    num(s.incoming_dsc);
    num(s.unseen_dsc);
    num(s.overall_dsc);
    num(s.bwt);
    num(s.fwt);
    num(s.previous_asd);
    num(s.incoming_asd);
    num(s.unseen_asd);
    num(s.overall_asd);
    num(s.bwt_plus);
    num(s.mean_cos_incoming_replay);
    num(s.mean_cos_vtrain_vtest);
    os << '\n';
  }
  return os.str();
}

}  // namespace sitecl
