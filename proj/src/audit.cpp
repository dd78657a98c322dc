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
#include "sitecl/audit.hpp"

#include <algorithm>

#include "sitecl/errors.hpp"

namespace sitecl {

std::string to_string(AccessKind k) {
  switch (k) {
    case AccessKind::kRawTrain: return "raw_train";
    case AccessKind::kRawEval: return "raw_eval";
    case AccessKind::kReplay: return "replay";
  }
  return "raw_train";
}

void DataAccessLog::record(std::size_t round, int site_id, AccessKind kind, std::string purpose) {
  records_.push_back({round, site_id, kind, std::move(purpose)});
}

std::vector<std::string> DataAccessLog::violations(const std::vector<int>& sequence_ids, bool offline) const {
  std::vector<std::string> out;
  for (const auto& r : records_) {
    if (r.kind != AccessKind::kRawTrain) continue;
    const auto it = std::find(sequence_ids.begin(), sequence_ids.end(), r.site_id);
    const std::string where = "site " + std::to_string(r.site_id) + " read for '" + r.purpose + "' in round " +
                              std::to_string(r.round + 1);
    if (it == sequence_ids.end()) {
      out.push_back(where + ": not a training site");
      continue;
    }
    const auto own_round = static_cast<std::size_t>(it - sequence_ids.begin());
    const bool ok = offline ? r.round >= own_round : r.round == own_round;
    if (!ok) out.push_back(where + ": outside its round (" + std::to_string(own_round + 1) + ")");
  }
  return out;
}

void DataAccessLog::verify(const std::vector<int>& sequence_ids, bool offline) const {
  const auto v = violations(sequence_ids, offline);
  if (v.empty()) return;
  std::string msg = "privacy audit failed:";
  for (const auto& s : v) msg += "\n  " + s;
  throw AuditError(msg);
}

nlohmann::json DataAccessLog::to_json() const {
  auto arr = nlohmann::json::array();
  for (const auto& r : records_)
    arr.push_back({{"round", r.round + 1}, {"site_id", r.site_id}, {"kind", to_string(r.kind)}, {"purpose", r.purpose}});
  return arr;
}

std::vector<int> StreamAccess::sequence_ids() const {
  std::vector<int> ids;
  for (const auto& s : stream_.sequence) ids.push_back(s.style.site_id);
  return ids;
}

std::vector<int> StreamAccess::unseen_ids() const {
  std::vector<int> ids;
  for (const auto& s : stream_.unseen) ids.push_back(s.style.site_id);
  return ids;
}

const SiteDataset& StreamAccess::train(std::size_t site_index, const std::string& purpose) {
  const auto& d = stream_.sequence.at(site_index).splits.train;
  log_.record(round_, d.site_id, AccessKind::kRawTrain, purpose);
  return d;
}

const SiteDataset& StreamAccess::val(std::size_t site_index, const std::string& purpose) {
  const auto& d = stream_.sequence.at(site_index).splits.val;
  log_.record(round_, d.site_id, AccessKind::kRawEval, purpose);
  return d;
}

const SiteDataset& StreamAccess::test(std::size_t site_index) {
  const auto& d = stream_.sequence.at(site_index).splits.test;
  log_.record(round_, d.site_id, AccessKind::kRawEval, "evaluation");
  return d;
}

const SiteDataset& StreamAccess::unseen_test(std::size_t unseen_index) {
  const auto& d = stream_.unseen.at(unseen_index).splits.test;
  log_.record(round_, d.site_id, AccessKind::kRawEval, "evaluation");
  return d;
}

}  // namespace sitecl
