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
#ifndef SITECL_AUDIT_HPP
#define SITECL_AUDIT_HPP

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "sitecl/synth_sites.hpp"

namespace sitecl {

enum class AccessKind { kRawTrain, kRawEval, kReplay };
std::string to_string(AccessKind k);

struct AccessRecord {
  std::size_t round = 0;
  int site_id = 0;
  AccessKind kind = AccessKind::kRawTrain;
  std::string purpose;
};

/// Append-only record of every dataset read during a run.
class DataAccessLog {
 public:
  void record(std::size_t round, int site_id, AccessKind kind, std::string purpose);
  const std::vector<AccessRecord>& records() const { return records_; }

  /// Raw training reads of sequence site i must happen in round i only; an
  /// offline (pooled) run may read site i in any round >= i. Unseen sites are
  /// never read for training. Returns the violations, empty when clean.
  std::vector<std::string> violations(const std::vector<int>& sequence_ids, bool offline) const;
  /// Throws AuditError listing the violations.
  void verify(const std::vector<int>& sequence_ids, bool offline) const;

  nlohmann::json to_json() const;

 private:
  std::vector<AccessRecord> records_;
};

/// Gatekeeper in front of a SiteStream: every read goes through here and is logged.
class StreamAccess {
 public:
  StreamAccess(const SiteStream& stream, DataAccessLog& log) : stream_(stream), log_(log) {}

  void set_round(std::size_t round) { round_ = round; }
  std::size_t round() const { return round_; }
  std::size_t sequence_length() const { return stream_.sequence.size(); }
  std::size_t unseen_count() const { return stream_.unseen.size(); }
  std::vector<int> sequence_ids() const;
  std::vector<int> unseen_ids() const;

  const SiteDataset& train(std::size_t site_index, const std::string& purpose);
  const SiteDataset& val(std::size_t site_index, const std::string& purpose);
  const SiteDataset& test(std::size_t site_index);
  const SiteDataset& unseen_test(std::size_t unseen_index);

 private:
  const SiteStream& stream_;
  DataAccessLog& log_;
  std::size_t round_ = 0;
};

}  // namespace sitecl

#endif  // SITECL_AUDIT_HPP
