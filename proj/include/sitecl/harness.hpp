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
#ifndef SITECL_HARNESS_HPP
#define SITECL_HARNESS_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sitecl/alignment.hpp"
#include "sitecl/audit.hpp"
#include "sitecl/metrics.hpp"
#include "sitecl/seg_model.hpp"
#include "sitecl/smd.hpp"
#include "sitecl/synth_sites.hpp"

namespace sitecl {

/// Mode name for pooled offline training of all sites seen so far.
inline constexpr const char* kJointTrain = "jointtrain";

struct ExperimentConfig {
  StreamSpec stream = default_stream_spec(7);
  SegArch seg;
  AlignConfig align;
  /// Any AlignMode name, or "jointtrain".
  std::string mode = "dual_meta";
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  /// Replay samples per step; 0 means "same as batch_size".
  std::size_t replay_batch_size = 0;
  SmdConfig smd;
  /// Condition the diffusion model on frozen random prompts instead of learnable ones.
  bool fixed_prompts = false;
  /// Finetune only: build the buffer so replay gradients can be logged (never used for updates).
  bool log_replay = false;
  /// Evaluate each round with the epoch that scored best on the incoming validation split.
  bool select_by_validation = false;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  bool write_checkpoints = true;

  void validate() const;
  bool joint() const { return mode == kJointTrain; }
  bool uses_replay() const;
  std::size_t replay_batch() const { return replay_batch_size == 0 ? batch_size : replay_batch_size; }
};

/// Desk-scale defaults for the 4-site stream, tuned so that plain
/// finetuning forgets visibly within 20 epochs per round.
ExperimentConfig default_experiment_config();

struct SiteScore {
  double dsc = 0.0;
  /// NaN when every prediction was empty.
  double asd = 0.0;
  std::size_t asd_skips = 0;
};

/// Mean DSC and ASD of the model's predictions over a test split.
SiteScore evaluate_site(const SegModel& model, const SiteDataset& test);

/// Site-modulated diffusion state along one stream and seed. It depends only
/// on the data stream, never on the segmentation model, so runs of different
/// modes with the same seed can share it.
class ReplayTrack {
 public:
  ReplayTrack(const ExperimentConfig& cfg, std::uint64_t seed);

  /// Buffer for round r >= 1, generated from the diffusion state after round r-1
  /// and conditioned on masks of the incoming site.
  const ReplayBuffer& buffer(std::size_t round, const SiteDataset& incoming);
  /// Updates the diffusion model and prompts on the incoming site plus buffer(round).
  void train_round(std::size_t round, const SiteDataset& incoming);

  std::size_t rounds_trained() const { return rounds_trained_; }
  const std::vector<PromptEmbedding>& prompts() const { return prompts_; }
  const DenoiserModel& denoiser() const { return denoiser_; }
  const std::vector<std::vector<double>>& losses() const { return losses_; }

 private:
  SmdConfig cfg_;
  bool fixed_prompts_;
  Rng rng_;
  NoiseSchedule schedule_;
  DenoiserModel denoiser_;
  std::vector<PromptEmbedding> prompts_;
  std::map<std::size_t, ReplayBuffer> buffers_;
  std::vector<std::vector<double>> losses_;
  std::size_t rounds_trained_ = 0;
  ReplayBuffer empty_;
};

struct DiagnosticRow {
  std::size_t step = 0;
  std::size_t round = 0;
  StepDiagnostics diag;
};

struct RunRecord {
  std::string mode;
  std::uint64_t seed = 0;
  std::vector<int> sequence_ids;
  std::vector<int> unseen_ids;
  AccuracyMatrix dsc;
  AccuracyMatrix asd;
  /// [round][unseen site]
  std::vector<std::vector<double>> unseen_dsc;
  std::vector<std::vector<double>> unseen_asd;
  std::vector<DiagnosticRow> diagnostics;
  std::vector<ParamVector> checkpoints;
  SegArch seg_arch;
  DataAccessLog access_log;
  std::vector<PromptEmbedding> prompts;
  std::vector<std::vector<double>> smd_losses;
  std::size_t asd_skips = 0;
  double seconds = 0.0;
};

struct RunSummary {
  std::string mode;
  std::uint64_t seed = 0;
  std::size_t rounds = 0;
  std::optional<double> previous_dsc;
  double incoming_dsc = 0.0;
  std::optional<double> unseen_dsc;
  double overall_dsc = 0.0;
  std::optional<double> bwt;
  std::optional<double> fwt;
  std::optional<double> previous_asd;
  double incoming_asd = 0.0;
  std::optional<double> unseen_asd;
  double overall_asd = 0.0;
  std::optional<double> bwt_plus;
  std::optional<double> fwt_asd;
  /// Mean cosine between incoming and replay gradients over steps with replay.
  std::optional<double> mean_cos_incoming_replay;
  std::optional<double> mean_cos_vtrain_vtest;
  std::size_t steps = 0;
  double seconds = 0.0;
};

RunSummary summarize(const RunRecord& r);
nlohmann::json to_json(const RunSummary& s);
RunSummary summary_from_json(const nlohmann::json& j);

/// Runs the sequential protocol for one seed. A shared ReplayTrack may be
/// passed to reuse diffusion replay across modes; it must belong to the same
/// config stream and seed. Throws AuditError on a privacy breach.
RunRecord run_sequence(const ExperimentConfig& cfg, std::uint64_t seed, ReplayTrack* shared_track = nullptr);

struct ComparisonTable {
  std::vector<RunSummary> runs;
  /// Per-mode mean and median of each summary column.
  std::map<std::string, RunSummary> mean;
  std::map<std::string, RunSummary> median;
};

/// Every mode over every seed of cfg, sharing data and replay per seed.
ComparisonTable run_comparison(const ExperimentConfig& cfg, const std::vector<std::string>& modes,
                               std::vector<RunRecord>* records = nullptr);

/// Writes matrix_dsc.csv, matrix_asd.csv, summary.json, diagnostics.jsonl,
/// diagnostics.csv, audit.json, config.json, prompts/ and checkpoints/.
void write_run(const RunRecord& r, const ExperimentConfig& cfg, const std::filesystem::path& dir);

/// Per-step loss and alignment series as CSV; one row per optimizer step.
void diagnostics_export(const RunRecord& r, const std::filesystem::path& dir);

std::string run_id(const std::string& mode, std::uint64_t seed);

}  // namespace sitecl

#endif  // SITECL_HARNESS_HPP
