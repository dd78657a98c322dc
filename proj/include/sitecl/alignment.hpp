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
#ifndef SITECL_ALIGNMENT_HPP
#define SITECL_ALIGNMENT_HPP

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "sitecl/objective.hpp"
#include "sitecl/optimizer.hpp"
#include "sitecl/rng.hpp"
#include "sitecl/synth_sites.hpp"
#include "sitecl/tensor.hpp"

namespace sitecl {

enum class AlignMode { kFinetune, kNaiveDual, kPgaExact, kDualMeta, kOrientationalOnly, kArbitraryOnly };

std::string to_string(AlignMode m);
/// Accepts both the long names ("pga_exact") and the CLI spellings ("pga-exact", "naive").
AlignMode parse_align_mode(const std::string& s);

struct AlignConfig {
  /// Weight of the incoming/replay inner product, and the inner-update rate on the incoming batch.
  double gamma = 5e-5;
  /// Weight of the virtual-train/virtual-test inner product, and the inner-update rate on V_tr.
  double beta = 5e-4;
  double base_lr = 5e-4;
  double hvp_epsilon = 1e-4;
  AlignMode mode = AlignMode::kDualMeta;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  VirtualSplitPolicy split;

  void validate() const;
};

/// Pool indices of the incoming-site batch and the replay batch of one step.
struct StepBatches {
  std::vector<std::size_t> incoming;
  std::vector<std::size_t> replay;

  bool has_replay() const { return !replay.empty(); }
};

/// StepBatches plus the virtual split of their union, as pool indices.
struct ResolvedBatches {
  std::vector<std::size_t> incoming;
  std::vector<std::size_t> replay;
  std::vector<std::size_t> virtual_train;
  std::vector<std::size_t> virtual_test;

  bool has_replay() const { return !replay.empty(); }
};

/// Draws the virtual split. Without replay the union is the incoming batch alone.
ResolvedBatches resolve_batches(const StepBatches& b, Rng& rng, const VirtualSplitPolicy& policy);

struct StepDiagnostics {
  AlignMode mode = AlignMode::kDualMeta;
  double loss_incoming = 0.0;
  double loss_replay = 0.0;
  double loss_vtrain = 0.0;
  double loss_vtest = 0.0;
  double dot_incoming_replay = 0.0;
  double dot_vtrain_vtest = 0.0;
  double cos_incoming_replay = 0.0;
  double cos_vtrain_vtest = 0.0;
  double norm_incoming = 0.0;
  double norm_replay = 0.0;
  double norm_vtrain = 0.0;
  double norm_vtest = 0.0;
  bool has_replay = false;
  std::size_t gradient_evaluations = 0;
  /// The incoming/replay meta term was evaluated at shifted parameters.
  bool orientational_meta_evaluated = false;
  /// The V_tr/V_te meta term was evaluated at shifted parameters.
  bool arbitrary_meta_evaluated = false;
  std::size_t hvp_evaluations = 0;

  bool all_finite() const;
};

nlohmann::json to_json(const StepDiagnostics& d);

struct StepResult {
  ParamVector params;
  /// Descent direction; params = theta - base_lr * direction for SGD.
  GradVector direction;
  StepDiagnostics diagnostics;
};

/// Central-difference Hessian-vector product of the batch loss:
/// (g(theta + eps u) - g(theta - eps u)) / (2 eps) * |v|, u = v / |v|.
GradVector hvp(const Objective& obj, const ParamVector& theta, std::span<const std::size_t> batch, const GradVector& v,
               double epsilon);

/// Scalar value of the parallel-alignment objective for a resolved step.
double pga_objective(const Objective& obj, const ParamVector& theta, const ResolvedBatches& b, const AlignConfig& cfg);

StepResult finetune_step(const Objective& obj, const ParamVector& theta, const StepBatches& b, const AlignConfig& cfg,
                         Rng& rng);
StepResult naive_dual_step(const Objective& obj, const ParamVector& theta, const StepBatches& b,
                           const AlignConfig& cfg, Rng& rng);
StepResult pga_exact_step(const Objective& obj, const ParamVector& theta, const StepBatches& b, const AlignConfig& cfg,
                          Rng& rng);
StepResult dual_meta_step(const Objective& obj, const ParamVector& theta, const StepBatches& b, const AlignConfig& cfg,
                          Rng& rng);
/// Dual-Meta keeping only the incoming/replay meta-objective.
StepResult orientational_only_step(const Objective& obj, const ParamVector& theta, const StepBatches& b,
                                   const AlignConfig& cfg, Rng& rng);
/// Dual-Meta keeping only the virtual-split meta-objective.
StepResult arbitrary_only_step(const Objective& obj, const ParamVector& theta, const StepBatches& b,
                               const AlignConfig& cfg, Rng& rng);

/// Dispatches on cfg.mode.
StepResult align_step(const Objective& obj, const ParamVector& theta, const StepBatches& b, const AlignConfig& cfg,
                      Rng& rng);

}  // namespace sitecl

#endif  // SITECL_ALIGNMENT_HPP
