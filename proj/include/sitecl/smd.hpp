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
#ifndef SITECL_SMD_HPP
#define SITECL_SMD_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sitecl/denoiser.hpp"
#include "sitecl/optimizer.hpp"
#include "sitecl/rng.hpp"
#include "sitecl/synth_sites.hpp"
#include "sitecl/tensor.hpp"

namespace sitecl {

/// Linear variance schedule. Index 0 is the clean image: alpha_bar[0] = 1.
class NoiseSchedule {
 public:
  /// betas rise linearly from beta_start to beta_end over steps 1..K.
  NoiseSchedule(std::size_t steps, double beta_start, double beta_end);
  /// The 1000-step reference range (1e-4, 2e-2) rescaled by 1000 / K.
  static NoiseSchedule linear(std::size_t steps);

  std::size_t steps() const { return steps_; }
  double beta(std::size_t k) const { return beta_.at(k); }
  double alpha(std::size_t k) const { return 1.0 - beta_.at(k); }
  double alpha_bar(std::size_t k) const { return alpha_bar_.at(k); }
  /// Variance of the ancestral step k -> k-1 (posterior variance).
  double posterior_variance(std::size_t k) const;

 private:
  std::size_t steps_;
  std::vector<double> beta_;
  std::vector<double> alpha_bar_;
};

struct Diffused {
  Tensor noisy;
  Tensor eps;
};

/// sqrt(abar_k) I_0 + sqrt(1 - abar_k) eps with eps ~ N(0, I).
Diffused forward_diffuse(const Tensor& clean, std::size_t k, const NoiseSchedule& schedule, Rng& rng);

struct PromptEmbedding {
  int site_id = 0;
  std::vector<double> vector;
  bool frozen = false;

  bool operator==(const PromptEmbedding&) const = default;
};

/// Deterministic random embedding derived from the site id; frozen.
PromptEmbedding fixed_prompt_baseline(int site_id, std::size_t dim, const Rng& base);
/// Same starting point as the fixed baseline, but trainable.
PromptEmbedding learnable_prompt(int site_id, std::size_t dim, const Rng& base);

/// Generated pairs for one past site.
struct ReplaySite {
  int site_id = 0;
  std::vector<Tensor> images;
  std::vector<Tensor> masks;
  /// Index into the incoming mask pool that conditioned each image.
  std::vector<std::size_t> mask_source;
};

struct ReplayBuffer {
  std::vector<ReplaySite> sites;

  bool empty() const { return sites.empty(); }
  std::size_t total() const;
  /// Flattened view, every sample tagged with its past site id.
  std::vector<SampleRef> samples() const;
  /// One SiteDataset per past site (for the dataset container).
  std::vector<SiteDataset> as_datasets() const;
};

struct SmdConfig {
  std::size_t steps = 50;
  DenoiserArch arch;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double lr = 1e-3;
  /// <= 0 means "same as lr".
  double prompt_lr = 0.0;
  std::size_t iterations = 1500;
  std::size_t batch_size = 16;
  /// Iterations are reported in this many equal chunks ("epochs").
  std::size_t report_chunks = 10;
  std::size_t samples_per_site = 64;
  bool learnable_prompts = true;

  void validate() const;
};

struct SmdTrainResult {
  DenoiserModel denoiser;
  std::vector<PromptEmbedding> prompts;
  /// Mean training loss of each report chunk.
  std::vector<double> chunk_losses;
};

/// Jointly fits the denoiser and the prompts on the incoming site plus the
/// replay buffer. prompts[i] belongs to buffer.sites[i] for i < t-1 and the
/// last prompt to the incoming site; frozen prompts are never changed.
SmdTrainResult train_smd(const DenoiserModel& denoiser, std::vector<PromptEmbedding> prompts, const SiteDataset& incoming,
                         const ReplayBuffer& buffer, const SmdConfig& cfg, Rng rng);

/// Ancestral sampling from pure noise, conditioned on mask and prompt; clamped to [-1, 1].
Tensor sample_replay(const DenoiserModel& denoiser, const PromptEmbedding& prompt, const Tensor& mask,
                     const NoiseSchedule& schedule, Rng rng);

/// For every prompt, draws n_per_site masks from the incoming pool and
/// generates one image per mask. No prompts gives an empty buffer.
ReplayBuffer build_buffer(const DenoiserModel& denoiser, const std::vector<PromptEmbedding>& past_prompts,
                          const std::vector<Tensor>& incoming_masks, std::size_t n_per_site,
                          const NoiseSchedule& schedule, Rng rng);

/// Mean denoising loss over (sample, k, eps) triples drawn from a fixed stream.
double denoising_loss(const DenoiserModel& denoiser, const std::vector<std::pair<SampleRef, const PromptEmbedding*>>& data,
                      const NoiseSchedule& schedule, std::size_t draws_per_sample, Rng rng);

}  // namespace sitecl

#endif  // SITECL_SMD_HPP
