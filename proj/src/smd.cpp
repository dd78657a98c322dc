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
#include "sitecl/smd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sitecl/errors.hpp"

namespace sitecl {

NoiseSchedule::NoiseSchedule(std::size_t steps, double beta_start, double beta_end) : steps_(steps) {
  if (steps < 1) throw ValidationError("NoiseSchedule: need at least one step");
  if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end))
    throw ValidationError("NoiseSchedule: betas must satisfy 0 < start <= end < 1");
  beta_.assign(steps + 1, 0.0);
  alpha_bar_.assign(steps + 1, 1.0);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(k - 1) / static_cast<double>(steps - 1);
    beta_[k] = beta_start + frac * (beta_end - beta_start);
    alpha_bar_[k] = alpha_bar_[k - 1] * (1.0 - beta_[k]);
  }
}

NoiseSchedule NoiseSchedule::linear(std::size_t steps) {
  if (steps < 1) throw ValidationError("NoiseSchedule: need at least one step");
  const double scale = 1000.0 / static_cast<double>(steps);
  return NoiseSchedule(steps, 1e-4 * scale, 2e-2 * scale);
}

double NoiseSchedule::posterior_variance(std::size_t k) const {
  if (k == 0 || k > steps_) throw ValidationError("posterior_variance: k out of range");
  return beta_[k] * (1.0 - alpha_bar_[k - 1]) / (1.0 - alpha_bar_[k]);
}

Diffused forward_diffuse(const Tensor& clean, std::size_t k, const NoiseSchedule& schedule, Rng& rng) {
  if (k > schedule.steps()) throw ValidationError("forward_diffuse: k outside [0, K]");
  if (!clean.all_finite()) throw ValidationError("forward_diffuse: non-finite input image");
  const double a = std::sqrt(schedule.alpha_bar(k));
  const double s = std::sqrt(1.0 - schedule.alpha_bar(k));
  Diffused out{Tensor(clean.shape()), Tensor(clean.shape())};
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double e = rng.normal();
    out.eps[i] = e;
    out.noisy[i] = a * clean[i] + s * e;
  }
  return out;
}

PromptEmbedding fixed_prompt_baseline(int site_id, std::size_t dim, const Rng& base) {
  Rng r = base.split({0x9A0B, static_cast<std::uint64_t>(site_id)});
  PromptEmbedding p{site_id, std::vector<double>(dim), true};
  for (auto& v : p.vector) v = r.normal();
  return p;
}

PromptEmbedding learnable_prompt(int site_id, std::size_t dim, const Rng& base) {
  auto p = fixed_prompt_baseline(site_id, dim, base);
  p.frozen = false;
  return p;
}

std::size_t ReplayBuffer::total() const {
  std::size_t n = 0;
  for (const auto& s : sites) n += s.images.size();
  return n;
}

std::vector<SampleRef> ReplayBuffer::samples() const {
  std::vector<SampleRef> out;
  for (const auto& s : sites)
    for (std::size_t i = 0; i < s.images.size(); ++i) out.push_back({&s.images[i], &s.masks[i], s.site_id});
  return out;
}

std::vector<SiteDataset> ReplayBuffer::as_datasets() const {
  std::vector<SiteDataset> out;
  for (const auto& s : sites) {
    SiteDataset d;
    d.site_id = s.site_id;
    d.split = Split::kTrain;
    d.images = s.images;
    d.masks = s.masks;
    d.source_index = s.mask_source;
    out.push_back(std::move(d));
  }
  return out;
}

void SmdConfig::validate() const {
  if (steps < 1) throw ValidationError("SmdConfig: steps must be >= 1");
  if (!(lr > 0.0)) throw ValidationError("SmdConfig: lr must be positive");
  if (batch_size < 1 || report_chunks < 1) throw ValidationError("SmdConfig: batch_size and report_chunks must be >= 1");
  arch.layout();
}

SmdTrainResult train_smd(const DenoiserModel& denoiser, std::vector<PromptEmbedding> prompts, const SiteDataset& incoming,
                         const ReplayBuffer& buffer, const SmdConfig& cfg, Rng rng) {
  cfg.validate();
  const std::size_t t = buffer.sites.size() + 1;
  if (prompts.size() != t)
    throw ValidationError("train_smd: expected " + std::to_string(t) + " prompts, got " + std::to_string(prompts.size()));
  for (std::size_t i = 0; i + 1 < t; ++i)
    if (prompts[i].site_id != buffer.sites[i].site_id)
      throw ValidationError("train_smd: prompt order does not match buffer sites");
  if (prompts.back().site_id != incoming.site_id)
    throw ValidationError("train_smd: last prompt must belong to the incoming site");
  for (const auto& p : prompts)
    if (p.vector.size() != denoiser.arch().time_dim)
      throw StructuralError("train_smd: prompt dimension does not match time embedding dimension");
  if (incoming.size() == 0) throw ValidationError("train_smd: incoming site is empty");

  const auto schedule = NoiseSchedule::linear(cfg.steps);
  struct Entry {
    SampleRef sample;
    std::size_t prompt;
  };
  std::vector<Entry> pool;
  for (std::size_t s = 0; s < buffer.sites.size(); ++s)
    for (std::size_t i = 0; i < buffer.sites[s].images.size(); ++i)
      pool.push_back({{&buffer.sites[s].images[i], &buffer.sites[s].masks[i], buffer.sites[s].site_id}, s});
  for (const auto& r : refs(incoming)) pool.push_back({r, t - 1});

  SmdTrainResult out{denoiser, std::move(prompts), {}};
  Optimizer net_opt(cfg.optimizer, cfg.lr);
  const double prompt_lr = cfg.prompt_lr > 0.0 ? cfg.prompt_lr : cfg.lr;
  std::vector<Optimizer> prompt_opts;
  for (std::size_t i = 0; i < t; ++i) prompt_opts.emplace_back(cfg.optimizer, prompt_lr);

  const std::size_t E = denoiser.arch().time_dim;
  const std::size_t chunk = std::max<std::size_t>(1, cfg.iterations / cfg.report_chunks);
  const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
  double chunk_sum = 0.0;
  std::size_t chunk_n = 0;

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    GradVector g(out.denoiser.params().layout());
    std::vector<std::vector<double>> pg(t, std::vector<double>(E, 0.0));
    std::vector<bool> touched(t, false);
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const auto& e = pool[rng.below(pool.size())];
      const std::size_t k = 1 + rng.below(schedule.steps());
      const auto d = forward_diffuse(*e.sample.image, k, schedule, rng);
      auto r = denoiser_loss_and_grads(out.denoiser, d.noisy, *e.sample.mask, k, out.prompts[e.prompt].vector, d.eps);
      batch_loss += r.value.loss;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += inv_b * r.params[i];
      for (std::size_t j = 0; j < E; ++j) pg[e.prompt][j] += inv_b * r.prompt[j];
      touched[e.prompt] = true;
    }
    if (!std::isfinite(batch_loss)) throw NumericError("train_smd: non-finite denoising loss");
    net_opt.step(out.denoiser.params().data(), g.data());
    for (std::size_t i = 0; i < t; ++i)
      if (!out.prompts[i].frozen && touched[i]) prompt_opts[i].step(out.prompts[i].vector, pg[i]);

    chunk_sum += batch_loss * inv_b;
    ++chunk_n;
    if (chunk_n == chunk || it + 1 == cfg.iterations) {
      out.chunk_losses.push_back(chunk_sum / static_cast<double>(chunk_n));
      chunk_sum = 0.0;
      chunk_n = 0;
    }
  }
  return out;
}

Tensor sample_replay(const DenoiserModel& denoiser, const PromptEmbedding& prompt, const Tensor& mask,
                     const NoiseSchedule& schedule, Rng rng) {
  for (double m : mask.data())
    if (m != 0.0 && m != 1.0) throw ValidationError("sample_replay: mask is not binary");
  if (prompt.vector.size() != denoiser.arch().time_dim)
    throw StructuralError("sample_replay: prompt dimension does not match time embedding dimension");

  Tensor x(mask.shape());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
  for (std::size_t k = schedule.steps(); k >= 1; --k) {
    const Tensor eps_hat = denoiser.predict(x, mask, k, prompt.vector);
    const double coef = schedule.beta(k) / std::sqrt(1.0 - schedule.alpha_bar(k));
    const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha(k));
    const double sigma = k > 1 ? std::sqrt(schedule.posterior_variance(k)) : 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = inv_sqrt_alpha * (x[i] - coef * eps_hat[i]);
      if (k > 1) x[i] += sigma * rng.normal();
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], -1.0, 1.0);
  return x;
}

ReplayBuffer build_buffer(const DenoiserModel& denoiser, const std::vector<PromptEmbedding>& past_prompts,
                          const std::vector<Tensor>& incoming_masks, std::size_t n_per_site,
                          const NoiseSchedule& schedule, Rng rng) {
  ReplayBuffer buffer;
  if (past_prompts.empty()) return buffer;
  if (incoming_masks.empty()) throw ValidationError("build_buffer: incoming mask pool is empty");
  for (const auto& prompt : past_prompts) {
    ReplaySite site;
    site.site_id = prompt.site_id;
    Rng pick = rng.split({0xB0F, static_cast<std::uint64_t>(prompt.site_id)});
    // Without replacement while the pool lasts.
    std::vector<std::size_t> order(incoming_masks.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[pick.below(i)]);
    for (std::size_t j = 0; j < n_per_site; ++j) {
      const std::size_t src = j < order.size() ? order[j] : pick.below(incoming_masks.size());
      const Tensor& mask = incoming_masks[src];
      Rng entry = rng.split({0x5A3, static_cast<std::uint64_t>(prompt.site_id), j});
      site.images.push_back(sample_replay(denoiser, prompt, mask, schedule, entry));
      site.masks.push_back(mask);
      site.mask_source.push_back(src);
    }
    buffer.sites.push_back(std::move(site));
  }
  return buffer;
}

double denoising_loss(const DenoiserModel& denoiser, const std::vector<std::pair<SampleRef, const PromptEmbedding*>>& data,
                      const NoiseSchedule& schedule, std::size_t draws_per_sample, Rng rng) {
  if (data.empty() || draws_per_sample == 0) throw ValidationError("denoising_loss: nothing to evaluate");
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& [sample, prompt] : data) {
    for (std::size_t d = 0; d < draws_per_sample; ++d) {
      const std::size_t k = 1 + rng.below(schedule.steps());
      const auto noised = forward_diffuse(*sample.image, k, schedule, rng);
      const Tensor eps_hat = denoiser.predict(noised.noisy, *sample.mask, k, prompt->vector);
      double l = 0.0;
      for (std::size_t i = 0; i < eps_hat.size(); ++i) {
        const double r = eps_hat[i] - noised.eps[i];
        l += r * r;
      }
      total += l / static_cast<double>(eps_hat.size());
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

}  // namespace sitecl
