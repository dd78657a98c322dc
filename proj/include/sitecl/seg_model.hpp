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
#ifndef SITECL_SEG_MODEL_HPP
#define SITECL_SEG_MODEL_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "sitecl/loss.hpp"
#include "sitecl/rng.hpp"
#include "sitecl/synth_sites.hpp"
#include "sitecl/tensor.hpp"

namespace sitecl {

/// Per-pixel MLP over a patch x patch neighborhood (edge-replicated),
/// optionally fed the image mean as a global context input.
struct SegArch {
  std::size_t patch = 3;
  std::vector<std::size_t> hidden = {16, 16};
  bool context_mean = true;

  std::size_t input_dim() const { return patch * patch + (context_mean ? 1 : 0); }
  LayoutPtr layout() const;
  bool operator==(const SegArch&) const = default;
};

class SegModel {
 public:
  SegModel(SegArch arch, ParamVector params);

  /// Scaled-normal init; zero_output_layer makes every logit 0.
  static SegModel init(const SegArch& arch, Rng& rng, bool zero_output_layer = false);

  const SegArch& arch() const { return arch_; }
  const ParamVector& params() const { return params_; }
  ParamVector& params() { return params_; }

  Tensor logits(const Tensor& image) const { return logits(params_, image); }
  Tensor logits(const ParamVector& params, const Tensor& image) const;

  LossValue loss(const ParamVector& params, std::span<const SampleRef> batch) const;
  LossGrad loss_and_grad(const ParamVector& params, std::span<const SampleRef> batch) const;

 private:
  SegArch arch_;
  ParamVector params_;
};

/// Mean per-pixel binary cross-entropy on logits for one image.
double bce_with_logits(const Tensor& logits, const Tensor& mask);

LossGrad seg_loss_and_grad(const SegModel& model, std::span<const SampleRef> batch);

/// Thresholds logits at 0 (strictly positive -> foreground).
Tensor threshold_logits(const Tensor& logits);
std::vector<Tensor> predict_masks(const SegModel& model, std::span<const Tensor> images);

}  // namespace sitecl

#endif  // SITECL_SEG_MODEL_HPP
