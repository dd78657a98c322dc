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
#ifndef SITECL_DENOISER_HPP
#define SITECL_DENOISER_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "sitecl/loss.hpp"
#include "sitecl/rng.hpp"
#include "sitecl/tensor.hpp"

namespace sitecl {

/// Noise-prediction MLP over the flattened (noisy image, mask) pair.
///
/// The conditioning vector is c = time_embedding(k) + prompt. It enters the
/// first hidden layer through its own weight block, next to the pixel inputs,
/// and also drives a per-pixel affine path:
///   h1 = tanh(W_in [x_k ; y] + W_cond c + b0)
///   h2 = tanh(W_1 h1 + b1)
///   g  = tanh(W_mod c + b_mod),  (s, r, q) = W_film g + b_film
///   eps_hat[p] = (W_out h2 + b_out)[p] + s x_k[p] + r y[p] + q
/// The per-pixel path carries the timestep-dependent rescaling of x_k that a
/// narrow global MLP cannot represent.
struct DenoiserArch {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t time_dim = 16;
  std::size_t hidden = 128;
  std::size_t mod_hidden = 32;

  std::size_t pixels() const { return height * width; }
  LayoutPtr layout() const;
  bool operator==(const DenoiserArch&) const = default;
};

/// Sinusoidal embedding of timestep k (sin/cos pairs, geometric frequencies).
std::vector<double> time_embedding(std::size_t k, std::size_t dim);

class DenoiserModel {
 public:
  DenoiserModel(DenoiserArch arch, ParamVector params);
  static DenoiserModel init(const DenoiserArch& arch, Rng& rng);

  const DenoiserArch& arch() const { return arch_; }
  const ParamVector& params() const { return params_; }
  ParamVector& params() { return params_; }

  /// Predicted noise, same shape as the noisy image.
  Tensor predict(const Tensor& noisy, const Tensor& mask, std::size_t k, std::span<const double> prompt) const;

 private:
  DenoiserArch arch_;
  ParamVector params_;
};

struct DenoiserGrads {
  LossValue value;
  GradVector params;
  std::vector<double> prompt;
};

/// Loss = mean over pixels of (eps - eps_hat)^2, with gradients for the
/// network parameters and for the prompt vector.
DenoiserGrads denoiser_loss_and_grads(const DenoiserModel& model, const Tensor& noisy, const Tensor& mask, std::size_t k,
                                      std::span<const double> prompt, const Tensor& eps);

/// Same, evaluated at explicit parameters (used by gradient checks).
DenoiserGrads denoiser_loss_and_grads(const DenoiserModel& model, const ParamVector& params, const Tensor& noisy,
                                      const Tensor& mask, std::size_t k, std::span<const double> prompt,
                                      const Tensor& eps);

}  // namespace sitecl

#endif  // SITECL_DENOISER_HPP
