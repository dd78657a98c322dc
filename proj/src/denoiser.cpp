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
#include "sitecl/denoiser.hpp"

#include <cmath>

namespace sitecl {

namespace {

struct Offsets {
  std::size_t w_in, w_cond, b0, w1, b1, w_out, b_out, w_mod, b_mod, w_film, b_film;
};

Offsets offsets(const Layout& l) {
  return {l.segment("w_in").offset,  l.segment("w_cond").offset, l.segment("b0").offset,
          l.segment("w1").offset,    l.segment("b1").offset,     l.segment("w_out").offset,
          l.segment("b_out").offset, l.segment("w_mod").offset,  l.segment("b_mod").offset,
          l.segment("w_film").offset, l.segment("b_film").offset};
}

struct Forward {
  std::vector<double> cond;
  std::vector<double> h1;
  std::vector<double> h2;
  std::vector<double> mod;
  double film[3] = {0.0, 0.0, 0.0};  // scale on x_k, scale on mask, shift
  std::vector<double> out;
};

void check_inputs(const DenoiserArch& arch, const Tensor& noisy, const Tensor& mask, std::span<const double> prompt) {
  if (prompt.size() != arch.time_dim)
    throw StructuralError("denoiser: prompt dimension " + std::to_string(prompt.size()) +
                          " does not match time embedding dimension " + std::to_string(arch.time_dim));
  if (noisy.size() != arch.pixels() || !same_shape(noisy, mask))
    throw StructuralError("denoiser: image/mask shape does not match architecture");
}

Forward run(const DenoiserArch& arch, const double* p, const Offsets& o, const Tensor& noisy, const Tensor& mask,
            std::size_t k, std::span<const double> prompt) {
  const std::size_t P = arch.pixels();
  const std::size_t H = arch.hidden;
  const std::size_t E = arch.time_dim;
  Forward f;
  f.cond = time_embedding(k, E);
  for (std::size_t e = 0; e < E; ++e) f.cond[e] += prompt[e];

  f.h1.resize(H);
  const double* x = noisy.data().data();
  const double* y = mask.data().data();
  for (std::size_t h = 0; h < H; ++h) {
    const double* row = p + o.w_in + h * 2 * P;
    double s = p[o.b0 + h];
    for (std::size_t i = 0; i < P; ++i) s += row[i] * x[i];
    for (std::size_t i = 0; i < P; ++i) s += row[P + i] * y[i];
    const double* crow = p + o.w_cond + h * E;
    for (std::size_t e = 0; e < E; ++e) s += crow[e] * f.cond[e];
    f.h1[h] = std::tanh(s);
  }
  f.h2.resize(H);
  for (std::size_t h = 0; h < H; ++h) {
    const double* row = p + o.w1 + h * H;
    double s = p[o.b1 + h];
    for (std::size_t i = 0; i < H; ++i) s += row[i] * f.h1[i];
    f.h2[h] = std::tanh(s);
  }
  const std::size_t G = arch.mod_hidden;
  f.mod.resize(G);
  for (std::size_t m = 0; m < G; ++m) {
    const double* row = p + o.w_mod + m * E;
    double s = p[o.b_mod + m];
    for (std::size_t e = 0; e < E; ++e) s += row[e] * f.cond[e];
    f.mod[m] = std::tanh(s);
  }
  for (std::size_t j = 0; j < 3; ++j) {
    const double* row = p + o.w_film + j * G;
    double s = p[o.b_film + j];
    for (std::size_t m = 0; m < G; ++m) s += row[m] * f.mod[m];
    f.film[j] = s;
  }
  f.out.resize(P);
  for (std::size_t q = 0; q < P; ++q) {
    const double* row = p + o.w_out + q * H;
    double s = p[o.b_out + q];
    for (std::size_t i = 0; i < H; ++i) s += row[i] * f.h2[i];
    f.out[q] = s + f.film[0] * x[q] + f.film[1] * y[q] + f.film[2];
  }
  return f;
}

}  // namespace

LayoutPtr DenoiserArch::layout() const {
  if (height == 0 || width == 0 || hidden == 0 || mod_hidden == 0 || time_dim == 0 || time_dim % 2 != 0)
    throw ValidationError("DenoiserArch: dimensions must be positive and time_dim even");
  auto l = std::make_shared<Layout>();
  l->add("w_in", {hidden, 2 * pixels()});
  l->add("w_cond", {hidden, time_dim});
  l->add("b0", {hidden});
  l->add("w1", {hidden, hidden});
  l->add("b1", {hidden});
  l->add("w_out", {pixels(), hidden});
  l->add("b_out", {pixels()});
  l->add("w_mod", {mod_hidden, time_dim});
  l->add("b_mod", {mod_hidden});
  l->add("w_film", {3, mod_hidden});
  l->add("b_film", {3});
  return l;
}

std::vector<double> time_embedding(std::size_t k, std::size_t dim) {
  std::vector<double> e(dim, 0.0);
  const std::size_t half = dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
    e[2 * i] = std::sin(static_cast<double>(k) * freq);
    e[2 * i + 1] = std::cos(static_cast<double>(k) * freq);
  }
  return e;
}

DenoiserModel::DenoiserModel(DenoiserArch arch, ParamVector params) : arch_(arch), params_(std::move(params)) {
  if (!params_.compatible(arch_.layout())) throw StructuralError("DenoiserModel: parameters do not match architecture");
}

DenoiserModel DenoiserModel::init(const DenoiserArch& arch, Rng& rng) {
  auto layout = arch.layout();
  ParamVector p(layout);
  for (const auto& seg : layout->segments()) {
    if (seg.shape.size() != 2) continue;
    const double scale = 1.0 / std::sqrt(static_cast<double>(seg.shape[1]));
    for (std::size_t i = 0; i < seg.size; ++i) p[seg.offset + i] = scale * rng.normal();
  }
  return DenoiserModel(arch, std::move(p));
}

Tensor DenoiserModel::predict(const Tensor& noisy, const Tensor& mask, std::size_t k,
                              std::span<const double> prompt) const {
  check_inputs(arch_, noisy, mask, prompt);
  const auto f = run(arch_, params_.data().data(), offsets(*params_.layout()), noisy, mask, k, prompt);
  return Tensor(noisy.shape(), f.out);
}

DenoiserGrads denoiser_loss_and_grads(const DenoiserModel& model, const Tensor& noisy, const Tensor& mask, std::size_t k,
                                      std::span<const double> prompt, const Tensor& eps) {
  return denoiser_loss_and_grads(model, model.params(), noisy, mask, k, prompt, eps);
}

DenoiserGrads denoiser_loss_and_grads(const DenoiserModel& model, const ParamVector& params, const Tensor& noisy,
                                      const Tensor& mask, std::size_t k, std::span<const double> prompt,
                                      const Tensor& eps) {
  const auto& arch = model.arch();
  check_inputs(arch, noisy, mask, prompt);
  if (!same_shape(noisy, eps)) throw StructuralError("denoiser: noise tensor shape mismatch");
  if (!params.compatible(model.params().layout())) throw StructuralError("denoiser: parameter layout mismatch");

  const std::size_t P = arch.pixels();
  const std::size_t H = arch.hidden;
  const std::size_t E = arch.time_dim;
  const Offsets o = offsets(*params.layout());
  const double* p = params.data().data();
  const auto f = run(arch, p, o, noisy, mask, k, prompt);

  DenoiserGrads out{LossValue{}, GradVector(params.layout()), std::vector<double>(E, 0.0)};
  double* g = out.params.data().data();
  const double inv_p = 1.0 / static_cast<double>(P);

  std::vector<double> d_out(P);
  double loss = 0.0;
  for (std::size_t q = 0; q < P; ++q) {
    const double r = f.out[q] - eps[q];
    loss += r * r;
    d_out[q] = 2.0 * r * inv_p;
  }
  loss *= inv_p;
  out.value.loss = loss;
  out.value.per_sample = {loss};

  const double* x = noisy.data().data();
  const double* y = mask.data().data();
  const std::size_t G = arch.mod_hidden;
  double d_film[3] = {0.0, 0.0, 0.0};
  for (std::size_t q = 0; q < P; ++q) {
    d_film[0] += d_out[q] * x[q];
    d_film[1] += d_out[q] * y[q];
    d_film[2] += d_out[q];
  }
  std::vector<double> d_mod(G, 0.0);
  for (std::size_t j = 0; j < 3; ++j) {
    g[o.b_film + j] += d_film[j];
    for (std::size_t m = 0; m < G; ++m) {
      g[o.w_film + j * G + m] += d_film[j] * f.mod[m];
      d_mod[m] += d_film[j] * p[o.w_film + j * G + m];
    }
  }
  for (std::size_t m = 0; m < G; ++m) {
    const double d = d_mod[m] * (1.0 - f.mod[m] * f.mod[m]);
    g[o.b_mod + m] += d;
    for (std::size_t e = 0; e < E; ++e) {
      g[o.w_mod + m * E + e] += d * f.cond[e];
      out.prompt[e] += d * p[o.w_mod + m * E + e];
    }
  }

  std::vector<double> d_h2(H, 0.0);
  for (std::size_t q = 0; q < P; ++q) {
    g[o.b_out + q] += d_out[q];
    double* grow = g + o.w_out + q * H;
    const double* prow = p + o.w_out + q * H;
    for (std::size_t i = 0; i < H; ++i) {
      grow[i] += d_out[q] * f.h2[i];
      d_h2[i] += d_out[q] * prow[i];
    }
  }
  for (std::size_t i = 0; i < H; ++i) d_h2[i] *= 1.0 - f.h2[i] * f.h2[i];

  std::vector<double> d_h1(H, 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    g[o.b1 + h] += d_h2[h];
    double* grow = g + o.w1 + h * H;
    const double* prow = p + o.w1 + h * H;
    for (std::size_t i = 0; i < H; ++i) {
      grow[i] += d_h2[h] * f.h1[i];
      d_h1[i] += d_h2[h] * prow[i];
    }
  }
  for (std::size_t i = 0; i < H; ++i) d_h1[i] *= 1.0 - f.h1[i] * f.h1[i];

  for (std::size_t h = 0; h < H; ++h) {
    const double d = d_h1[h];
    g[o.b0 + h] += d;
    double* grow = g + o.w_in + h * 2 * P;
    for (std::size_t i = 0; i < P; ++i) grow[i] += d * x[i];
    for (std::size_t i = 0; i < P; ++i) grow[P + i] += d * y[i];
    double* gc = g + o.w_cond + h * E;
    const double* pc = p + o.w_cond + h * E;
    for (std::size_t e = 0; e < E; ++e) {
      gc[e] += d * f.cond[e];
      out.prompt[e] += d * pc[e];
    }
  }
  return out;
}

}  // namespace sitecl
