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
#include "sitecl/seg_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sitecl {

namespace {

struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t w = 0;  // offset of the [out, in] weight block
  std::size_t b = 0;  // offset of the [out] bias block
};

std::vector<Dense> dense_layers(const SegArch& arch, const Layout& layout) {
  std::vector<Dense> layers;
  std::size_t in = arch.input_dim();
  for (std::size_t l = 0; l < arch.hidden.size(); ++l) {
    const auto& w = layout.segment("w" + std::to_string(l));
    const auto& b = layout.segment("b" + std::to_string(l));
    layers.push_back({in, arch.hidden[l], w.offset, b.offset});
    in = arch.hidden[l];
  }
  layers.push_back({in, 1, layout.segment("w_out").offset, layout.segment("b_out").offset});
  return layers;
}

void gather_patch(const Tensor& image, std::size_t y, std::size_t x, const SegArch& arch, double context,
                  std::vector<double>& out) {
  const auto h = static_cast<long>(image.dim(0));
  const auto w = static_cast<long>(image.dim(1));
  const long r = static_cast<long>(arch.patch / 2);
  std::size_t k = 0;
  for (long dy = -r; dy <= r; ++dy) {
    for (long dx = -r; dx <= r; ++dx) {
      const long yy = std::clamp(static_cast<long>(y) + dy, 0L, h - 1);
      const long xx = std::clamp(static_cast<long>(x) + dx, 0L, w - 1);
      out[k++] = image.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
    }
  }
  if (arch.context_mean) out[k] = context;
}

/// Activations of one pixel; acts[0] is the input, acts.back() the last hidden layer.
double forward_pixel(const std::vector<Dense>& layers, const double* p, std::vector<std::vector<double>>& acts) {
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    const auto& L = layers[l];
    const auto& a = acts[l];
    auto& next = acts[l + 1];
    for (std::size_t o = 0; o < L.out; ++o) {
      const double* row = p + L.w + o * L.in;
      double s = p[L.b + o];
      for (std::size_t i = 0; i < L.in; ++i) s += row[i] * a[i];
      next[o] = std::tanh(s);
    }
  }
  const auto& last = layers.back();
  const auto& a = acts[layers.size() - 1];
  double z = p[last.b];
  for (std::size_t i = 0; i < last.in; ++i) z += p[last.w + i] * a[i];
  return z;
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double bce(double z, double y) { return softplus(z) - z * y; }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_pair(const SampleRef& s) {
  if (!s.image || !s.mask) throw StructuralError("segmentation batch: null sample");
  if (s.image->rank() != 2 || !same_shape(*s.image, *s.mask))
    throw StructuralError("segmentation batch: image and mask shapes differ");
}

}  // namespace

LayoutPtr SegArch::layout() const {
  if (patch == 0 || patch % 2 == 0) throw ValidationError("SegArch: patch must be odd and positive");
  auto layout = std::make_shared<Layout>();
  std::size_t in = input_dim();
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    layout->add("w" + std::to_string(l), {hidden[l], in});
    layout->add("b" + std::to_string(l), {hidden[l]});
    in = hidden[l];
  }
  layout->add("w_out", {1, in});
  layout->add("b_out", {1});
  return layout;
}

SegModel::SegModel(SegArch arch, ParamVector params) : arch_(std::move(arch)), params_(std::move(params)) {
  if (!params_.compatible(arch_.layout())) throw StructuralError("SegModel: parameters do not match architecture");
}

SegModel SegModel::init(const SegArch& arch, Rng& rng, bool zero_output_layer) {
  auto layout = arch.layout();
  ParamVector p(layout);
  for (const auto& seg : layout->segments()) {
    if (seg.shape.size() != 2) continue;  // biases start at zero
    if (zero_output_layer && seg.name == "w_out") continue;
    const double scale = 1.0 / std::sqrt(static_cast<double>(seg.shape[1]));
    for (std::size_t i = 0; i < seg.size; ++i) p[seg.offset + i] = scale * rng.normal();
  }
  return SegModel(arch, std::move(p));
}

Tensor SegModel::logits(const ParamVector& params, const Tensor& image) const {
  if (image.rank() != 2) throw StructuralError("SegModel::logits: image must be 2-D");
  const auto layers = dense_layers(arch_, *params.layout());
  std::vector<std::vector<double>> acts(layers.size());
  acts[0].resize(arch_.input_dim());
  for (std::size_t l = 1; l < layers.size(); ++l) acts[l].resize(layers[l - 1].out);
  const double context = image.mean();
  const double* p = params.data().data();
  Tensor out(image.shape(), 0.0);
  for (std::size_t y = 0; y < image.dim(0); ++y) {
    for (std::size_t x = 0; x < image.dim(1); ++x) {
      gather_patch(image, y, x, arch_, context, acts[0]);
      out.at(y, x) = forward_pixel(layers, p, acts);
    }
  }
  return out;
}

double bce_with_logits(const Tensor& logits, const Tensor& mask) {
  if (!same_shape(logits, mask)) throw StructuralError("bce_with_logits: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) s += bce(logits[i], mask[i]);
  return s / static_cast<double>(logits.size());
}

LossValue SegModel::loss(const ParamVector& params, std::span<const SampleRef> batch) const {
  if (batch.empty()) throw ValidationError("segmentation loss: empty batch");
  LossValue v;
  for (const auto& s : batch) {
    check_pair(s);
    v.per_sample.push_back(bce_with_logits(logits(params, *s.image), *s.mask));
  }
  for (double x : v.per_sample) v.loss += x;
  v.loss /= static_cast<double>(batch.size());
  return v;
}

LossGrad SegModel::loss_and_grad(const ParamVector& params, std::span<const SampleRef> batch) const {
  if (batch.empty()) throw ValidationError("segmentation loss: empty batch");
  if (!params.compatible(params_.layout())) throw StructuralError("SegModel: parameter layout mismatch");
  const auto layers = dense_layers(arch_, *params.layout());
  const std::size_t n_layers = layers.size();
  std::vector<std::vector<double>> acts(n_layers);
  std::vector<std::vector<double>> deltas(n_layers);
  acts[0].resize(arch_.input_dim());
  for (std::size_t l = 1; l < n_layers; ++l) {
    acts[l].resize(layers[l - 1].out);
    deltas[l].resize(layers[l - 1].out);
  }

  const double* p = params.data().data();
  LossGrad out{LossValue{}, GradVector(params.layout())};
  double* g = out.grad.data().data();
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  for (const auto& s : batch) {
    check_pair(s);
    const Tensor& image = *s.image;
    const Tensor& mask = *s.mask;
    const double context = image.mean();
    const double inv_pixels = 1.0 / static_cast<double>(image.size());
    const double scale = inv_pixels * inv_batch;
    double sample_loss = 0.0;

    for (std::size_t y = 0; y < image.dim(0); ++y) {
      for (std::size_t x = 0; x < image.dim(1); ++x) {
        gather_patch(image, y, x, arch_, context, acts[0]);
        const double z = forward_pixel(layers, p, acts);
        const double target = mask.at(y, x);
        sample_loss += bce(z, target);
        const double dz = (sigmoid(z) - target) * scale;

        const auto& last = layers.back();
        const auto& a_last = acts[n_layers - 1];
        g[last.b] += dz;
        for (std::size_t i = 0; i < last.in; ++i) g[last.w + i] += dz * a_last[i];
        if (n_layers == 1) continue;
        auto& d_top = deltas[n_layers - 1];
        for (std::size_t i = 0; i < last.in; ++i) d_top[i] = dz * p[last.w + i] * (1.0 - a_last[i] * a_last[i]);

        for (std::size_t l = n_layers - 1; l-- > 0;) {
          const auto& L = layers[l];
          const auto& d = deltas[l + 1];
          const auto& a_in = acts[l];
          for (std::size_t o = 0; o < L.out; ++o) {
            g[L.b + o] += d[o];
            double* grow = g + L.w + o * L.in;
            for (std::size_t i = 0; i < L.in; ++i) grow[i] += d[o] * a_in[i];
          }
          if (l == 0) break;
          auto& d_prev = deltas[l];
          for (std::size_t i = 0; i < L.in; ++i) {
            double s_back = 0.0;
            for (std::size_t o = 0; o < L.out; ++o) s_back += p[L.w + o * L.in + i] * d[o];
            d_prev[i] = s_back * (1.0 - a_in[i] * a_in[i]);
          }
        }
      }
    }
    out.value.per_sample.push_back(sample_loss * inv_pixels);
  }
  for (double x : out.value.per_sample) out.value.loss += x;
  out.value.loss *= inv_batch;
  return out;
}

LossGrad seg_loss_and_grad(const SegModel& model, std::span<const SampleRef> batch) {
  return model.loss_and_grad(model.params(), batch);
}

Tensor threshold_logits(const Tensor& logits) {
  Tensor out(logits.shape(), 0.0);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] > 0.0 ? 1.0 : 0.0;
  return out;
}

std::vector<Tensor> predict_masks(const SegModel& model, std::span<const Tensor> images) {
  std::vector<Tensor> out;
  out.reserve(images.size());
  for (const auto& im : images) out.push_back(threshold_logits(model.logits(im)));
  return out;
}

}  // namespace sitecl
