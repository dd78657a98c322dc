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
#include "sitecl/objective.hpp"

namespace sitecl {

SegObjective::SegObjective(const SegModel& model, std::vector<SampleRef> pool) : model_(model), pool_(std::move(pool)) {}

std::vector<SampleRef> SegObjective::gather(std::span<const std::size_t> ids) const {
  std::vector<SampleRef> batch;
  batch.reserve(ids.size());
  for (auto i : ids) batch.push_back(pool_.at(i));
  return batch;
}

LossGrad SegObjective::evaluate(const ParamVector& theta, std::span<const std::size_t> ids) const {
  const auto batch = gather(ids);
  return model_.loss_and_grad(theta, batch);
}

double SegObjective::loss(const ParamVector& theta, std::span<const std::size_t> ids) const {
  const auto batch = gather(ids);
  return model_.loss(theta, batch).loss;
}

QuadraticObjective::QuadraticObjective(std::size_t dim, std::vector<Term> terms) : dim_(dim), terms_(std::move(terms)) {
  for (const auto& t : terms_)
    if (t.a.size() != dim_ * dim_ || t.center.size() != dim_)
      throw StructuralError("QuadraticObjective: term dimensions do not match");
  auto l = std::make_shared<Layout>();
  l->add("theta", {dim_});
  layout_ = l;
}

LossGrad QuadraticObjective::evaluate(const ParamVector& theta, std::span<const std::size_t> ids) const {
  if (ids.empty()) throw ValidationError("QuadraticObjective: empty batch");
  LossGrad out{LossValue{}, GradVector(layout_)};
  std::vector<double> diff(dim_);
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (auto id : ids) {
    const auto& t = terms_.at(id);
    for (std::size_t i = 0; i < dim_; ++i) diff[i] = theta[i] - t.center[i];
    double l = 0.0;
    for (std::size_t r = 0; r < dim_; ++r) {
      double ad = 0.0;
      for (std::size_t c = 0; c < dim_; ++c) ad += t.a[r * dim_ + c] * diff[c];
      l += 0.5 * diff[r] * ad;
      out.grad[r] += inv * ad;
    }
    out.value.per_sample.push_back(l);
    out.value.loss += inv * l;
  }
  return out;
}

std::vector<double> QuadraticObjective::hessian(std::span<const std::size_t> ids) const {
  std::vector<double> h(dim_ * dim_, 0.0);
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (auto id : ids)
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += inv * terms_.at(id).a[i];
  return h;
}

}  // namespace sitecl
