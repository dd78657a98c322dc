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
#ifndef SITECL_OBJECTIVE_HPP
#define SITECL_OBJECTIVE_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "sitecl/loss.hpp"
#include "sitecl/seg_model.hpp"
#include "sitecl/synth_sites.hpp"
#include "sitecl/tensor.hpp"

namespace sitecl {

/// A differentiable loss over a fixed pool of samples. Batches are index
/// lists into the pool; the batch loss is the mean of per-sample losses.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::size_t pool_size() const = 0;
  virtual LayoutPtr layout() const = 0;
  virtual LossGrad evaluate(const ParamVector& theta, std::span<const std::size_t> ids) const = 0;
  virtual double loss(const ParamVector& theta, std::span<const std::size_t> ids) const {
    return evaluate(theta, ids).value.loss;
  }
};

/// Segmentation BCE over a pool of labeled samples.
class SegObjective final : public Objective {
 public:
  SegObjective(const SegModel& model, std::vector<SampleRef> pool);

  std::size_t pool_size() const override { return pool_.size(); }
  LayoutPtr layout() const override { return model_.params().layout(); }
  LossGrad evaluate(const ParamVector& theta, std::span<const std::size_t> ids) const override;
  double loss(const ParamVector& theta, std::span<const std::size_t> ids) const override;

 private:
  std::vector<SampleRef> gather(std::span<const std::size_t> ids) const;

  const SegModel& model_;
  std::vector<SampleRef> pool_;
};

/// Sample i contributes 0.5 (theta - c_i)^T A_i (theta - c_i). Hessians are
/// known in closed form, which makes this the reference problem for HVP and
/// alignment checks.
class QuadraticObjective final : public Objective {
 public:
  struct Term {
    std::vector<double> a;  // row-major dim x dim, symmetric
    std::vector<double> center;
  };

  QuadraticObjective(std::size_t dim, std::vector<Term> terms);

  std::size_t dim() const { return dim_; }
  std::size_t pool_size() const override { return terms_.size(); }
  LayoutPtr layout() const override { return layout_; }
  LossGrad evaluate(const ParamVector& theta, std::span<const std::size_t> ids) const override;

  /// Mean of A_i over the batch.
  std::vector<double> hessian(std::span<const std::size_t> ids) const;
  const Term& term(std::size_t i) const { return terms_.at(i); }

 private:
  std::size_t dim_;
  std::vector<Term> terms_;
  LayoutPtr layout_;
};

}  // namespace sitecl

#endif  // SITECL_OBJECTIVE_HPP
