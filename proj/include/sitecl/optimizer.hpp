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
#ifndef SITECL_OPTIMIZER_HPP
#define SITECL_OPTIMIZER_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sitecl {

enum class OptimizerKind { kSgd, kAdam };

OptimizerKind parse_optimizer_kind(const std::string& s);
std::string to_string(OptimizerKind k);

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First-order update rule applied in place to a flat buffer.
/// Adam keeps its moment estimates here, so one instance per parameter set.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, AdamParams adam = {});

  void step(std::span<double> params, std::span<const double> grad);

  OptimizerKind kind() const { return kind_; }
  double lr() const { return lr_; }
  std::size_t steps() const { return t_; }

 private:
  OptimizerKind kind_;
  double lr_;
  AdamParams adam_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

}  // namespace sitecl

#endif  // SITECL_OPTIMIZER_HPP
