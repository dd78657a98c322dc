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
#ifndef SITECL_LOSS_HPP
#define SITECL_LOSS_HPP

#include <vector>

#include "sitecl/tensor.hpp"

namespace sitecl {

/// Scalar loss with its per-sample components; loss is their mean.
struct LossValue {
  double loss = 0.0;
  std::vector<double> per_sample;
};

struct LossGrad {
  LossValue value;
  GradVector grad;
};

}  // namespace sitecl

#endif  // SITECL_LOSS_HPP
