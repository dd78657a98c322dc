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
#ifndef SITECL_VERIFY_HPP
#define SITECL_VERIFY_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace sitecl {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  /// Negative control: perturbs the analytic segmentation gradient.
  bool inject_gradient_bug = false;
};

/// Largest relative error between analytic and central-difference partials
/// over the given coordinates; the denominator is floored at 1e-6.
double max_fd_relative_error(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                             std::span<const double> analytic, std::span<const std::size_t> coords, double h);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

/// The fast invariant suite behind `sitecl verify`.
std::vector<CheckResult> run_verify(const VerifyOptions& opts = {});

}  // namespace sitecl

#endif  // SITECL_VERIFY_HPP
