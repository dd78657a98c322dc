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
#ifndef SITECL_METRICS_HPP
#define SITECL_METRICS_HPP

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sitecl/tensor.hpp"

namespace sitecl {

/// 2|A n B| / (|A| + |B|); two empty masks score 1.
double dsc(const Tensor& pred, const Tensor& truth);

/// Symmetric average surface distance. Boundary pixels are foreground pixels
/// with at least one background 4-neighbor (outside the image counts as
/// background). Throws UndefinedMetricError if either mask is empty.
double asd(const Tensor& pred, const Tensor& truth, double spacing = 1.0);

/// Per-label DSC averaged over the given labels of two label maps.
double mean_label_dsc(const Tensor& pred_labels, const Tensor& truth_labels, std::span<const int> labels);

/// R(i, j): score on site j after training round i (0-based in code).
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  explicit AccuracyMatrix(std::vector<int> site_ids);

  std::size_t n() const { return ids_.size(); }
  const std::vector<int>& site_ids() const { return ids_; }

  double operator()(std::size_t i, std::size_t j) const { return r_.at(i * n() + j); }
  /// Writes row i; a row can be written only once.
  void set_row(std::size_t i, std::span<const double> values);
  bool row_written(std::size_t i) const { return written_.at(i); }
  bool complete() const;
  std::vector<double> row(std::size_t i) const;

  /// Builds a fully populated matrix from row-major values.
  static AccuracyMatrix from_rows(std::vector<int> site_ids, const std::vector<std::vector<double>>& rows);

 private:
  std::vector<int> ids_;
  std::vector<double> r_;
  std::vector<bool> written_;
};

/// Mean over the strict lower triangle of 1 - |min(R(i,j) - R(j,j), 0)|.
double bwt(const AccuracyMatrix& r);
/// Mean of the strict upper triangle.
double fwt(const AccuracyMatrix& r);
/// Mean over the strict lower triangle of max(R(i,j) - R(j,j), 0), for distance-valued matrices.
double bwt_plus(const AccuracyMatrix& r);

/// CSV with a header row "round,<site ids...>" and one row per training round.
void write_matrix_csv(const AccuracyMatrix& r, const std::filesystem::path& path);
AccuracyMatrix read_matrix_csv(const std::filesystem::path& path);

struct MatrixSummary {
  double overall_mean = 0.0;
  std::optional<double> bwt;
  std::optional<double> fwt;
  std::optional<double> bwt_plus;
};

/// BWT/FWT are left empty for n < 2; bwt_plus only when distance_valued.
MatrixSummary summarize(const AccuracyMatrix& r, bool distance_valued);
nlohmann::json to_json(const MatrixSummary& s);

}  // namespace sitecl

#endif  // SITECL_METRICS_HPP
