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
#include "sitecl/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "sitecl/errors.hpp"

namespace sitecl {

namespace {

void require_binary_pair(const Tensor& a, const Tensor& b, const char* who) {
  if (!same_shape(a, b)) throw StructuralError(std::string(who) + ": shape mismatch");
  for (const Tensor* t : {&a, &b})
    for (double v : t->data())
      if (v != 0.0 && v != 1.0) throw ValidationError(std::string(who) + ": mask is not binary");
}

struct Pixel {
  long y;
  long x;
};

std::vector<Pixel> boundary(const Tensor& m) {
  const long h = static_cast<long>(m.dim(0));
  const long w = static_cast<long>(m.dim(1));
  auto fg = [&](long y, long x) {
    return y >= 0 && y < h && x >= 0 && x < w && m.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) > 0.5;
  };
  std::vector<Pixel> out;
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      if (fg(y, x) && (!fg(y - 1, x) || !fg(y + 1, x) || !fg(y, x - 1) || !fg(y, x + 1))) out.push_back({y, x});
  return out;
}

double mean_nearest(const std::vector<Pixel>& from, const std::vector<Pixel>& to, double spacing) {
  double total = 0.0;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) {
      const double dy = static_cast<double>(p.y - q.y);
      const double dx = static_cast<double>(p.x - q.x);
      best = std::min(best, dy * dy + dx * dx);
    }
    total += std::sqrt(best) * spacing;
  }
  return total / static_cast<double>(from.size());
}

void require_square(const AccuracyMatrix& r, const char* who) {
  if (r.n() < 2) throw ValidationError(std::string(who) + ": needs at least 2 sites");
  if (!r.complete()) throw ValidationError(std::string(who) + ": accuracy matrix is not fully populated");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

double dsc(const Tensor& pred, const Tensor& truth) {
  require_binary_pair(pred, truth, "dsc");
  double inter = 0.0, a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += pred[i] * truth[i];
    a += pred[i];
    b += truth[i];
  }
  if (a + b == 0.0) return 1.0;
  return 2.0 * inter / (a + b);
}

double asd(const Tensor& pred, const Tensor& truth, double spacing) {
  require_binary_pair(pred, truth, "asd");
  if (pred.rank() != 2) throw StructuralError("asd: masks must be 2-D");
  const auto bp = boundary(pred);
  const auto bt = boundary(truth);
  if (bp.empty() || bt.empty()) throw UndefinedMetricError("asd: empty mask");
  return 0.5 * (mean_nearest(bp, bt, spacing) + mean_nearest(bt, bp, spacing));
}

double mean_label_dsc(const Tensor& pred_labels, const Tensor& truth_labels, std::span<const int> labels) {
  if (!same_shape(pred_labels, truth_labels)) throw StructuralError("mean_label_dsc: shape mismatch");
  if (labels.empty()) throw ValidationError("mean_label_dsc: no labels");
  double total = 0.0;
  for (int label : labels) {
    Tensor p(pred_labels.shape()), t(truth_labels.shape());
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = pred_labels[i] == label ? 1.0 : 0.0;
      t[i] = truth_labels[i] == label ? 1.0 : 0.0;
    }
    total += dsc(p, t);
  }
  return total / static_cast<double>(labels.size());
}

AccuracyMatrix::AccuracyMatrix(std::vector<int> site_ids)
    : ids_(std::move(site_ids)),
      r_(ids_.size() * ids_.size(), std::numeric_limits<double>::quiet_NaN()),
      written_(ids_.size(), false) {}

void AccuracyMatrix::set_row(std::size_t i, std::span<const double> values) {
  if (i >= n()) throw ValidationError("AccuracyMatrix: row index out of range");
  if (values.size() != n()) throw StructuralError("AccuracyMatrix: row length mismatch");
  if (written_[i]) throw ValidationError("AccuracyMatrix: row " + std::to_string(i) + " already written");
  for (std::size_t j = 0; j < n(); ++j) r_[i * n() + j] = values[j];
  written_[i] = true;
}

bool AccuracyMatrix::complete() const {
  for (bool w : written_)
    if (!w) return false;
  return true;
}

std::vector<double> AccuracyMatrix::row(std::size_t i) const {
  return std::vector<double>(r_.begin() + static_cast<long>(i * n()), r_.begin() + static_cast<long>((i + 1) * n()));
}

AccuracyMatrix AccuracyMatrix::from_rows(std::vector<int> site_ids, const std::vector<std::vector<double>>& rows) {
  AccuracyMatrix m(std::move(site_ids));
  if (rows.size() != m.n()) throw StructuralError("AccuracyMatrix: row count mismatch");
  for (std::size_t i = 0; i < rows.size(); ++i) m.set_row(i, rows[i]);
  return m;
}

double bwt(const AccuracyMatrix& r) {
  require_square(r, "bwt");
  const std::size_t n = r.n();
  double total = 0.0;
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) total += 1.0 - std::abs(std::min(r(i, j) - r(j, j), 0.0));
  return 2.0 * total / static_cast<double>(n * (n - 1));
}

double fwt(const AccuracyMatrix& r) {
  require_square(r, "fwt");
  const std::size_t n = r.n();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) total += r(i, j);
  return total / static_cast<double>(n * (n - 1) / 2);
}

double bwt_plus(const AccuracyMatrix& r) {
  require_square(r, "bwt_plus");
  const std::size_t n = r.n();
  double total = 0.0;
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) total += std::max(r(i, j) - r(j, j), 0.0);
  return 2.0 * total / static_cast<double>(n * (n - 1));
}

void write_matrix_csv(const AccuracyMatrix& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "round";
  for (int id : r.site_ids()) out << ',' << id;
  out << '\n';
  for (std::size_t i = 0; i < r.n(); ++i) {
    out << r.site_ids()[i];
    for (std::size_t j = 0; j < r.n(); ++j) out << ',' << format_double(r(i, j));
    out << '\n';
  }
}

AccuracyMatrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<int> ids;
  {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    if (cell != "round") throw ValidationError(path.string() + ": bad matrix header");
    while (std::getline(ss, cell, ',')) ids.push_back(std::stoi(cell));
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return AccuracyMatrix::from_rows(std::move(ids), rows);
}

MatrixSummary summarize(const AccuracyMatrix& r, bool distance_valued) {
  MatrixSummary s;
  const auto last = r.row(r.n() - 1);
  double total = 0.0;
  for (double v : last) total += v;
  s.overall_mean = total / static_cast<double>(last.size());
  if (r.n() >= 2) {
    s.fwt = fwt(r);
    if (distance_valued)
      s.bwt_plus = bwt_plus(r);
    else
      s.bwt = bwt(r);
  }
  return s;
}

nlohmann::json to_json(const MatrixSummary& s) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"overall_mean", s.overall_mean}, {"bwt", opt(s.bwt)}, {"fwt", opt(s.fwt)}, {"bwt_plus", opt(s.bwt_plus)}};
}

}  // namespace sitecl
