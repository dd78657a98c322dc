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
#include "sitecl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace sitecl {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) {
    if (d == 0) throw StructuralError("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size())
    throw StructuralError("Tensor: data length does not match shape");
}

double Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Tensor::mean() const { return data_.empty() ? 0.0 : sum() / static_cast<double>(data_.size()); }

bool Tensor::all_finite() const { return sitecl::all_finite(data_); }

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

Layout& Layout::add(std::string name, std::vector<std::size_t> shape) {
  for (const auto& s : segments_)
    if (s.name == name) throw StructuralError("Layout: duplicate segment '" + name + "'");
  Segment seg;
  seg.size = shape_product(shape);
  seg.offset = total_;
  seg.name = std::move(name);
  seg.shape = std::move(shape);
  total_ += seg.size;
  segments_.push_back(std::move(seg));
  return *this;
}

const Segment& Layout::segment(const std::string& name) const {
  for (const auto& s : segments_)
    if (s.name == name) return s;
  throw StructuralError("Layout: no segment named '" + name + "'");
}

namespace {

template <class A, class B>
void require_same_layout(const A& a, const B& b, const char* op) {
  if (!a.compatible(b.layout())) throw StructuralError(std::string(op) + ": layout mismatch");
}

GradVector zip(const GradVector& a, const GradVector& b, const std::function<double(double, double)>& f) {
  require_same_layout(a, b, "elementwise");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
  return GradVector(a.layout(), std::move(out));
}

}  // namespace

double dot(const GradVector& a, const GradVector& b) {
  require_same_layout(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const GradVector& a) { return std::sqrt(dot(a, a)); }

double cosine(const GradVector& a, const GradVector& b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw DegenerateInputError("cosine: zero-norm input");
  const double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

ParamVector axpy(double alpha, const GradVector& x, const ParamVector& y) {
  require_same_layout(x, y, "axpy");
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = y[i] + alpha * x[i];
  return ParamVector(y.layout(), std::move(out));
}

GradVector operator+(const GradVector& a, const GradVector& b) {
  return zip(a, b, [](double x, double y) { return x + y; });
}

GradVector operator-(const GradVector& a, const GradVector& b) {
  return zip(a, b, [](double x, double y) { return x - y; });
}

GradVector operator*(double s, const GradVector& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * a[i];
  return GradVector(a.layout(), std::move(out));
}

GradVector& operator+=(GradVector& a, const GradVector& b) {
  require_same_layout(a, b, "+=");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

}  // namespace sitecl
