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
#ifndef SITECL_TENSOR_HPP
#define SITECL_TENSOR_HPP

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sitecl/errors.hpp"

namespace sitecl {

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  double sum() const;
  double mean() const;
  bool all_finite() const;

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);
bool same_shape(const Tensor& a, const Tensor& b);

/// One named block of a flat parameter buffer.
struct Segment {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;

  bool operator==(const Segment&) const = default;
};

/// Ordered partition of a flat buffer into named segments.
class Layout {
 public:
  Layout() = default;
  /// Appends a segment after the last one.
  Layout& add(std::string name, std::vector<std::size_t> shape);

  const std::vector<Segment>& segments() const { return segments_; }
  const Segment& segment(const std::string& name) const;
  std::size_t total() const { return total_; }

  bool operator==(const Layout&) const = default;

 private:
  std::vector<Segment> segments_;
  std::size_t total_ = 0;
};

using LayoutPtr = std::shared_ptr<const Layout>;

struct ParamTag {};
struct GradTag {};

/// Flat vector over a shared Layout. The tag keeps parameters and gradients
/// from being mixed up at compile time; convert explicitly with retag().
template <class Tag>
class FlatVector {
 public:
  FlatVector() = default;
  explicit FlatVector(LayoutPtr layout)
      : layout_(std::move(layout)), data_(layout_ ? layout_->total() : 0, 0.0) {}
  FlatVector(LayoutPtr layout, std::vector<double> data)
      : layout_(std::move(layout)), data_(std::move(data)) {
    if (!layout_ || layout_->total() != data_.size())
      throw StructuralError("FlatVector: buffer length does not match layout");
  }

  const LayoutPtr& layout() const { return layout_; }
  std::size_t size() const { return data_.size(); }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> segment(const std::string& name) {
    const auto& s = layout_->segment(name);
    return std::span<double>(data_).subspan(s.offset, s.size);
  }
  std::span<const double> segment(const std::string& name) const {
    const auto& s = layout_->segment(name);
    return std::span<const double>(data_).subspan(s.offset, s.size);
  }

  bool compatible(const LayoutPtr& other) const {
    return layout_ == other || (layout_ && other && *layout_ == *other);
  }

  template <class Other>
  FlatVector<Other> retag() const {
    return FlatVector<Other>(layout_, data_);
  }

  bool operator==(const FlatVector& o) const { return compatible(o.layout_) && data_ == o.data_; }

 private:
  LayoutPtr layout_;
  std::vector<double> data_;
};

using ParamVector = FlatVector<ParamTag>;
using GradVector = FlatVector<GradTag>;

double dot(const GradVector& a, const GradVector& b);
double norm(const GradVector& a);
double cosine(const GradVector& a, const GradVector& b);
/// y + alpha * x; neither input is modified.
ParamVector axpy(double alpha, const GradVector& x, const ParamVector& y);

GradVector operator+(const GradVector& a, const GradVector& b);
GradVector operator-(const GradVector& a, const GradVector& b);
GradVector operator*(double s, const GradVector& a);
GradVector& operator+=(GradVector& a, const GradVector& b);

bool all_finite(std::span<const double> v);

}  // namespace sitecl

#endif  // SITECL_TENSOR_HPP
