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
#ifndef SITECL_SYNTH_SITES_HPP
#define SITECL_SYNTH_SITES_HPP

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "sitecl/rng.hpp"
#include "sitecl/tensor.hpp"

namespace sitecl {

/// Appearance parameters of one acquisition site.
struct SiteStyle {
  int site_id = 0;
  double intensity_gain = 1.0;
  double intensity_bias = 0.0;
  double noise_sigma = 0.0;
  double texture_freq = 0.0;
  /// Amplitude of the sin-pattern texture before gain is applied.
  double texture_amp = 0.15;

  void validate() const;
  bool operator==(const SiteStyle&) const = default;
};

/// Pre-gain intensities of the rendered shape.
inline constexpr double kForegroundLevel = 0.5;
inline constexpr double kBackgroundLevel = -0.5;

enum class Split { kTrain, kVal, kTest, kAll };
std::string to_string(Split s);
Split parse_split(const std::string& s);

/// Image/mask pairs of one site. Masks are {0, 1}; images lie in [-1, 1].
struct SiteDataset {
  int site_id = 0;
  Split split = Split::kAll;
  SiteStyle style;
  std::vector<Tensor> images;
  std::vector<Tensor> masks;
  /// Index of each sample in the dataset it was split from.
  std::vector<std::size_t> source_index;

  std::size_t size() const { return images.size(); }
  std::size_t height() const { return images.empty() ? 0 : images.front().dim(0); }
  std::size_t width() const { return images.empty() ? 0 : images.front().dim(1); }
  void check_invariants() const;
};

/// Non-owning view of one labeled sample.
struct SampleRef {
  const Tensor* image = nullptr;
  const Tensor* mask = nullptr;
  int site_id = 0;
};

std::vector<SampleRef> refs(const SiteDataset& d);

SiteDataset make_site(const SiteStyle& style, std::size_t n_samples, std::pair<std::size_t, std::size_t> hw, Rng rng);

struct SplitFractions {
  double train = 0.60;
  double val = 0.15;
  double test = 0.25;
};

/// Largest-remainder apportionment of n items over the fractions.
std::array<std::size_t, 3> apportion(std::size_t n, const SplitFractions& f);

struct DatasetSplits {
  SiteDataset train;
  SiteDataset val;
  SiteDataset test;
};

DatasetSplits split_dataset(const SiteDataset& d, const SplitFractions& f, Rng rng);

/// Indices into the union (incoming first, then replay) of the two halves.
struct VirtualSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct VirtualSplitPolicy {
  double train_fraction = 0.5;
  /// Split incoming and replay separately so both halves see both sources.
  bool stratified = false;
};

VirtualSplit virtual_split(std::size_t n_incoming, std::size_t n_replay, Rng& rng, const VirtualSplitPolicy& policy = {});

/// One site of the stream with its three splits.
struct SiteData {
  SiteStyle style;
  DatasetSplits splits;
};

struct SiteStream {
  std::vector<SiteData> sequence;
  std::vector<SiteData> unseen;

  void validate() const;
};

struct StreamSpec {
  std::vector<SiteStyle> sequence;
  std::vector<SiteStyle> unseen;
  std::size_t samples_per_site = 200;
  std::size_t height = 16;
  std::size_t width = 16;
  SplitFractions fractions;
  std::uint64_t seed = 0;
};

SiteStream make_stream(const StreamSpec& spec);

/// The default 4-site sequence plus one unseen site.
StreamSpec default_stream_spec(std::uint64_t seed);

}  // namespace sitecl

#endif  // SITECL_SYNTH_SITES_HPP
