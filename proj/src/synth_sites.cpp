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
#include "sitecl/synth_sites.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "sitecl/errors.hpp"

namespace sitecl {

void SiteStyle::validate() const {
  for (double v : {intensity_gain, intensity_bias, noise_sigma, texture_freq, texture_amp})
    if (!std::isfinite(v)) throw ValidationError("SiteStyle: non-finite parameter for site " + std::to_string(site_id));
  if (noise_sigma < 0.0) throw ValidationError("SiteStyle: noise_sigma must be >= 0");
}

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kAll: return "all";
  }
  return "all";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  if (s == "all") return Split::kAll;
  throw ValidationError("unknown split '" + s + "'");
}

void SiteDataset::check_invariants() const {
  if (images.size() != masks.size()) throw StructuralError("SiteDataset: images and masks differ in count");
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!same_shape(images[i], masks[i])) throw StructuralError("SiteDataset: image/mask shape mismatch");
    for (double v : images[i].data())
      if (!(v >= -1.0 && v <= 1.0)) throw ValidationError("SiteDataset: intensity outside [-1, 1]");
    for (double m : masks[i].data())
      if (m != 0.0 && m != 1.0) throw ValidationError("SiteDataset: mask is not binary");
  }
}

std::vector<SampleRef> refs(const SiteDataset& d) {
  std::vector<SampleRef> out;
  out.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) out.push_back({&d.images[i], &d.masks[i], d.site_id});
  return out;
}

namespace {

Tensor render_ellipse_mask(std::size_t h, std::size_t w, Rng& rng) {
  const double H = static_cast<double>(h);
  const double W = static_cast<double>(w);
  const double cy = (0.3 + 0.4 * rng.uniform()) * (H - 1.0);
  const double cx = (0.3 + 0.4 * rng.uniform()) * (W - 1.0);
  const double ry = (0.15 + 0.2 * rng.uniform()) * H;
  const double rx = (0.15 + 0.2 * rng.uniform()) * W;
  const double angle = std::numbers::pi * rng.uniform();
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  Tensor mask({h, w}, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double dy = static_cast<double>(y) - cy;
      const double dx = static_cast<double>(x) - cx;
      const double u = (dx * ca + dy * sa) / rx;
      const double v = (-dx * sa + dy * ca) / ry;
      if (u * u + v * v <= 1.0) mask.at(y, x) = 1.0;
    }
  }
  // Guarantee a non-empty foreground.
  mask.at(static_cast<std::size_t>(std::lround(cy)), static_cast<std::size_t>(std::lround(cx))) = 1.0;
  return mask;
}

SiteDataset subset(const SiteDataset& d, const std::vector<std::size_t>& idx, Split split) {
  SiteDataset out;
  out.site_id = d.site_id;
  out.split = split;
  out.style = d.style;
  for (auto i : idx) {
    out.images.push_back(d.images[i]);
    out.masks.push_back(d.masks[i]);
    out.source_index.push_back(d.source_index.empty() ? i : d.source_index[i]);
  }
  return out;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

SiteDataset make_site(const SiteStyle& style, std::size_t n_samples, std::pair<std::size_t, std::size_t> hw, Rng rng) {
  style.validate();
  const auto [h, w] = hw;
  if (n_samples < 1) throw ValidationError("make_site: n_samples must be >= 1");
  if (h < 8 || w < 8) throw ValidationError("make_site: image size must be at least 8x8");

  SiteDataset d;
  d.site_id = style.site_id;
  d.style = style;
  d.split = Split::kAll;
  for (std::size_t n = 0; n < n_samples; ++n) {
    Rng sample_rng = rng.split({static_cast<std::uint64_t>(n)});
    Tensor mask = render_ellipse_mask(h, w, sample_rng);
    const double phase_y = 2.0 * std::numbers::pi * sample_rng.uniform();
    const double phase_x = 2.0 * std::numbers::pi * sample_rng.uniform();
    Tensor image({h, w}, 0.0);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double base = mask.at(y, x) > 0.5 ? kForegroundLevel : kBackgroundLevel;
        double texture = 0.0;
        if (style.texture_freq != 0.0)
          texture = style.texture_amp * std::sin(style.texture_freq * static_cast<double>(x) + phase_x) *
                    std::sin(style.texture_freq * static_cast<double>(y) + phase_y);
        double v = style.intensity_gain * (base + texture) + style.intensity_bias;
        if (style.noise_sigma > 0.0) v += style.noise_sigma * sample_rng.normal();
        image.at(y, x) = std::clamp(v, -1.0, 1.0);
      }
    }
    d.images.push_back(std::move(image));
    d.masks.push_back(std::move(mask));
    d.source_index.push_back(n);
  }
  return d;
}

std::array<std::size_t, 3> apportion(std::size_t n, const SplitFractions& f) {
  const std::array<double, 3> fr{f.train, f.val, f.test};
  double total = 0.0;
  for (double x : fr) {
    if (!(x > 0.0) || !std::isfinite(x)) throw ValidationError("split fractions must be positive");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("split fractions must sum to 1");

  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = fr[i] * static_cast<double>(n);
    // Guard against 0.6 * 100 = 59.999999...
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % 3]];
  return counts;
}

DatasetSplits split_dataset(const SiteDataset& d, const SplitFractions& f, Rng rng) {
  if (d.size() < 3) throw ValidationError("split_dataset: need at least 3 samples");
  const auto counts = apportion(d.size(), f);
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  shuffle(idx, rng);
  std::vector<std::size_t> a(idx.begin(), idx.begin() + counts[0]);
  std::vector<std::size_t> b(idx.begin() + counts[0], idx.begin() + counts[0] + counts[1]);
  std::vector<std::size_t> c(idx.begin() + counts[0] + counts[1], idx.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::sort(c.begin(), c.end());
  return {subset(d, a, Split::kTrain), subset(d, b, Split::kVal), subset(d, c, Split::kTest)};
}

VirtualSplit virtual_split(std::size_t n_incoming, std::size_t n_replay, Rng& rng, const VirtualSplitPolicy& policy) {
  const std::size_t n = n_incoming + n_replay;
  if (n < 2) throw DegenerateInputError("virtual_split: union must contain at least 2 samples");
  if (!(policy.train_fraction > 0.0 && policy.train_fraction < 1.0))
    throw ValidationError("virtual_split: train_fraction must lie in (0, 1)");

  auto take = [&](std::size_t count) {
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(policy.train_fraction * static_cast<double>(count))),
                                   1, count - 1);
  };

  VirtualSplit out;
  auto split_range = [&](std::size_t begin, std::size_t count, std::size_t n_train) {
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), begin);
    shuffle(idx, rng);
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + n_train);
    out.test.insert(out.test.end(), idx.begin() + n_train, idx.end());
  };

  if (policy.stratified && n_incoming >= 2 && n_replay >= 2) {
    split_range(0, n_incoming, take(n_incoming));
    split_range(n_incoming, n_replay, take(n_replay));
  } else {
    split_range(0, n, take(n));
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

void SiteStream::validate() const {
  std::set<int> seen;
  for (const auto& s : sequence)
    if (!seen.insert(s.style.site_id).second)
      throw ValidationError("SiteStream: site " + std::to_string(s.style.site_id) + " appears twice");
  for (const auto& s : unseen)
    if (!seen.insert(s.style.site_id).second)
      throw ValidationError("SiteStream: unseen site " + std::to_string(s.style.site_id) + " overlaps the sequence");
}

SiteStream make_stream(const StreamSpec& spec) {
  for (std::size_t i = 0; i < spec.sequence.size(); ++i)
    for (std::size_t j = i + 1; j < spec.sequence.size(); ++j)
      if (spec.sequence[i].intensity_gain == spec.sequence[j].intensity_gain &&
          spec.sequence[i].intensity_bias == spec.sequence[j].intensity_bias)
        throw ValidationError("make_stream: sites must differ in (gain, bias)");
  Rng root(spec.seed);
  auto build = [&](const SiteStyle& style) {
    const auto tag = static_cast<std::uint64_t>(style.site_id);
    SiteDataset all = make_site(style, spec.samples_per_site, {spec.height, spec.width}, root.split({1, tag}));
    return SiteData{style, split_dataset(all, spec.fractions, root.split({2, tag}))};
  };
  SiteStream stream;
  for (const auto& s : spec.sequence) stream.sequence.push_back(build(s));
  for (const auto& s : spec.unseen) stream.unseen.push_back(build(s));
  stream.validate();
  return stream;
}

StreamSpec default_stream_spec(std::uint64_t seed) {
  StreamSpec spec;
  spec.seed = seed;
  spec.sequence = {
      {1, 1.0, 0.0, 0.10, 0.0, 0.15},
      {2, 0.6, 0.45, 0.10, 0.8, 0.15},
      {3, 0.6, -0.45, 0.10, 1.6, 0.15},
      {4, -0.7, 0.1, 0.12, 0.4, 0.15},
  };
  spec.unseen = {{5, 0.4, -0.3, 0.15, 2.0, 0.15}};
  return spec;
}

}  // namespace sitecl
