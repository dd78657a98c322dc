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
#include "sitecl/storage.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sitecl/errors.hpp"

namespace sitecl {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "storage assumes a little-endian host");

namespace {

constexpr char kDatasetMagic[8] = {'S', 'C', 'L', 'D', 'S', 'E', 'T', '1'};
constexpr std::uint32_t kFormatVersion = 1;

fs::path with_ext(const fs::path& stem, const char* ext) {
  fs::path p = stem;
  p += ext;
  return p;
}

std::vector<unsigned char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return json::parse(in);
}

void write_json(const fs::path& p, const json& j) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

template <class T>
void put(std::vector<unsigned char>& buf, T v) {
  unsigned char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.insert(buf.end(), raw, raw + sizeof(T));
}

template <class T>
T get(const std::vector<unsigned char>& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw ValidationError("truncated binary container");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::vector<unsigned char> doubles_to_bytes(std::span<const double> v) {
  std::vector<unsigned char> out(v.size() * sizeof(double));
  std::memcpy(out.data(), v.data(), out.size());
  return out;
}

}  // namespace

std::string checksum_hex(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string checksum_hex(std::span<const double> values) { return checksum_hex(doubles_to_bytes(values)); }

json to_json(const SiteStyle& s) {
  return {{"site_id", s.site_id},           {"intensity_gain", s.intensity_gain}, {"intensity_bias", s.intensity_bias},
          {"noise_sigma", s.noise_sigma},   {"texture_freq", s.texture_freq},     {"texture_amp", s.texture_amp}};
}

SiteStyle style_from_json(const json& j) {
  SiteStyle s;
  s.site_id = j.at("site_id").get<int>();
  s.intensity_gain = j.value("intensity_gain", s.intensity_gain);
  s.intensity_bias = j.value("intensity_bias", s.intensity_bias);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.texture_freq = j.value("texture_freq", s.texture_freq);
  s.texture_amp = j.value("texture_amp", s.texture_amp);
  s.validate();
  return s;
}

void write_dataset(const SiteDataset& d, const fs::path& stem, std::uint64_t seed) {
  d.check_invariants();
  const std::uint32_t n = static_cast<std::uint32_t>(d.size());
  const std::uint32_t h = static_cast<std::uint32_t>(d.height());
  const std::uint32_t w = static_cast<std::uint32_t>(d.width());
  std::vector<unsigned char> buf(kDatasetMagic, kDatasetMagic + 8);
  put(buf, kFormatVersion);
  put(buf, n);
  put(buf, h);
  put(buf, w);
  for (const auto& im : d.images)
    for (double v : im.data()) put(buf, v);
  for (const auto& m : d.masks)
    for (double v : m.data()) buf.push_back(v > 0.5 ? 1 : 0);
  for (auto idx : d.source_index) put(buf, static_cast<std::uint64_t>(idx));
  write_bytes(with_ext(stem, ".bin"), buf);

  json side = {{"format", "sitecl-dataset"},
               {"version", kFormatVersion},
               {"site_id", d.site_id},
               {"split", to_string(d.split)},
               {"count", n},
               {"height", h},
               {"width", w},
               {"style", to_json(d.style)},
               {"seed", seed},
               {"binary", with_ext(stem, ".bin").filename().string()},
               {"checksum", checksum_hex(buf)}};
  write_json(with_ext(stem, ".json"), side);
}

SiteDataset read_dataset(const fs::path& stem) {
  const json side = read_json(with_ext(stem, ".json"));
  const auto buf = read_bytes(with_ext(stem, ".bin"));
  if (checksum_hex(buf) != side.at("checksum").get<std::string>())
    throw ValidationError(stem.string() + ": checksum mismatch");
  if (buf.size() < 8 || !std::equal(kDatasetMagic, kDatasetMagic + 8, buf.begin()))
    throw ValidationError(stem.string() + ": not a dataset container");
  std::size_t pos = 8;
  if (get<std::uint32_t>(buf, pos) != kFormatVersion) throw ValidationError(stem.string() + ": unsupported version");
  const auto n = get<std::uint32_t>(buf, pos);
  const auto h = get<std::uint32_t>(buf, pos);
  const auto w = get<std::uint32_t>(buf, pos);
  SiteDataset d;
  d.site_id = side.at("site_id").get<int>();
  d.split = parse_split(side.at("split").get<std::string>());
  d.style = style_from_json(side.at("style"));
  for (std::uint32_t i = 0; i < n; ++i) {
    Tensor im({h, w});
    for (std::size_t p = 0; p < im.size(); ++p) im[p] = get<double>(buf, pos);
    d.images.push_back(std::move(im));
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    Tensor m({h, w});
    for (std::size_t p = 0; p < m.size(); ++p) m[p] = static_cast<double>(get<std::uint8_t>(buf, pos));
    d.masks.push_back(std::move(m));
  }
  for (std::uint32_t i = 0; i < n; ++i) d.source_index.push_back(static_cast<std::size_t>(get<std::uint64_t>(buf, pos)));
  d.check_invariants();
  return d;
}

void write_checkpoint(const fs::path& stem, const std::string& kind, const json& arch, const ParamVector& params) {
  const auto bytes = doubles_to_bytes(params.data());
  write_bytes(with_ext(stem, ".bin"), bytes);
  json layout = json::array();
  for (const auto& s : params.layout()->segments())
    layout.push_back({{"name", s.name}, {"shape", s.shape}, {"offset", s.offset}, {"size", s.size}});
  write_json(with_ext(stem, ".json"), {{"format", "sitecl-checkpoint"},
                                       {"version", kFormatVersion},
                                       {"kind", kind},
                                       {"arch", arch},
                                       {"layout", layout},
                                       {"scalars", params.size()},
                                       {"binary", with_ext(stem, ".bin").filename().string()},
                                       {"checksum", checksum_hex(bytes)}});
}

Checkpoint read_checkpoint(const fs::path& stem) {
  const json meta = read_json(with_ext(stem, ".json"));
  if (meta.value("format", "") != "sitecl-checkpoint" || meta.value("version", 0u) != kFormatVersion)
    throw ValidationError(stem.string() + ": unsupported checkpoint");
  const auto bytes = read_bytes(with_ext(stem, ".bin"));
  if (checksum_hex(bytes) != meta.at("checksum").get<std::string>())
    throw ValidationError(stem.string() + ": checksum mismatch");
  auto layout = std::make_shared<Layout>();
  for (const auto& s : meta.at("layout")) layout->add(s.at("name"), s.at("shape").get<std::vector<std::size_t>>());
  if (bytes.size() != layout->total() * sizeof(double)) throw ValidationError(stem.string() + ": size mismatch");
  std::vector<double> data(layout->total());
  std::memcpy(data.data(), bytes.data(), bytes.size());
  return {meta.at("kind"), meta.at("arch"), ParamVector(layout, std::move(data))};
}

json to_json(const SegArch& a) {
  return {{"patch", a.patch}, {"hidden", a.hidden}, {"context_mean", a.context_mean}};
}

SegArch seg_arch_from_json(const json& j) {
  SegArch a;
  a.patch = j.value("patch", a.patch);
  a.hidden = j.value("hidden", a.hidden);
  a.context_mean = j.value("context_mean", a.context_mean);
  return a;
}

json to_json(const DenoiserArch& a) {
  return {{"height", a.height},     {"width", a.width},           {"time_dim", a.time_dim},
          {"hidden", a.hidden},     {"mod_hidden", a.mod_hidden}};
}

DenoiserArch denoiser_arch_from_json(const json& j) {
  DenoiserArch a;
  a.height = j.value("height", a.height);
  a.width = j.value("width", a.width);
  a.time_dim = j.value("time_dim", a.time_dim);
  a.hidden = j.value("hidden", a.hidden);
  a.mod_hidden = j.value("mod_hidden", a.mod_hidden);
  return a;
}

void save_seg_model(const SegModel& m, const fs::path& stem) {
  write_checkpoint(stem, "segmentation", to_json(m.arch()), m.params());
}

SegModel load_seg_model(const fs::path& stem) {
  auto c = read_checkpoint(stem);
  if (c.kind != "segmentation") throw ValidationError(stem.string() + ": not a segmentation checkpoint");
  return SegModel(seg_arch_from_json(c.arch), std::move(c.params));
}

void save_denoiser(const DenoiserModel& m, const fs::path& stem) {
  write_checkpoint(stem, "denoiser", to_json(m.arch()), m.params());
}

DenoiserModel load_denoiser(const fs::path& stem) {
  auto c = read_checkpoint(stem);
  if (c.kind != "denoiser") throw ValidationError(stem.string() + ": not a denoiser checkpoint");
  return DenoiserModel(denoiser_arch_from_json(c.arch), std::move(c.params));
}

json to_json(const PromptEmbedding& p) {
  return {{"site_id", p.site_id},
          {"dimension", p.vector.size()},
          {"scalars", p.vector},
          {"frozen", p.frozen},
          {"checksum", checksum_hex(std::span<const double>(p.vector))}};
}

PromptEmbedding prompt_from_json(const json& j) {
  PromptEmbedding p;
  p.site_id = j.at("site_id").get<int>();
  p.vector = j.at("scalars").get<std::vector<double>>();
  p.frozen = j.at("frozen").get<bool>();
  if (p.vector.size() != j.at("dimension").get<std::size_t>()) throw ValidationError("prompt record: dimension mismatch");
  if (checksum_hex(std::span<const double>(p.vector)) != j.at("checksum").get<std::string>())
    throw ValidationError("prompt record: checksum mismatch for site " + std::to_string(p.site_id));
  return p;
}

void write_prompt_store(const std::vector<PromptEmbedding>& prompts, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& p : prompts) write_json(dir / ("prompt_site" + std::to_string(p.site_id) + ".json"), to_json(p));
}

std::vector<PromptEmbedding> read_prompt_store(const fs::path& dir) {
  std::vector<PromptEmbedding> out;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json" && e.path().filename().string().rfind("prompt_site", 0) == 0)
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out.push_back(prompt_from_json(read_json(f)));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.site_id < b.site_id; });
  return out;
}

}  // namespace sitecl
