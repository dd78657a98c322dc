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
#ifndef SITECL_STORAGE_HPP
#define SITECL_STORAGE_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sitecl/denoiser.hpp"
#include "sitecl/seg_model.hpp"
#include "sitecl/smd.hpp"
#include "sitecl/synth_sites.hpp"

namespace sitecl {

/// FNV-1a 64 over raw bytes, as 16 lowercase hex digits.
std::string checksum_hex(std::span<const unsigned char> bytes);
std::string checksum_hex(std::span<const double> values);

nlohmann::json to_json(const SiteStyle& s);
SiteStyle style_from_json(const nlohmann::json& j);

/// Dataset container: <stem>.bin holds a fixed header, float64 images and
/// uint8 masks (little-endian); <stem>.json holds shapes, style, seed and
/// the checksum of the .bin file.
void write_dataset(const SiteDataset& d, const std::filesystem::path& stem, std::uint64_t seed);
SiteDataset read_dataset(const std::filesystem::path& stem);

/// Checkpoint: <stem>.json (kind, architecture, layout, checksum) plus
/// <stem>.bin (raw float64 parameters).
void write_checkpoint(const std::filesystem::path& stem, const std::string& kind, const nlohmann::json& arch,
                      const ParamVector& params);
struct Checkpoint {
  std::string kind;
  nlohmann::json arch;
  ParamVector params;
};
Checkpoint read_checkpoint(const std::filesystem::path& stem);

nlohmann::json to_json(const SegArch& a);
SegArch seg_arch_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DenoiserArch& a);
DenoiserArch denoiser_arch_from_json(const nlohmann::json& j);

void save_seg_model(const SegModel& m, const std::filesystem::path& stem);
SegModel load_seg_model(const std::filesystem::path& stem);
void save_denoiser(const DenoiserModel& m, const std::filesystem::path& stem);
DenoiserModel load_denoiser(const std::filesystem::path& stem);

/// One JSON record per site: site_id, dimension, scalars, frozen, checksum.
nlohmann::json to_json(const PromptEmbedding& p);
PromptEmbedding prompt_from_json(const nlohmann::json& j);
void write_prompt_store(const std::vector<PromptEmbedding>& prompts, const std::filesystem::path& dir);
std::vector<PromptEmbedding> read_prompt_store(const std::filesystem::path& dir);

}  // namespace sitecl

#endif  // SITECL_STORAGE_HPP
