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
#ifndef SITECL_CONFIG_HPP
#define SITECL_CONFIG_HPP

#include <filesystem>

#include <json.hpp>

#include "sitecl/harness.hpp"

namespace sitecl {

nlohmann::json to_json(const AlignConfig& c);
nlohmann::json to_json(const SmdConfig& c);
nlohmann::json to_json(const StreamSpec& s);
nlohmann::json to_json(const ExperimentConfig& c);

/// Keys present in j override the matching fields of base; unknown keys are
/// rejected with ValidationError. The result is validated.
ExperimentConfig experiment_from_json(const nlohmann::json& j, const ExperimentConfig& base = default_experiment_config());
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void save_experiment_config(const ExperimentConfig& c, const std::filesystem::path& path);

}  // namespace sitecl

#endif  // SITECL_CONFIG_HPP
