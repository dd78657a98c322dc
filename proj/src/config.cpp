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
#include "sitecl/config.hpp"

#include <fstream>
#include <set>

#include "sitecl/errors.hpp"
#include "sitecl/storage.hpp"

namespace sitecl {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError("config: " + where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ValidationError("config: unknown key '" + k + "' in " + where);
}

template <class T>
void take(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("config: bad value for " + where + "." + key + ": " + e.what());
  }
}

std::vector<SiteStyle> styles_from(const json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError("config: " + where + " must be an array");
  std::vector<SiteStyle> out;
  for (const auto& s : j) {
    try {
      out.push_back(style_from_json(s));
    } catch (const json::exception& e) {
      throw ValidationError("config: bad site style in " + where + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

json to_json(const AlignConfig& c) {
  return {{"gamma", c.gamma},
          {"beta", c.beta},
          {"base_lr", c.base_lr},
          {"hvp_epsilon", c.hvp_epsilon},
          {"optimizer", to_string(c.optimizer)},
          {"virtual_train_fraction", c.split.train_fraction},
          {"stratified_split", c.split.stratified}};
}

json to_json(const SmdConfig& c) {
  return {{"steps", c.steps},
          {"arch", to_json(c.arch)},
          {"optimizer", to_string(c.optimizer)},
          {"lr", c.lr},
          {"prompt_lr", c.prompt_lr},
          {"iterations", c.iterations},
          {"batch_size", c.batch_size},
          {"report_chunks", c.report_chunks},
          {"samples_per_site", c.samples_per_site},
          {"learnable_prompts", c.learnable_prompts}};
}

json to_json(const StreamSpec& s) {
  json seq = json::array(), unseen = json::array();
  for (const auto& st : s.sequence) seq.push_back(to_json(st));
  for (const auto& st : s.unseen) unseen.push_back(to_json(st));
  return {{"sequence", seq},
          {"unseen", unseen},
          {"samples_per_site", s.samples_per_site},
          {"height", s.height},
          {"width", s.width},
          {"fractions", {s.fractions.train, s.fractions.val, s.fractions.test}}};
}

json to_json(const ExperimentConfig& c) {
  return {{"mode", c.mode},
          {"stream", to_json(c.stream)},
          {"seg", to_json(c.seg)},
          {"align", to_json(c.align)},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"replay_batch_size", c.replay_batch_size},
          {"smd", to_json(c.smd)},
          {"fixed_prompts", c.fixed_prompts},
          {"log_replay", c.log_replay},
          {"select_by_validation", c.select_by_validation},
          {"seeds", c.seeds},
          {"write_checkpoints", c.write_checkpoints}};
}

ExperimentConfig experiment_from_json(const json& j, const ExperimentConfig& base) {
  ExperimentConfig c = base;
  check_keys(j,
             {"mode", "stream", "seg", "align", "epochs", "batch_size", "replay_batch_size", "smd", "fixed_prompts",
              "log_replay", "select_by_validation", "seeds", "write_checkpoints"},
             "config");
  take(j, "mode", c.mode, "config");
  take(j, "epochs", c.epochs, "config");
  take(j, "batch_size", c.batch_size, "config");
  take(j, "replay_batch_size", c.replay_batch_size, "config");
  take(j, "fixed_prompts", c.fixed_prompts, "config");
  take(j, "log_replay", c.log_replay, "config");
  take(j, "select_by_validation", c.select_by_validation, "config");
  take(j, "seeds", c.seeds, "config");
  take(j, "write_checkpoints", c.write_checkpoints, "config");

  if (j.contains("stream")) {
    const json& s = j.at("stream");
    check_keys(s, {"sequence", "unseen", "samples_per_site", "height", "width", "fractions"}, "stream");
    if (s.contains("sequence")) c.stream.sequence = styles_from(s.at("sequence"), "stream.sequence");
    if (s.contains("unseen")) c.stream.unseen = styles_from(s.at("unseen"), "stream.unseen");
    take(s, "samples_per_site", c.stream.samples_per_site, "stream");
    take(s, "height", c.stream.height, "stream");
    take(s, "width", c.stream.width, "stream");
    if (s.contains("fractions")) {
      std::vector<double> f;
      take(s, "fractions", f, "stream");
      if (f.size() != 3) throw ValidationError("config: stream.fractions needs 3 values");
      c.stream.fractions = {f[0], f[1], f[2]};
    }
    // The diffusion image size follows the stream unless set explicitly.
    c.smd.arch.height = c.stream.height;
    c.smd.arch.width = c.stream.width;
  }
  if (j.contains("seg")) {
    try {
      json merged = to_json(c.seg);
      merged.update(j.at("seg"));
      c.seg = seg_arch_from_json(merged);
    } catch (const json::exception& e) {
      throw ValidationError(std::string("config: bad seg architecture: ") + e.what());
    }
  }
  if (j.contains("align")) {
    const json& a = j.at("align");
    check_keys(a, {"gamma", "beta", "base_lr", "hvp_epsilon", "optimizer", "virtual_train_fraction", "stratified_split"},
               "align");
    take(a, "gamma", c.align.gamma, "align");
    take(a, "beta", c.align.beta, "align");
    take(a, "base_lr", c.align.base_lr, "align");
    take(a, "hvp_epsilon", c.align.hvp_epsilon, "align");
    take(a, "virtual_train_fraction", c.align.split.train_fraction, "align");
    take(a, "stratified_split", c.align.split.stratified, "align");
    if (a.contains("optimizer")) c.align.optimizer = parse_optimizer_kind(a.at("optimizer").get<std::string>());
  }
  if (j.contains("smd")) {
    const json& m = j.at("smd");
    check_keys(m,
               {"steps", "arch", "optimizer", "lr", "prompt_lr", "iterations", "batch_size", "report_chunks",
                "samples_per_site", "learnable_prompts"},
               "smd");
    take(m, "steps", c.smd.steps, "smd");
    take(m, "lr", c.smd.lr, "smd");
    take(m, "prompt_lr", c.smd.prompt_lr, "smd");
    take(m, "iterations", c.smd.iterations, "smd");
    take(m, "batch_size", c.smd.batch_size, "smd");
    take(m, "report_chunks", c.smd.report_chunks, "smd");
    take(m, "samples_per_site", c.smd.samples_per_site, "smd");
    take(m, "learnable_prompts", c.smd.learnable_prompts, "smd");
    if (m.contains("optimizer")) c.smd.optimizer = parse_optimizer_kind(m.at("optimizer").get<std::string>());
    if (m.contains("arch")) {
      try {
        json merged = to_json(c.smd.arch);
        merged.update(m.at("arch"));
        c.smd.arch = denoiser_arch_from_json(merged);
      } catch (const json::exception& e) {
        throw ValidationError(std::string("config: bad smd architecture: ") + e.what());
      }
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return experiment_from_json(j);
}

void save_experiment_config(const ExperimentConfig& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(c).dump(2) << "\n";
}

}  // namespace sitecl
