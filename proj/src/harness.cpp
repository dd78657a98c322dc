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
#include "sitecl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "sitecl/config.hpp"
#include "sitecl/errors.hpp"
#include "sitecl/objective.hpp"
#include "sitecl/optimizer.hpp"
#include "sitecl/storage.hpp"

namespace sitecl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags for Rng::split, so each consumer draws from its own stream.
enum : std::uint64_t { kTagStream = 1, kTagSegInit, kTagShuffle, kTagReplayPick, kTagStep, kTagSmd };

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json opt_json(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

std::optional<double> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!joint()) {
    parse_align_mode(mode);
  }
  align.validate();
  smd.validate();
  if (epochs < 1 || batch_size < 1) throw ValidationError("config: epochs and batch_size must be >= 1");
  if (stream.sequence.empty()) throw ValidationError("config: the site sequence is empty");
  if (seeds.empty()) throw ValidationError("config: at least one seed is required");
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = i + 1; j < seeds.size(); ++j)
      if (seeds[i] == seeds[j]) throw ValidationError("config: seeds must be distinct");
  if (smd.arch.height != stream.height || smd.arch.width != stream.width)
    throw ValidationError("config: diffusion image size must match the stream image size");
  for (const auto& s : stream.sequence) s.validate();
  for (const auto& s : stream.unseen) s.validate();
}

bool ExperimentConfig::uses_replay() const {
  if (joint()) return false;
  if (parse_align_mode(mode) == AlignMode::kFinetune) return log_replay;
  return true;
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig cfg;
  cfg.align.base_lr = 0.5;
  cfg.align.gamma = 4.0;
  cfg.align.beta = 10.0;
  return cfg;
}

SiteScore evaluate_site(const SegModel& model, const SiteDataset& test) {
  SiteScore s;
  if (test.size() == 0) throw ValidationError("evaluate_site: empty test split");
  double asd_total = 0.0;
  std::size_t asd_n = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Tensor pred = threshold_logits(model.logits(test.images[i]));
    s.dsc += dsc(pred, test.masks[i]);
    try {
      asd_total += asd(pred, test.masks[i]);
      ++asd_n;
    } catch (const UndefinedMetricError&) {
      ++s.asd_skips;
    }
  }
  s.dsc /= static_cast<double>(test.size());
  s.asd = asd_n ? asd_total / static_cast<double>(asd_n) : kNaN;
  return s;
}

ReplayTrack::ReplayTrack(const ExperimentConfig& cfg, std::uint64_t seed)
    : cfg_(cfg.smd),
      fixed_prompts_(cfg.fixed_prompts || !cfg.smd.learnable_prompts),
      rng_(Rng(seed).split(kTagSmd)),
      schedule_(NoiseSchedule::linear(cfg.smd.steps)),
      denoiser_([&] {
        Rng init = rng_.split(0);
        return DenoiserModel::init(cfg.smd.arch, init);
      }()) {}

const ReplayBuffer& ReplayTrack::buffer(std::size_t round, const SiteDataset& incoming) {
  if (round == 0) return empty_;
  if (auto it = buffers_.find(round); it != buffers_.end()) return it->second;
  if (rounds_trained_ != round)
    throw std::logic_error("ReplayTrack: buffer for round " + std::to_string(round + 1) +
                           " requested before the diffusion model saw round " + std::to_string(round));
  auto buf = build_buffer(denoiser_, prompts_, incoming.masks, cfg_.samples_per_site, schedule_,
                          rng_.split({1, static_cast<std::uint64_t>(round)}));
  return buffers_.emplace(round, std::move(buf)).first->second;
}

void ReplayTrack::train_round(std::size_t round, const SiteDataset& incoming) {
  if (round < rounds_trained_) return;  // already done by an earlier run sharing this track
  if (round != rounds_trained_) throw std::logic_error("ReplayTrack: rounds must be trained in order");
  const ReplayBuffer& buf = buffer(round, incoming);
  const Rng prompt_base = rng_.split(2);
  auto prompts = prompts_;
  const std::size_t dim = cfg_.arch.time_dim;
  prompts.push_back(fixed_prompts_ ? fixed_prompt_baseline(incoming.site_id, dim, prompt_base)
                                   : learnable_prompt(incoming.site_id, dim, prompt_base));
  auto result = train_smd(denoiser_, std::move(prompts), incoming, buf, cfg_,
                          rng_.split({3, static_cast<std::uint64_t>(round)}));
  denoiser_ = std::move(result.denoiser);
  prompts_ = std::move(result.prompts);
  losses_.push_back(std::move(result.chunk_losses));
  ++rounds_trained_;
}

RunRecord run_sequence(const ExperimentConfig& cfg, std::uint64_t seed, ReplayTrack* shared_track) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const bool joint = cfg.joint();
  AlignConfig align = cfg.align;
  if (joint)
    align.mode = AlignMode::kFinetune;
  else
    align.mode = parse_align_mode(cfg.mode);
  const bool replay = cfg.uses_replay();

  StreamSpec spec = cfg.stream;
  spec.seed = seed;
  const SiteStream stream = make_stream(spec);
  const Rng root(seed);

  std::unique_ptr<ReplayTrack> own_track;
  ReplayTrack* track = shared_track;
  if (replay && !track) {
    own_track = std::make_unique<ReplayTrack>(cfg, seed);
    track = own_track.get();
  }

  RunRecord rec;
  rec.mode = cfg.mode;
  rec.seed = seed;
  rec.seg_arch = cfg.seg;
  StreamAccess access(stream, rec.access_log);
  rec.sequence_ids = access.sequence_ids();
  rec.unseen_ids = access.unseen_ids();
  rec.dsc = AccuracyMatrix(rec.sequence_ids);
  rec.asd = AccuracyMatrix(rec.sequence_ids);

  Rng init_rng = root.split(kTagSegInit);
  SegModel model = SegModel::init(cfg.seg, init_rng);
  ParamVector theta = model.params();
  std::optional<Optimizer> adam;
  if (align.optimizer == OptimizerKind::kAdam) adam.emplace(OptimizerKind::kAdam, align.base_lr);

  const std::size_t T = access.sequence_length();
  std::size_t step = 0;
  for (std::size_t r = 0; r < T; ++r) {
    access.set_round(r);

    // Training pool: incoming first, then replay (or every site so far when pooled).
    std::vector<SampleRef> pool;
    std::size_t n_incoming = 0;
    const SiteDataset* incoming = nullptr;
    const ReplayBuffer* buffer = nullptr;
    if (joint) {
      for (std::size_t s = 0; s <= r; ++s) {
        const auto more = refs(access.train(s, "segmentation (pooled)"));
        pool.insert(pool.end(), more.begin(), more.end());
      }
      n_incoming = pool.size();
    } else {
      incoming = &access.train(r, "segmentation");
      pool = refs(*incoming);
      n_incoming = pool.size();
      if (replay && r > 0) {
        access.train(r, "replay masks");
        buffer = &track->buffer(r, *incoming);
        for (const auto& site : buffer->sites)
          rec.access_log.record(r, site.site_id, AccessKind::kReplay, "segmentation replay");
        const auto more = buffer->samples();
        pool.insert(pool.end(), more.begin(), more.end());
      }
    }
    const std::size_t n_replay = pool.size() - n_incoming;
    const SegObjective objective(model, pool);

    ParamVector best_theta = theta;
    double best_val = -1.0;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
      std::vector<std::size_t> order(n_incoming);
      std::iota(order.begin(), order.end(), 0);
      Rng shuffle_rng = root.split({kTagShuffle, r, e});
      shuffle(order, shuffle_rng);
      for (std::size_t b = 0, start = 0; start < n_incoming; ++b, start += cfg.batch_size) {
        StepBatches batches;
        batches.incoming.assign(order.begin() + static_cast<long>(start),
                                order.begin() + static_cast<long>(std::min(start + cfg.batch_size, n_incoming)));
        if (n_replay > 0) {
          Rng pick = root.split({kTagReplayPick, r, e, b});
          for (std::size_t k = 0; k < cfg.replay_batch(); ++k) batches.replay.push_back(n_incoming + pick.below(n_replay));
        }
        Rng step_rng = root.split({kTagStep, r, e, b});
        StepResult res = align_step(objective, theta, batches, align, step_rng);
        if (adam) {
          adam->step(theta.data(), res.direction.data());
        } else {
          theta = std::move(res.params);
        }
        if (!res.diagnostics.all_finite()) throw NumericError("non-finite diagnostics at step " + std::to_string(step));
        rec.diagnostics.push_back({step++, r, res.diagnostics});
      }
      if (cfg.select_by_validation && !joint) {
        model.params() = theta;
        const double v = evaluate_site(model, access.val(r, "checkpoint selection")).dsc;
        if (v > best_val) {
          best_val = v;
          best_theta = theta;
        }
      }
    }
    if (cfg.select_by_validation && !joint) theta = best_theta;
    model.params() = theta;

    if (replay && r + 1 < T) track->train_round(r, *incoming);

    std::vector<double> dsc_row, asd_row;
    for (std::size_t j = 0; j < T; ++j) {
      const auto s = evaluate_site(model, access.test(j));
      dsc_row.push_back(s.dsc);
      asd_row.push_back(s.asd);
      rec.asd_skips += s.asd_skips;
    }
    rec.dsc.set_row(r, dsc_row);
    rec.asd.set_row(r, asd_row);
    std::vector<double> ud, ua;
    for (std::size_t u = 0; u < access.unseen_count(); ++u) {
      const auto s = evaluate_site(model, access.unseen_test(u));
      ud.push_back(s.dsc);
      ua.push_back(s.asd);
      rec.asd_skips += s.asd_skips;
    }
    rec.unseen_dsc.push_back(std::move(ud));
    rec.unseen_asd.push_back(std::move(ua));
    rec.checkpoints.push_back(theta);
  }

  if (track) {
    rec.prompts = track->prompts();
    rec.smd_losses = track->losses();
  }
  rec.access_log.verify(rec.sequence_ids, joint);
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return rec;
}

RunSummary summarize(const RunRecord& r) {
  RunSummary s;
  s.mode = r.mode;
  s.seed = r.seed;
  s.rounds = r.dsc.n();
  s.steps = r.diagnostics.size();
  s.seconds = r.seconds;
  const std::size_t T = r.dsc.n();
  const auto last_dsc = r.dsc.row(T - 1);
  const auto last_asd = r.asd.row(T - 1);
  s.previous_dsc = mean_of({last_dsc.begin(), last_dsc.end() - 1});
  s.previous_asd = mean_of({last_asd.begin(), last_asd.end() - 1});
  s.incoming_dsc = last_dsc.back();
  s.incoming_asd = last_asd.back();
  s.unseen_dsc = mean_of(r.unseen_dsc.back());
  s.unseen_asd = mean_of(r.unseen_asd.back());

  std::vector<double> all_dsc = last_dsc, all_asd = last_asd;
  all_dsc.insert(all_dsc.end(), r.unseen_dsc.back().begin(), r.unseen_dsc.back().end());
  all_asd.insert(all_asd.end(), r.unseen_asd.back().begin(), r.unseen_asd.back().end());
  s.overall_dsc = *mean_of(all_dsc);
  s.overall_asd = *mean_of(all_asd);

  if (T >= 2) {
    s.bwt = bwt(r.dsc);
    s.fwt = fwt(r.dsc);
    s.bwt_plus = bwt_plus(r.asd);
    s.fwt_asd = fwt(r.asd);
  }

  std::vector<double> cos_ir, cos_tt;
  for (const auto& row : r.diagnostics) {
    if (row.diag.has_replay) cos_ir.push_back(row.diag.cos_incoming_replay);
    cos_tt.push_back(row.diag.cos_vtrain_vtest);
  }
  s.mean_cos_incoming_replay = mean_of(cos_ir);
  s.mean_cos_vtrain_vtest = mean_of(cos_tt);
  return s;
}

json to_json(const RunSummary& s) {
  return {{"mode", s.mode},
          {"seed", s.seed},
          {"rounds", s.rounds},
          {"previous_dsc", opt_json(s.previous_dsc)},
          {"incoming_dsc", opt_json(s.incoming_dsc)},
          {"unseen_dsc", opt_json(s.unseen_dsc)},
          {"overall_dsc", opt_json(s.overall_dsc)},
          {"bwt", opt_json(s.bwt)},
          {"fwt", opt_json(s.fwt)},
          {"previous_asd", opt_json(s.previous_asd)},
          {"incoming_asd", opt_json(s.incoming_asd)},
          {"unseen_asd", opt_json(s.unseen_asd)},
          {"overall_asd", opt_json(s.overall_asd)},
          {"bwt_plus", opt_json(s.bwt_plus)},
          {"fwt_asd", opt_json(s.fwt_asd)},
          {"mean_cos_incoming_replay", opt_json(s.mean_cos_incoming_replay)},
          {"mean_cos_vtrain_vtest", opt_json(s.mean_cos_vtrain_vtest)},
          {"steps", s.steps},
          {"seconds", s.seconds}};
}

RunSummary summary_from_json(const json& j) {
  RunSummary s;
  s.mode = j.at("mode").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.rounds = j.value("rounds", std::size_t{0});
  s.previous_dsc = opt_from(j, "previous_dsc");
  s.incoming_dsc = opt_from(j, "incoming_dsc").value_or(kNaN);
  s.unseen_dsc = opt_from(j, "unseen_dsc");
  s.overall_dsc = opt_from(j, "overall_dsc").value_or(kNaN);
  s.bwt = opt_from(j, "bwt");
  s.fwt = opt_from(j, "fwt");
  s.previous_asd = opt_from(j, "previous_asd");
  s.incoming_asd = opt_from(j, "incoming_asd").value_or(kNaN);
  s.unseen_asd = opt_from(j, "unseen_asd");
  s.overall_asd = opt_from(j, "overall_asd").value_or(kNaN);
  s.bwt_plus = opt_from(j, "bwt_plus");
  s.fwt_asd = opt_from(j, "fwt_asd");
  s.mean_cos_incoming_replay = opt_from(j, "mean_cos_incoming_replay");
  s.mean_cos_vtrain_vtest = opt_from(j, "mean_cos_vtrain_vtest");
  s.steps = j.value("steps", std::size_t{0});
  s.seconds = j.value("seconds", 0.0);
  return s;
}

namespace {

/// Applies f column-wise over a group of summaries.
RunSummary aggregate(const std::vector<const RunSummary*>& group,
                     const std::function<double(std::vector<double>)>& f) {
  RunSummary out;
  out.mode = group.front()->mode;
  out.rounds = group.front()->rounds;
  auto col = [&](auto getter) {
    std::vector<double> v;
    for (const auto* s : group) {
      const std::optional<double> x = getter(*s);
      if (x && std::isfinite(*x)) v.push_back(*x);
    }
    return v.empty() ? std::optional<double>() : std::optional<double>(f(v));
  };
  out.previous_dsc = col([](const RunSummary& s) { return s.previous_dsc; });
  out.incoming_dsc = col([](const RunSummary& s) { return std::optional<double>(s.incoming_dsc); }).value_or(kNaN);
  out.unseen_dsc = col([](const RunSummary& s) { return s.unseen_dsc; });
  out.overall_dsc = col([](const RunSummary& s) { return std::optional<double>(s.overall_dsc); }).value_or(kNaN);
  out.bwt = col([](const RunSummary& s) { return s.bwt; });
  out.fwt = col([](const RunSummary& s) { return s.fwt; });
  out.previous_asd = col([](const RunSummary& s) { return s.previous_asd; });
  out.incoming_asd = col([](const RunSummary& s) { return std::optional<double>(s.incoming_asd); }).value_or(kNaN);
  out.unseen_asd = col([](const RunSummary& s) { return s.unseen_asd; });
  out.overall_asd = col([](const RunSummary& s) { return std::optional<double>(s.overall_asd); }).value_or(kNaN);
  out.bwt_plus = col([](const RunSummary& s) { return s.bwt_plus; });
  out.fwt_asd = col([](const RunSummary& s) { return s.fwt_asd; });
  out.mean_cos_incoming_replay = col([](const RunSummary& s) { return s.mean_cos_incoming_replay; });
  out.mean_cos_vtrain_vtest = col([](const RunSummary& s) { return s.mean_cos_vtrain_vtest; });
  out.seconds = col([](const RunSummary& s) { return std::optional<double>(s.seconds); }).value_or(0.0);
  return out;
}

}  // namespace

ComparisonTable run_comparison(const ExperimentConfig& cfg, const std::vector<std::string>& modes,
                               std::vector<RunRecord>* records) {
  ComparisonTable table;
  for (auto seed : cfg.seeds) {
    ReplayTrack track(cfg, seed);
    for (const auto& mode : modes) {
      ExperimentConfig c = cfg;
      c.mode = mode;
      auto rec = run_sequence(c, seed, c.uses_replay() ? &track : nullptr);
      table.runs.push_back(summarize(rec));
      if (records) records->push_back(std::move(rec));
    }
  }
  for (const auto& mode : modes) {
    std::vector<const RunSummary*> group;
    for (const auto& s : table.runs)
      if (s.mode == mode) group.push_back(&s);
    if (group.empty()) continue;
    table.mean[mode] = aggregate(group, [](std::vector<double> v) { return *mean_of(v); });
    table.median[mode] = aggregate(group, [](std::vector<double> v) { return median_of(std::move(v)); });
  }
  return table;
}

std::string run_id(const std::string& mode, std::uint64_t seed) { return mode + "_seed" + std::to_string(seed); }

void diagnostics_export(const RunRecord& r, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream csv(dir / "diagnostics.csv", std::ios::trunc);
  std::ofstream jsonl(dir / "diagnostics.jsonl", std::ios::trunc);
  if (!csv || !jsonl) throw std::runtime_error("cannot write diagnostics under " + dir.string());
  csv.precision(17);
  csv << "step,round,mode,loss_incoming,loss_replay,loss_vtrain,loss_vtest,dot_incoming_replay,dot_vtrain_vtest,"
         "cos_incoming_replay,cos_vtrain_vtest,norm_incoming,norm_replay,norm_vtrain,norm_vtest,has_replay\n";
  for (const auto& row : r.diagnostics) {
    const auto& d = row.diag;
    csv << row.step << ',' << row.round + 1 << ',' << to_string(d.mode) << ',' << d.loss_incoming << ','
        << d.loss_replay << ',' << d.loss_vtrain << ',' << d.loss_vtest << ',' << d.dot_incoming_replay << ','
        << d.dot_vtrain_vtest << ',' << d.cos_incoming_replay << ',' << d.cos_vtrain_vtest << ',' << d.norm_incoming
        << ',' << d.norm_replay << ',' << d.norm_vtrain << ',' << d.norm_vtest << ',' << (d.has_replay ? 1 : 0)
        << '\n';
    json j = to_json(d);
    j["step"] = row.step;
    j["round"] = row.round + 1;
    jsonl << j.dump() << '\n';
  }
}

void write_run(const RunRecord& r, const ExperimentConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  // Marker removed only once every file is written.
  write_text(dir / "INCOMPLETE", "run output is partial\n");
  ExperimentConfig resolved = cfg;
  resolved.mode = r.mode;
  resolved.seeds = {r.seed};
  write_text(dir / "config.json", to_json(resolved).dump(2) + "\n");
  write_matrix_csv(r.dsc, dir / "matrix_dsc.csv");
  write_matrix_csv(r.asd, dir / "matrix_asd.csv");
  json summary = to_json(summarize(r));
  summary["dsc"] = to_json(sitecl::summarize(r.dsc, false));
  summary["asd"] = to_json(sitecl::summarize(r.asd, true));
  summary["sequence_ids"] = r.sequence_ids;
  summary["unseen_ids"] = r.unseen_ids;
  summary["unseen_dsc_by_round"] = r.unseen_dsc;
  summary["asd_skips"] = r.asd_skips;
  summary.erase("seconds");  // keeps the run folder byte-deterministic
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  diagnostics_export(r, dir);
  write_text(dir / "audit.json", r.access_log.to_json().dump(2) + "\n");
  if (!r.prompts.empty()) write_prompt_store(r.prompts, dir / "prompts");
  if (cfg.write_checkpoints) {
    for (std::size_t i = 0; i < r.checkpoints.size(); ++i)
      save_seg_model(SegModel(r.seg_arch, r.checkpoints[i]), dir / "checkpoints" / ("round_" + std::to_string(i + 1)));
  }
  fs::remove(dir / "INCOMPLETE");
}

}  // namespace sitecl
