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
#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "sitecl/config.hpp"
#include "sitecl/errors.hpp"
#include "sitecl/harness.hpp"
#include "sitecl/report.hpp"
#include "sitecl/storage.hpp"
#include "sitecl/verify.hpp"

namespace sitecl {

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::size_t sites = 0;
  std::size_t epochs = 0;
  std::size_t smd_iterations = 0;
  double gamma = -1, beta = -1, lr = -1;
  std::string optimizer;
  bool fixed_prompts = false;
  bool log_replay = false;
  bool select_by_validation = false;
  bool no_checkpoints = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON config file (defaults when omitted)");
  cmd->add_option("--seed", o.seeds, "Seed(s); replaces the config's seed list");
  cmd->add_option("--sites", o.sites, "Keep only the first N sites of the sequence");
}

void add_training(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--epochs", o.epochs, "Epochs per round");
  cmd->add_option("--smd-iterations", o.smd_iterations, "Diffusion training iterations per round");
  cmd->add_option("--gamma", o.gamma, "Orientational alignment weight");
  cmd->add_option("--beta", o.beta, "Arbitrary alignment weight");
  cmd->add_option("--lr", o.lr, "Segmentation learning rate");
  cmd->add_option("--optimizer", o.optimizer, "sgd or adam");
  cmd->add_flag("--fixed-prompts", o.fixed_prompts, "Frozen random prompts instead of learnable ones");
  cmd->add_flag("--log-replay", o.log_replay, "Finetune: build replay for gradient logging only");
  cmd->add_flag("--select-by-validation", o.select_by_validation, "Per-round checkpoint selection on validation");
  cmd->add_flag("--no-checkpoints", o.no_checkpoints, "Skip per-round checkpoints");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = o.config.empty() ? default_experiment_config() : load_experiment_config(o.config);
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (o.sites > 0) {
    if (o.sites > c.stream.sequence.size())
      throw ValidationError("--sites " + std::to_string(o.sites) + " exceeds the " +
                            std::to_string(c.stream.sequence.size()) + " configured sites");
    c.stream.sequence.resize(o.sites);
  }
  if (o.epochs > 0) c.epochs = o.epochs;
  if (o.smd_iterations > 0) c.smd.iterations = o.smd_iterations;
  if (o.gamma >= 0) c.align.gamma = o.gamma;
  if (o.beta >= 0) c.align.beta = o.beta;
  if (o.lr >= 0) c.align.base_lr = o.lr;
  if (!o.optimizer.empty()) c.align.optimizer = parse_optimizer_kind(o.optimizer);
  if (o.fixed_prompts) c.fixed_prompts = true;
  if (o.log_replay) c.log_replay = true;
  if (o.select_by_validation) c.select_by_validation = true;
  if (o.no_checkpoints) c.write_checkpoints = false;
  c.validate();
  return c;
}

std::string canonical_mode(const std::string& m) {
  if (m == kJointTrain) return m;
  return to_string(parse_align_mode(m));
}

int gen_data(const Overrides& o, const fs::path& out_dir, std::ostream& out) {
  const ExperimentConfig cfg = resolve(o);
  StreamSpec spec = cfg.stream;
  spec.seed = cfg.seeds.front();
  const SiteStream stream = make_stream(spec);
  fs::create_directories(out_dir);
  std::ofstream(out_dir / "INCOMPLETE") << "dataset output is partial\n";
  auto write_site = [&](const SiteData& s) {
    const fs::path dir = out_dir / ("site_" + std::to_string(s.style.site_id));
    fs::create_directories(dir);
    write_dataset(s.splits.train, dir / "train", spec.seed);
    write_dataset(s.splits.val, dir / "val", spec.seed);
    write_dataset(s.splits.test, dir / "test", spec.seed);
  };
  for (const auto& s : stream.sequence) write_site(s);
  for (const auto& s : stream.unseen) write_site(s);
  ExperimentConfig resolved = cfg;
  resolved.seeds = {spec.seed};
  save_experiment_config(resolved, out_dir / "config.json");
  fs::remove(out_dir / "INCOMPLETE");
  out << "wrote " << stream.sequence.size() + stream.unseen.size() << " sites to " << out_dir.string() << "\n";
  return kExitOk;
}

int train(const Overrides& o, const std::string& mode, const fs::path& out_dir, std::ostream& out) {
  ExperimentConfig cfg = resolve(o);
  cfg.mode = canonical_mode(mode);
  cfg.validate();
  for (auto seed : cfg.seeds) {
    const RunRecord rec = run_sequence(cfg, seed);
    const fs::path dir = out_dir / run_id(cfg.mode, seed);
    write_run(rec, cfg, dir);
    const RunSummary s = summarize(rec);
    out << std::fixed << std::setprecision(4) << run_id(cfg.mode, seed) << ": overall DSC " << s.overall_dsc;
    if (s.bwt) out << ", BWT " << *s.bwt;
    out << ", " << s.steps << " steps in " << std::setprecision(1) << rec.seconds << " s\n";
  }
  return kExitOk;
}

int report(const std::vector<std::string>& runs, const fs::path& out_file, std::ostream& out) {
  std::vector<ReportRow> rows;
  for (const auto& r : runs) rows.push_back(load_run(r));
  const std::string csv = report_csv(rows);
  if (!out_file.parent_path().empty()) fs::create_directories(out_file.parent_path());
  std::ofstream f(out_file, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + out_file.string());
  f << csv;
  out << "wrote " << rows.size() << " rows to " << out_file.string() << "\n";
  return kExitOk;
}

int verify(const VerifyOptions& opts, std::ostream& out) {
  const auto results = run_verify(opts);
  std::vector<std::string> failed;
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ", " << std::fixed << std::setprecision(2)
        << r.seconds << " s)\n";
    if (!r.passed) failed.push_back(r.name);
  }
  if (failed.empty()) {
    out << "all " << results.size() << " checks passed\n";
    return kExitOk;
  }
  out << "failed:";
  for (const auto& f : failed) out << " [" << f << "]";
  out << "\n";
  return kExitFailure;
}

}  // namespace

int exit_code_for(std::exception_ptr e, std::ostream& err) {
  try {
    std::rethrow_exception(e);
  } catch (const AuditError& e) {
    err << "audit breach: " << e.what() << "\n";
    return kExitAudit;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (...) {
    err << "error: unknown exception\n";
    return kExitFailure;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sitecl: continual cross-site segmentation with aligned gradients and diffusion replay"};
  app.require_subcommand(1);

  Overrides gen_o, train_o;
  std::string gen_out, train_out, mode, report_out;
  std::vector<std::string> report_runs;
  VerifyOptions vopts;

  auto* gen = app.add_subcommand("gen-data", "Write the synthetic site stream to disk");
  add_common(gen, gen_o);
  gen->add_option("--out", gen_out, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Run the sequential protocol for one mode");
  add_common(tr, train_o);
  add_training(tr, train_o);
  tr->add_option("--mode", mode, "finetune|naive|pga-exact|dual-meta|orientational|arbitrary|jointtrain")->required();
  tr->add_option("--out", train_out, "Output directory")->required();

  auto* rep = app.add_subcommand("report", "Merge run summaries into one table");
  rep->add_option("--runs", report_runs, "Run folders")->required();
  rep->add_option("--out", report_out, "Output CSV")->required();

  auto* ver = app.add_subcommand("verify", "Fast invariant suite");
  ver->add_option("--seed", vopts.seed, "Seed of the random fixtures");
  ver->add_flag("--inject-gradient-bug", vopts.inject_gradient_bug, "Negative control for the gradient check");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  try {
    if (*gen) return gen_data(gen_o, gen_out, out);
    if (*tr) return train(train_o, mode, train_out, out);
    if (*rep) return report(report_runs, report_out, out);
    if (*ver) return verify(vopts, out);
  } catch (...) {
    return exit_code_for(std::current_exception(), err);
  }
  return kExitInvalid;
}

}  // namespace sitecl
