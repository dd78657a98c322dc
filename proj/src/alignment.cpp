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
#include "sitecl/alignment.hpp"

#include <cmath>

namespace sitecl {

std::string to_string(AlignMode m) {
  switch (m) {
    case AlignMode::kFinetune: return "finetune";
    case AlignMode::kNaiveDual: return "naive_dual";
    case AlignMode::kPgaExact: return "pga_exact";
    case AlignMode::kDualMeta: return "dual_meta";
    case AlignMode::kOrientationalOnly: return "orientational_only";
    case AlignMode::kArbitraryOnly: return "arbitrary_only";
  }
  return "dual_meta";
}

AlignMode parse_align_mode(const std::string& s) {
  if (s == "finetune") return AlignMode::kFinetune;
  if (s == "naive_dual" || s == "naive" || s == "naive-dual") return AlignMode::kNaiveDual;
  if (s == "pga_exact" || s == "pga-exact") return AlignMode::kPgaExact;
  if (s == "dual_meta" || s == "dual-meta") return AlignMode::kDualMeta;
  if (s == "orientational_only" || s == "orientational") return AlignMode::kOrientationalOnly;
  if (s == "arbitrary_only" || s == "arbitrary") return AlignMode::kArbitraryOnly;
  throw ValidationError("unknown optimization mode '" + s + "'");
}

void AlignConfig::validate() const {
  // gamma = beta = 0 is allowed: it collapses every mode to the naive dual objective.
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ValidationError("AlignConfig: gamma must be finite and >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ValidationError("AlignConfig: beta must be finite and >= 0");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw ValidationError("AlignConfig: base_lr must be positive");
  if (!(hvp_epsilon > 0.0) || !std::isfinite(hvp_epsilon))
    throw ValidationError("AlignConfig: hvp_epsilon must be positive");
  if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0))
    throw ValidationError("AlignConfig: virtual split fraction must lie in (0, 1)");
}

ResolvedBatches resolve_batches(const StepBatches& b, Rng& rng, const VirtualSplitPolicy& policy) {
  if (b.incoming.empty()) throw ValidationError("alignment step: incoming batch is empty");
  ResolvedBatches r{b.incoming, b.replay, {}, {}};
  const auto split = virtual_split(b.incoming.size(), b.replay.size(), rng, policy);
  auto at = [&](std::size_t u) { return u < b.incoming.size() ? b.incoming[u] : b.replay[u - b.incoming.size()]; };
  for (auto u : split.train) r.virtual_train.push_back(at(u));
  for (auto u : split.test) r.virtual_test.push_back(at(u));
  return r;
}

bool StepDiagnostics::all_finite() const {
  for (double v : {loss_incoming, loss_replay, loss_vtrain, loss_vtest, dot_incoming_replay, dot_vtrain_vtest,
                   cos_incoming_replay, cos_vtrain_vtest, norm_incoming, norm_replay, norm_vtrain, norm_vtest})
    if (!std::isfinite(v)) return false;
  return true;
}

nlohmann::json to_json(const StepDiagnostics& d) {
  return {{"mode", to_string(d.mode)},
          {"loss_incoming", d.loss_incoming},
          {"loss_replay", d.loss_replay},
          {"loss_vtrain", d.loss_vtrain},
          {"loss_vtest", d.loss_vtest},
          {"dot_incoming_replay", d.dot_incoming_replay},
          {"dot_vtrain_vtest", d.dot_vtrain_vtest},
          {"cos_incoming_replay", d.cos_incoming_replay},
          {"cos_vtrain_vtest", d.cos_vtrain_vtest},
          {"norm_incoming", d.norm_incoming},
          {"norm_replay", d.norm_replay},
          {"norm_vtrain", d.norm_vtrain},
          {"norm_vtest", d.norm_vtest},
          {"has_replay", d.has_replay},
          {"gradient_evaluations", d.gradient_evaluations},
          {"hvp_evaluations", d.hvp_evaluations}};
}

GradVector hvp(const Objective& obj, const ParamVector& theta, std::span<const std::size_t> batch, const GradVector& v,
               double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("hvp: epsilon must be positive");
  const double n = norm(v);
  if (n == 0.0) throw DegenerateInputError("hvp: direction vector has zero norm");
  const GradVector u = (1.0 / n) * v;
  const auto plus = obj.evaluate(axpy(epsilon, u, theta), batch).grad;
  const auto minus = obj.evaluate(axpy(-epsilon, u, theta), batch).grad;
  return (n / (2.0 * epsilon)) * (plus - minus);
}

namespace {

struct Eval {
  double loss = 0.0;
  GradVector grad;
};

class StepContext {
 public:
  StepContext(const Objective& obj, AlignMode mode) : obj_(obj) { diag.mode = mode; }

  Eval eval(const ParamVector& theta, std::span<const std::size_t> ids) {
    ++diag.gradient_evaluations;
    auto r = obj_.evaluate(theta, ids);
    if (!std::isfinite(r.value.loss)) throw NumericError("alignment step: non-finite loss, step refused");
    return {r.value.loss, std::move(r.grad)};
  }

  GradVector hvp_or_zero(const ParamVector& theta, std::span<const std::size_t> ids, const GradVector& v,
                         double eps) {
    if (norm(v) == 0.0) return GradVector(v.layout());
    diag.hvp_evaluations += 1;
    diag.gradient_evaluations += 2;
    return hvp(obj_, theta, ids, v, eps);
  }

  StepDiagnostics diag;

 private:
  const Objective& obj_;
};

double safe_cosine(const GradVector& a, const GradVector& b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return cosine(a, b);
}

/// The four gradients of the naive dual objective at theta.
struct BaseGrads {
  Eval incoming;
  Eval replay;  // empty grad when there is no replay batch
  Eval vtrain;
  Eval vtest;
  bool has_replay = false;
};

BaseGrads base_grads(StepContext& ctx, const ParamVector& theta, const ResolvedBatches& r, bool need_replay) {
  BaseGrads g;
  g.has_replay = r.has_replay();
  g.incoming = ctx.eval(theta, r.incoming);
  if (g.has_replay && need_replay) g.replay = ctx.eval(theta, r.replay);
  g.vtrain = ctx.eval(theta, r.virtual_train);
  g.vtest = ctx.eval(theta, r.virtual_test);
  return g;
}

void record(StepDiagnostics& d, const BaseGrads& g) {
  d.has_replay = g.has_replay && g.replay.grad.size() > 0;
  d.loss_incoming = g.incoming.loss;
  d.loss_vtrain = g.vtrain.loss;
  d.loss_vtest = g.vtest.loss;
  d.norm_incoming = norm(g.incoming.grad);
  d.norm_vtrain = norm(g.vtrain.grad);
  d.norm_vtest = norm(g.vtest.grad);
  d.dot_vtrain_vtest = dot(g.vtrain.grad, g.vtest.grad);
  d.cos_vtrain_vtest = safe_cosine(g.vtrain.grad, g.vtest.grad);
  if (d.has_replay) {
    d.loss_replay = g.replay.loss;
    d.norm_replay = norm(g.replay.grad);
    d.dot_incoming_replay = dot(g.incoming.grad, g.replay.grad);
    d.cos_incoming_replay = safe_cosine(g.incoming.grad, g.replay.grad);
  }
}

/// ((a + b) + c) + d, skipping b when absent. Shared by every mode so the
/// zero-weight reductions agree bit for bit.
GradVector combine(const GradVector& a, const GradVector* b, const GradVector& c, const GradVector& d) {
  GradVector s = a;
  if (b) s += *b;
  s += c;
  s += d;
  return s;
}

StepResult finish(StepContext& ctx, const ParamVector& theta, GradVector direction, const AlignConfig& cfg) {
  if (!all_finite(direction.data())) throw NumericError("alignment step: non-finite update direction, step refused");
  StepResult out{axpy(-cfg.base_lr, direction, theta), std::move(direction), ctx.diag};
  return out;
}

struct MetaTerms {
  bool orientational = true;
  bool arbitrary = true;
};

StepResult meta_step(const Objective& obj, const ParamVector& theta, const StepBatches& b, const AlignConfig& cfg,
                     Rng& rng, AlignMode mode, MetaTerms terms) {
  cfg.validate();
  StepContext ctx(obj, mode);
  const auto r = resolve_batches(b, rng, cfg.split);
  const auto g = base_grads(ctx, theta, r, true);
  record(ctx.diag, g);

  // Inner update on the incoming batch, meta gradient on replay.
  const GradVector* replay_term = nullptr;
  GradVector replay_meta;
  if (g.has_replay) {
    if (terms.orientational) {
      const ParamVector theta_incoming = axpy(-cfg.gamma, g.incoming.grad, theta);
      replay_meta = ctx.eval(theta_incoming, r.replay).grad;
      ctx.diag.orientational_meta_evaluated = true;
      replay_term = &replay_meta;
    } else {
      replay_term = &g.replay.grad;
    }
  }

  // Inner update on V_tr, meta gradient on V_te.
  GradVector vtest_meta;
  const GradVector* vtest_term = &g.vtest.grad;
  if (terms.arbitrary) {
    const ParamVector theta_vtrain = axpy(-cfg.beta, g.vtrain.grad, theta);
    vtest_meta = ctx.eval(theta_vtrain, r.virtual_test).grad;
    ctx.diag.arbitrary_meta_evaluated = true;
    vtest_term = &vtest_meta;
  }

  return finish(ctx, theta, combine(g.incoming.grad, replay_term, g.vtrain.grad, *vtest_term), cfg);
}

}  // namespace

double pga_objective(const Objective& obj, const ParamVector& theta, const ResolvedBatches& r, const AlignConfig& cfg) {
  const auto inc = obj.evaluate(theta, r.incoming);
  const auto vtr = obj.evaluate(theta, r.virtual_train);
  const auto vte = obj.evaluate(theta, r.virtual_test);
  double value = inc.value.loss + vtr.value.loss + vte.value.loss - cfg.beta * dot(vtr.grad, vte.grad);
  if (r.has_replay()) {
    const auto rep = obj.evaluate(theta, r.replay);
    value += rep.value.loss - cfg.gamma * dot(inc.grad, rep.grad);
  }
  return value;
}

StepResult finetune_step(const Objective& obj, const ParamVector& theta, const StepBatches& b, const AlignConfig& cfg,
                         Rng& rng) {
  cfg.validate();
  StepContext ctx(obj, AlignMode::kFinetune);
  const auto r = resolve_batches(b, rng, cfg.split);
  // Replay and virtual-split gradients are evaluated for the diagnostics only.
  const auto g = base_grads(ctx, theta, r, true);
  record(ctx.diag, g);
  return finish(ctx, theta, g.incoming.grad, cfg);
}

StepResult naive_dual_step(const Objective& obj, const ParamVector& theta, const StepBatches& b,
                           const AlignConfig& cfg, Rng& rng) {
  cfg.validate();
  StepContext ctx(obj, AlignMode::kNaiveDual);
  const auto r = resolve_batches(b, rng, cfg.split);
  const auto g = base_grads(ctx, theta, r, true);
  record(ctx.diag, g);
  return finish(ctx, theta, combine(g.incoming.grad, g.has_replay ? &g.replay.grad : nullptr, g.vtrain.grad, g.vtest.grad),
                cfg);
}

StepResult pga_exact_step(const Objective& obj, const ParamVector& theta, const StepBatches& b, const AlignConfig& cfg,
                          Rng& rng) {
  cfg.validate();
  StepContext ctx(obj, AlignMode::kPgaExact);
  const auto r = resolve_batches(b, rng, cfg.split);
  const auto g = base_grads(ctx, theta, r, true);
  record(ctx.diag, g);
  GradVector direction =
      combine(g.incoming.grad, g.has_replay ? &g.replay.grad : nullptr, g.vtrain.grad, g.vtest.grad);

  // d/dtheta (G_a . G_b) = H_a G_b + H_b G_a
  if (g.has_replay && cfg.gamma != 0.0) {
    const auto h_inc_rep = ctx.hvp_or_zero(theta, r.incoming, g.replay.grad, cfg.hvp_epsilon);
    const auto h_rep_inc = ctx.hvp_or_zero(theta, r.replay, g.incoming.grad, cfg.hvp_epsilon);
    direction += (-cfg.gamma) * (h_inc_rep + h_rep_inc);
  }
  if (cfg.beta != 0.0) {
    const auto h_tr_te = ctx.hvp_or_zero(theta, r.virtual_train, g.vtest.grad, cfg.hvp_epsilon);
    const auto h_te_tr = ctx.hvp_or_zero(theta, r.virtual_test, g.vtrain.grad, cfg.hvp_epsilon);
    direction += (-cfg.beta) * (h_tr_te + h_te_tr);
  }
  return finish(ctx, theta, std::move(direction), cfg);
}

StepResult dual_meta_step(const Objective& obj, const ParamVector& theta, const StepBatches& b, const AlignConfig& cfg,
                          Rng& rng) {
  return meta_step(obj, theta, b, cfg, rng, AlignMode::kDualMeta, {true, true});
}

StepResult orientational_only_step(const Objective& obj, const ParamVector& theta, const StepBatches& b,
                                   const AlignConfig& cfg, Rng& rng) {
  return meta_step(obj, theta, b, cfg, rng, AlignMode::kOrientationalOnly, {true, false});
}

StepResult arbitrary_only_step(const Objective& obj, const ParamVector& theta, const StepBatches& b,
                               const AlignConfig& cfg, Rng& rng) {
  return meta_step(obj, theta, b, cfg, rng, AlignMode::kArbitraryOnly, {false, true});
}

StepResult align_step(const Objective& obj, const ParamVector& theta, const StepBatches& b, const AlignConfig& cfg,
                      Rng& rng) {
  switch (cfg.mode) {
    case AlignMode::kFinetune: return finetune_step(obj, theta, b, cfg, rng);
    case AlignMode::kNaiveDual: return naive_dual_step(obj, theta, b, cfg, rng);
    case AlignMode::kPgaExact: return pga_exact_step(obj, theta, b, cfg, rng);
    case AlignMode::kDualMeta: return dual_meta_step(obj, theta, b, cfg, rng);
    case AlignMode::kOrientationalOnly: return orientational_only_step(obj, theta, b, cfg, rng);
    case AlignMode::kArbitraryOnly: return arbitrary_only_step(obj, theta, b, cfg, rng);
  }
  throw ValidationError("align_step: unknown mode");
}

}  // namespace sitecl
