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
#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "sitecl/alignment.hpp"
#include "sitecl/errors.hpp"
#include "sitecl/objective.hpp"
#include "sitecl/seg_model.hpp"

namespace sitecl {
namespace {

/// Incoming site (ids 0..5) and a shifted "replay" site (ids 6..11).
struct SegFixture {
  SiteDataset a, b;
  SegModel model;
  std::unique_ptr<SegObjective> obj;
  StepBatches batches{{0, 1, 2, 3}, {6, 7, 8, 9}};

  explicit SegFixture(std::uint64_t seed, SegArch arch = {})
      : a(make_site({1, 1.0, 0.0, 0.1, 0.0, 0.15}, 6, {8, 8}, Rng(seed))),
        b(make_site({2, -0.7, 0.1, 0.1, 0.7, 0.15}, 6, {8, 8}, Rng(seed + 100))),
        model([&] {
          Rng rng(seed + 200);
          return SegModel::init(arch, rng);
        }()) {
    auto pool = refs(a);
    const auto more = refs(b);
    pool.insert(pool.end(), more.begin(), more.end());
    obj = std::make_unique<SegObjective>(model, pool);
  }
};

AlignConfig config(double gamma, double beta, double lr = 0.05) {
  AlignConfig c;
  c.gamma = gamma;
  c.beta = beta;
  c.base_lr = lr;
  return c;
}

/// Dense symmetric positive-definite matrix with eigenvalues in [lo, hi].
std::vector<double> spd(std::size_t n, Rng& rng, double lo = 0.5, double hi = 3.0) {
  std::vector<double> m(n * n), a(n * n, 0.0);
  for (auto& v : m) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) a[i * n + j] += m[k * n + i] * m[k * n + j];
      a[i * n + j] *= (hi - lo) / (4.0 * n);
    }
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] += lo;
  return a;
}

std::vector<double> matvec(const std::vector<double>& a, const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += a[i * n + j] * v[j];
  return out;
}

GradVector random_dir(const LayoutPtr& l, Rng& rng) {
  GradVector g(l);
  for (auto& v : g.values()) v = rng.normal();
  return g;
}

TEST(AlignConfig, Validation) {
  EXPECT_NO_THROW(config(0, 0).validate());
  EXPECT_THROW(config(-1, 0).validate(), ValidationError);
  EXPECT_THROW(config(0, NAN).validate(), ValidationError);
  EXPECT_THROW(config(0, 0, 0).validate(), ValidationError);
  AlignConfig c;
  c.hvp_epsilon = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_EQ(parse_align_mode("pga-exact"), AlignMode::kPgaExact);
  EXPECT_EQ(parse_align_mode(to_string(AlignMode::kOrientationalOnly)), AlignMode::kOrientationalOnly);
  EXPECT_THROW(parse_align_mode("sideways"), ValidationError);
}

TEST(AlignConfig, DefaultsMatchReferenceValues) {
  const AlignConfig c;
  EXPECT_DOUBLE_EQ(c.gamma, 5e-5);
  EXPECT_DOUBLE_EQ(c.beta, 5e-4);
  EXPECT_DOUBLE_EQ(c.base_lr, 5e-4);
  EXPECT_DOUBLE_EQ(c.hvp_epsilon, 1e-4);
}

TEST(NaiveDual, DuplicatedReplayDoublesIncomingTerm) {
  SegFixture f(1);
  const StepBatches dup{{0, 1, 2, 3}, {0, 1, 2, 3}};
  Rng r1(5), r2(5);
  const auto res = naive_dual_step(*f.obj, f.model.params(), dup, config(0, 0), r1);
  const auto rb = resolve_batches(dup, r2, {});
  const auto gd = f.obj->evaluate(f.model.params(), rb.incoming).grad;
  const auto want =
      2.0 * gd + f.obj->evaluate(f.model.params(), rb.virtual_train).grad + f.obj->evaluate(f.model.params(), rb.virtual_test).grad;
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(res.direction[i], want[i], 1e-14);
}

TEST(NaiveDual, ZeroGradientLeavesParamsUnchanged) {
  const std::size_t n = 4;
  Rng rng(2);
  const auto a = spd(n, rng);
  const std::vector<double> c = {0.3, -1.0, 2.0, 0.5};
  const QuadraticObjective q(n, {{a, c}, {a, c}, {a, c}, {a, c}});
  const ParamVector theta(q.layout(), c);
  Rng r(1);
  const auto res = naive_dual_step(q, theta, {{0, 1}, {2, 3}}, config(0, 0), r);
  EXPECT_EQ(res.params, theta);
}

TEST(NaiveDual, SmallStepDecreasesCombinedLoss) {
  SegFixture f(3);
  Rng r1(9), r2(9);
  const auto res = naive_dual_step(*f.obj, f.model.params(), f.batches, config(0, 0, 1e-3), r1);
  const auto rb = resolve_batches(f.batches, r2, {});
  auto combined = [&](const ParamVector& p) {
    return f.obj->loss(p, rb.incoming) + f.obj->loss(p, rb.replay) + f.obj->loss(p, rb.virtual_train) +
           f.obj->loss(p, rb.virtual_test);
  };
  EXPECT_LT(combined(res.params), combined(f.model.params()));
}

TEST(NaiveDual, NonFiniteLossIsRefused) {
  const std::vector<double> a = {1.0};
  const QuadraticObjective q(1, {{a, {NAN}}, {a, {0.0}}});
  const ParamVector theta(q.layout(), {0.0});
  Rng r(1);
  EXPECT_THROW(naive_dual_step(q, theta, {{0}, {1}}, config(0, 0), r), NumericError);
}

TEST(Hvp, QuadraticClosedForm) {
  const std::size_t n = 20;
  Rng rng(4);
  const auto a = spd(n, rng);
  const QuadraticObjective q(n, {{a, std::vector<double>(n, 0.0)}});
  const auto theta = random_dir(q.layout(), rng).retag<ParamTag>();
  const auto v = random_dir(q.layout(), rng);
  const std::size_t ids[] = {0};
  const auto hv = hvp(q, theta, ids, v, 1e-4);
  const auto ref = matvec(a, v.values());
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(hv[i], ref[i], 1e-8);
}

TEST(Hvp, LinearInDirection) {
  SegFixture f(5);
  Rng rng(6);
  const auto v = random_dir(f.model.params().layout(), rng);
  const std::vector<std::size_t> ids = {0, 1};
  const auto h1 = hvp(*f.obj, f.model.params(), ids, v, 1e-4);
  const auto h3 = hvp(*f.obj, f.model.params(), ids, 3.0 * v, 1e-4);
  for (std::size_t i = 0; i < h1.size(); ++i) EXPECT_NEAR(h3[i], 3.0 * h1[i], 1e-9 + 1e-9 * std::abs(h1[i]));
}

TEST(Hvp, Symmetric) {
  SegArch arch;
  arch.hidden = {6};
  SegFixture f(7, arch);
  Rng rng(8);
  const auto u = random_dir(f.model.params().layout(), rng);
  const auto v = random_dir(f.model.params().layout(), rng);
  const std::vector<std::size_t> ids = {0, 1, 2};
  const double uhv = dot(u, hvp(*f.obj, f.model.params(), ids, v, 1e-4));
  const double vhu = dot(v, hvp(*f.obj, f.model.params(), ids, u, 1e-4));
  EXPECT_NEAR(uhv, vhu, 1e-6);
}

TEST(Hvp, ZeroVectorIsDegenerate) {
  SegFixture f(1);
  const std::vector<std::size_t> ids = {0};
  EXPECT_THROW(hvp(*f.obj, f.model.params(), ids, GradVector(f.model.params().layout()), 1e-4), DegenerateInputError);
}

TEST(PgaExact, ZeroWeightsReproduceNaiveBitForBit) {
  SegFixture f(11);
  Rng r1(3), r2(3);
  const auto p = pga_exact_step(*f.obj, f.model.params(), f.batches, config(0, 0), r1);
  const auto n = naive_dual_step(*f.obj, f.model.params(), f.batches, config(0, 0), r2);
  EXPECT_EQ(p.params.values(), n.params.values());
  EXPECT_EQ(p.direction.values(), n.direction.values());
  EXPECT_EQ(r1, r2);
}

TEST(PgaExact, DirectionMatchesFiniteDifferencesOfObjective) {
  SegArch arch;
  arch.hidden = {8, 8};
  SegFixture f(12, arch);
  ASSERT_LE(f.model.params().size(), 500u);
  const auto cfg = config(0.5, 0.5);
  Rng r1(4), r2(4);
  const auto step = pga_exact_step(*f.obj, f.model.params(), f.batches, cfg, r1);
  const auto rb = resolve_batches(f.batches, r2, cfg.split);
  const double h = 1e-5;
  std::vector<double> fd(f.model.params().size());
  ParamVector p = f.model.params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double x0 = p[i];
    p[i] = x0 + h;
    const double lp = pga_objective(*f.obj, p, rb, cfg);
    p[i] = x0 - h;
    const double lm = pga_objective(*f.obj, p, rb, cfg);
    p[i] = x0;
    fd[i] = (lp - lm) / (2 * h);
  }
  double num = 0, den = 0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    num += (step.direction[i] - fd[i]) * (step.direction[i] - fd[i]);
    den += fd[i] * fd[i];
  }
  EXPECT_LT(std::sqrt(num / den), 1e-3);
  EXPECT_EQ(step.diagnostics.hvp_evaluations, 4u);
}

/// Two quadratics with distinct centers: the incoming and replay gradients oppose each other between them.
QuadraticObjective opposing_quadratics(Rng& rng, std::size_t n = 6) {
  const auto a1 = spd(n, rng, 0.5, 4.0);
  const auto a2 = spd(n, rng, 0.5, 4.0);
  std::vector<double> c1(n), c2(n);
  for (std::size_t i = 0; i < n; ++i) {
    c1[i] = 1.0 + 0.2 * rng.normal();
    c2[i] = -1.0 + 0.2 * rng.normal();
  }
  return QuadraticObjective(n, {{a1, c1}, {a2, c2}});
}

TEST(PgaExact, AlignsBetterThanNaiveOverManySteps) {
  Rng rng(21);
  const auto q = opposing_quadratics(rng);
  const StepBatches b{{0}, {1}};
  const auto cfg = config(0.2, 0.0, 0.02);
  ParamVector tp(q.layout()), tn(q.layout());
  Rng sp(1), sn(1);
  for (int s = 0; s < 50; ++s) {
    tp = pga_exact_step(q, tp, b, cfg, sp).params;
    tn = naive_dual_step(q, tn, b, cfg, sn).params;
  }
  const std::size_t i0[] = {0}, i1[] = {1};
  auto align = [&](const ParamVector& t) { return dot(q.evaluate(t, i0).grad, q.evaluate(t, i1).grad); };
  EXPECT_GT(align(tp), align(tn));
}

TEST(PgaExact, OneStepIncreasesAlignmentOverNaive) {
  Rng rng(22);
  const auto q = opposing_quadratics(rng);
  const StepBatches b{{0}, {1}};
  const auto cfg = config(0.3, 0.0, 1e-3);
  const ParamVector theta(q.layout(), std::vector<double>(6, 0.1));
  Rng sp(2), sn(2);
  const auto p = pga_exact_step(q, theta, b, cfg, sp).params;
  const auto n = naive_dual_step(q, theta, b, cfg, sn).params;
  const std::size_t i0[] = {0}, i1[] = {1};
  auto align = [&](const ParamVector& t) { return dot(q.evaluate(t, i0).grad, q.evaluate(t, i1).grad); };
  EXPECT_GT(align(p), align(n));
}

TEST(DualMeta, ZeroWeightsReproduceNaive) {
  SegFixture f(13);
  Rng r1(3), r2(3);
  const auto d = dual_meta_step(*f.obj, f.model.params(), f.batches, config(0, 0), r1);
  const auto n = naive_dual_step(*f.obj, f.model.params(), f.batches, config(0, 0), r2);
  EXPECT_EQ(d.params.values(), n.params.values());
}

TEST(DualMeta, MatchesHandBuiltTwoStageUpdate) {
  SegFixture f(14);
  const auto cfg = config(0.3, 0.7, 0.1);
  Rng r1(8), r2(8);
  const auto d = dual_meta_step(*f.obj, f.model.params(), f.batches, cfg, r1);
  const auto rb = resolve_batches(f.batches, r2, cfg.split);
  const auto& th = f.model.params();
  const auto gd = f.obj->evaluate(th, rb.incoming).grad;
  const auto gvtr = f.obj->evaluate(th, rb.virtual_train).grad;
  const auto gp_meta = f.obj->evaluate(axpy(-0.3, gd, th), rb.replay).grad;
  const auto gvte_meta = f.obj->evaluate(axpy(-0.7, gvtr, th), rb.virtual_test).grad;
  const auto want = axpy(-0.1, gd + gp_meta + gvtr + gvte_meta, th);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(d.params[i], want[i], 1e-14);
  EXPECT_TRUE(d.diagnostics.orientational_meta_evaluated);
  EXPECT_TRUE(d.diagnostics.arbitrary_meta_evaluated);
  EXPECT_EQ(d.diagnostics.hvp_evaluations, 0u);
}

TEST(DualMeta, FirstRoundHasNoOrientationalTerm) {
  SegFixture f(15);
  const StepBatches only{{0, 1, 2, 3}, {}};
  const auto cfg = config(0.3, 0.7, 0.1);
  Rng r1(8), r2(8);
  const auto d = dual_meta_step(*f.obj, f.model.params(), only, cfg, r1);
  EXPECT_FALSE(d.diagnostics.has_replay);
  EXPECT_FALSE(d.diagnostics.orientational_meta_evaluated);
  const auto rb = resolve_batches(only, r2, cfg.split);
  for (auto i : rb.virtual_train) EXPECT_LT(i, 4u);
  for (auto i : rb.virtual_test) EXPECT_LT(i, 4u);
  const auto& th = f.model.params();
  const auto gvtr = f.obj->evaluate(th, rb.virtual_train).grad;
  const auto want = axpy(-0.1,
                         f.obj->evaluate(th, rb.incoming).grad + gvtr +
                             f.obj->evaluate(axpy(-0.7, gvtr, th), rb.virtual_test).grad,
                         th);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(d.params[i], want[i], 1e-14);
}

TEST(DualMeta, FasterPerStepThanPgaExact) {
  SegFixture f(16);
  const auto cfg = config(0.1, 0.1);
  auto time = [&](auto step) {
    Rng r(1);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 20; ++i) step(*f.obj, f.model.params(), f.batches, cfg, r);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  const double meta = time(dual_meta_step);
  const double exact = time(pga_exact_step);
  EXPECT_LT(meta, exact);
}

TEST(DualMeta, TaylorRemainderIsQuadratic) {
  SegFixture f(17);
  const auto& th = f.model.params();
  const auto gd = f.obj->evaluate(th, f.batches.incoming).grad;
  const auto lp = f.obj->evaluate(th, f.batches.replay);
  std::vector<double> gammas = {1e-2, 1e-3, 1e-4}, gap;
  for (double g : gammas)
    gap.push_back(std::abs(f.obj->loss(axpy(-g, gd, th), f.batches.replay) - (lp.value.loss - g * dot(lp.grad, gd))));
  const double slope = std::log(gap[0] / gap[2]) / std::log(gammas[0] / gammas[2]);
  EXPECT_GE(slope, 1.8);
  EXPECT_LE(slope, 2.2);
}

TEST(DualMeta, TaylorRemainderOnQuadraticIsExactSecondOrderTerm) {
  Rng rng(23);
  const auto q = opposing_quadratics(rng);
  const ParamVector th(q.layout(), std::vector<double>(6, 0.2));
  const std::size_t i0[] = {0}, i1[] = {1};
  const auto gd = q.evaluate(th, i0).grad;
  const auto lp = q.evaluate(th, i1);
  const auto h = q.hessian(i1);
  const double gamma = 0.05;
  const double residual = q.loss(axpy(-gamma, gd, th), i1) - (lp.value.loss - gamma * dot(lp.grad, gd));
  const auto hg = matvec(h, gd.values());
  double quad = 0;
  for (std::size_t i = 0; i < 6; ++i) quad += gd[i] * hg[i];
  EXPECT_NEAR(residual, 0.5 * gamma * gamma * quad, 1e-12);
}

TEST(Ablations, ZeroWeightReductionsAgree) {
  SegFixture f(18);
  Rng r1(2), r2(2), r3(2);
  const auto o = orientational_only_step(*f.obj, f.model.params(), f.batches, config(0, 0.4), r1);
  const auto a = arbitrary_only_step(*f.obj, f.model.params(), f.batches, config(0.4, 0), r2);
  const auto n = naive_dual_step(*f.obj, f.model.params(), f.batches, config(0, 0), r3);
  EXPECT_EQ(o.params.values(), n.params.values());
  EXPECT_EQ(a.params.values(), n.params.values());
}

TEST(Ablations, CodePathsAndDiagnostics) {
  SegFixture f(19);
  Rng r1(2), r2(2);
  const auto o = orientational_only_step(*f.obj, f.model.params(), f.batches, config(0.3, 0.3), r1);
  EXPECT_TRUE(o.diagnostics.orientational_meta_evaluated);
  EXPECT_FALSE(o.diagnostics.arbitrary_meta_evaluated);
  const auto a = arbitrary_only_step(*f.obj, f.model.params(), f.batches, config(0.3, 0.3), r2);
  EXPECT_FALSE(a.diagnostics.orientational_meta_evaluated);
  EXPECT_TRUE(a.diagnostics.arbitrary_meta_evaluated);
  for (const auto* d : {&o.diagnostics, &a.diagnostics}) {
    EXPECT_NE(d->dot_incoming_replay, 0.0);
    EXPECT_NE(d->dot_vtrain_vtest, 0.0);
  }
}

TEST(Finetune, UpdatesOnIncomingOnlyAndLogsEverything) {
  SegFixture f(20);
  Rng r(1);
  const auto res = finetune_step(*f.obj, f.model.params(), f.batches, config(0.3, 0.3, 0.1), r);
  const auto gd = f.obj->evaluate(f.model.params(), f.batches.incoming).grad;
  EXPECT_EQ(res.direction.values(), gd.values());
  EXPECT_TRUE(res.diagnostics.has_replay);
  EXPECT_GT(res.diagnostics.norm_replay, 0.0);
}

TEST(Diagnostics, CosinesBoundedAndFinite) {
  SegFixture f(24);
  for (auto mode : {AlignMode::kFinetune, AlignMode::kNaiveDual, AlignMode::kPgaExact, AlignMode::kDualMeta,
                    AlignMode::kOrientationalOnly, AlignMode::kArbitraryOnly}) {
    auto cfg = config(0.1, 0.1);
    cfg.mode = mode;
    Rng r(3);
    const auto res = align_step(*f.obj, f.model.params(), f.batches, cfg, r);
    EXPECT_EQ(res.diagnostics.mode, mode);
    EXPECT_TRUE(res.diagnostics.all_finite());
    EXPECT_LE(std::abs(res.diagnostics.cos_incoming_replay), 1.0);
    EXPECT_LE(std::abs(res.diagnostics.cos_vtrain_vtest), 1.0);
    const auto j = to_json(res.diagnostics);
    EXPECT_TRUE(j.contains("cos_incoming_replay"));
  }
}

}  // namespace
}  // namespace sitecl
