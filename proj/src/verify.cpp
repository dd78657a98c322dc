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
#include "sitecl/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "sitecl/alignment.hpp"
#include "sitecl/denoiser.hpp"
#include "sitecl/errors.hpp"
#include "sitecl/metrics.hpp"
#include "sitecl/objective.hpp"
#include "sitecl/seg_model.hpp"
#include "sitecl/smd.hpp"
#include "sitecl/synth_sites.hpp"

namespace sitecl {

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kFdTol = 1e-5;
constexpr std::size_t kFdCoords = 24;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

std::vector<std::size_t> pick_coords(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  for (std::size_t i = 0; i < std::min(k, n); ++i) std::swap(all[i], all[i + rng.below(n - i)]);
  all.resize(std::min(k, n));
  return all;
}

SiteDataset small_site(int id, double gain, double bias, std::size_t n, std::size_t hw, Rng rng) {
  return make_site({id, gain, bias, 0.1, 0.7, 0.15}, n, {hw, hw}, rng);
}

CheckResult seg_gradient(const VerifyOptions& o) {
  Rng rng(o.seed);
  const auto site = small_site(1, 1.0, 0.0, 4, 8, rng.split(1));
  Rng init = rng.split(2);
  const SegModel model = SegModel::init({}, init);
  const auto batch = refs(site);
  auto lg = seg_loss_and_grad(model, batch);
  std::vector<double> g(lg.grad.values().begin(), lg.grad.values().end());
  if (o.inject_gradient_bug)
    for (auto& v : g) v *= 1.01;
  const auto x = model.params().values();
  auto f = [&](std::span<const double> p) {
    ParamVector pv(model.params().layout(), std::vector<double>(p.begin(), p.end()));
    return model.loss(pv, batch).loss;
  };
  Rng pick = rng.split(3);
  const auto coords = pick_coords(x.size(), kFdCoords, pick);
  const double err = max_fd_relative_error(f, x, g, coords, kFdStep);
  return {"gradient: segmentation parameters", err < kFdTol, "max rel err " + fmt(err), 0.0};
}

struct DenoiserFixture {
  DenoiserModel model;
  Tensor noisy, mask, eps;
  std::size_t k;
  std::vector<double> prompt;
};

DenoiserFixture denoiser_fixture(std::uint64_t seed) {
  Rng rng(seed);
  DenoiserArch arch{8, 8, 8, 24, 8};
  Rng init = rng.split(1);
  auto model = DenoiserModel::init(arch, init);
  const auto site = small_site(1, 1.0, 0.0, 1, 8, rng.split(2));
  const auto sched = NoiseSchedule::linear(50);
  Rng noise = rng.split(3);
  auto d = forward_diffuse(site.images[0], 20, sched, noise);
  Rng p = rng.split(4);
  std::vector<double> prompt(arch.time_dim);
  for (auto& v : prompt) v = p.normal();
  return {std::move(model), std::move(d.noisy), site.masks[0], std::move(d.eps), 20, std::move(prompt)};
}

CheckResult denoiser_param_gradient(const VerifyOptions& o) {
  const auto fx = denoiser_fixture(o.seed);
  const auto gr = denoiser_loss_and_grads(fx.model, fx.noisy, fx.mask, fx.k, fx.prompt, fx.eps);
  const auto x = fx.model.params().values();
  auto f = [&](std::span<const double> p) {
    ParamVector pv(fx.model.params().layout(), std::vector<double>(p.begin(), p.end()));
    return denoiser_loss_and_grads(fx.model, pv, fx.noisy, fx.mask, fx.k, fx.prompt, fx.eps).value.loss;
  };
  Rng pick = Rng(o.seed).split(5);
  const auto coords = pick_coords(x.size(), kFdCoords, pick);
  const double err = max_fd_relative_error(f, x, gr.params.values(), coords, kFdStep);
  return {"gradient: denoiser parameters", err < kFdTol, "max rel err " + fmt(err), 0.0};
}

CheckResult prompt_gradient(const VerifyOptions& o) {
  const auto fx = denoiser_fixture(o.seed);
  const auto gr = denoiser_loss_and_grads(fx.model, fx.noisy, fx.mask, fx.k, fx.prompt, fx.eps);
  auto f = [&](std::span<const double> p) {
    return denoiser_loss_and_grads(fx.model, fx.noisy, fx.mask, fx.k, p, fx.eps).value.loss;
  };
  std::vector<std::size_t> coords(fx.prompt.size());
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  const double err = max_fd_relative_error(f, fx.prompt, gr.prompt, coords, kFdStep);
  return {"gradient: prompt vector", err < kFdTol, "max rel err " + fmt(err), 0.0};
}

CheckResult taylor_slope(const VerifyOptions& o) {
  const std::vector<double> gammas = {1e-2, 1e-3, 1e-4};
  double lo = 1e9, hi = -1e9;
  for (std::uint64_t draw = 0; draw < 10; ++draw) {
    Rng rng = Rng(o.seed).split({7, draw});
    const auto a = small_site(1, 1.0, 0.0, 4, 8, rng.split(1));
    const auto b = small_site(2, -0.7, 0.1, 4, 8, rng.split(2));
    Rng init = rng.split(3);
    const SegModel model = SegModel::init({}, init);
    const auto ra = refs(a), rb = refs(b);
    const auto gd = seg_loss_and_grad(model, ra).grad;
    const auto lp = seg_loss_and_grad(model, rb);
    const double lin = dot(lp.grad, gd);
    std::vector<double> err;
    for (double g : gammas) {
      const auto shifted = axpy(-g, gd, model.params());
      err.push_back(std::abs(model.loss(shifted, rb).loss - (lp.value.loss - g * lin)));
    }
    const double s = loglog_slope(gammas, err);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  const bool ok = lo >= 1.8 && hi <= 2.2;
  return {"taylor remainder slope", ok, "slopes in [" + fmt(lo) + ", " + fmt(hi) + "]", 0.0};
}

CheckResult hvp_quadratic(const VerifyOptions& o) {
  const std::size_t dim = 20;
  Rng rng = Rng(o.seed).split(11);
  std::vector<double> m(dim * dim), a(dim * dim, 0.0);
  for (auto& v : m) v = rng.normal();
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      for (std::size_t k = 0; k < dim; ++k) a[i * dim + j] += m[k * dim + i] * m[k * dim + j] / dim;
    }
  std::vector<double> c(dim, 0.0);
  const QuadraticObjective q(dim, {{a, c}});
  std::vector<double> th(dim), vv(dim);
  for (auto& v : th) v = rng.normal();
  for (auto& v : vv) v = rng.normal();
  const ParamVector theta(q.layout(), th);
  const GradVector v(q.layout(), vv);
  const std::size_t ids[] = {0};
  const auto hv = hvp(q, theta, ids, v, 1e-4);
  double err = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    double ref = 0.0;
    for (std::size_t j = 0; j < dim; ++j) ref += a[i * dim + j] * vv[j];
    err = std::max(err, std::abs(ref - hv.values()[i]));
  }
  return {"hvp on quadratic", err < 1e-6, "max abs err " + fmt(err), 0.0};
}

CheckResult diffusion_statistics(const VerifyOptions& o) {
  const auto sched = NoiseSchedule::linear(50);
  const Tensor zero({100, 100});
  double worst = 0.0;
  for (std::size_t k : {std::size_t{12}, std::size_t{25}, std::size_t{50}}) {
    Rng rng = Rng(o.seed).split({13, k});
    const auto d = forward_diffuse(zero, k, sched, rng);
    const double mean = d.noisy.mean();
    double var = 0.0;
    for (double v : d.noisy.values()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d.noisy.size() - 1);
    worst = std::max(worst, std::abs(var / (1.0 - sched.alpha_bar(k)) - 1.0));
  }
  return {"forward diffusion variance", worst < 0.05, "worst relative deviation " + fmt(worst), 0.0};
}

CheckResult metric_anchors(const VerifyOptions&) {
  std::vector<std::string> bad;
  auto expect = [&](const char* what, double got, double want) {
    if (std::abs(got - want) > 1e-12) bad.push_back(what);
  };
  Tensor truth({4, 4}), half({4, 4}), p1({1, 7}), p2({1, 7});
  for (std::size_t i = 0; i < 8; ++i) truth.data()[i] = 1.0;
  for (std::size_t i = 0; i < 4; ++i) half.data()[i] = 1.0;
  p1.data()[1] = 1.0;
  p2.data()[4] = 1.0;
  expect("dsc identical", dsc(truth, truth), 1.0);
  expect("dsc half", dsc(half, truth), 2.0 / 3.0);
  expect("dsc both empty", dsc(Tensor({4, 4}), Tensor({4, 4})), 1.0);
  expect("asd identical", asd(truth, truth), 0.0);
  expect("asd points", asd(p1, p2), 3.0);
  expect("bwt drop", bwt(AccuracyMatrix::from_rows({1, 2}, {{0.9, 0.5}, {0.6, 0.8}})), 0.7);
  expect("bwt no forgetting", bwt(AccuracyMatrix::from_rows({1, 2, 3}, {{0.8, 0.1, 0.2}, {0.8, 0.7, 0.3}, {0.9, 0.7, 0.6}})),
         1.0);
  expect("fwt", fwt(AccuracyMatrix::from_rows({1, 2, 3}, {{1, 0.9, 0.6}, {0, 1, 0.3}, {0, 0, 1}})), 0.6);
  expect("bwt+", bwt_plus(AccuracyMatrix::from_rows({1, 2}, {{1.0, 2.0}, {1.5, 1.0}})), 0.5);
  expect("bwt+ none", bwt_plus(AccuracyMatrix::from_rows({1, 2}, {{1.0, 2.0}, {0.5, 1.0}})), 0.0);
  std::string detail = bad.empty() ? "all anchors exact" : "failed:";
  for (const auto& b : bad) detail += " " + b + ";";
  return {"metric anchors", bad.empty(), detail, 0.0};
}

CheckResult pga_reduces_to_naive(const VerifyOptions& o) {
  Rng rng = Rng(o.seed).split(17);
  const auto a = small_site(1, 1.0, 0.0, 6, 8, rng.split(1));
  const auto b = small_site(2, -0.7, 0.1, 6, 8, rng.split(2));
  Rng init = rng.split(3);
  const SegModel model = SegModel::init({}, init);
  auto pool = refs(a);
  const auto more = refs(b);
  pool.insert(pool.end(), more.begin(), more.end());
  const SegObjective obj(model, pool);
  StepBatches batches{{0, 1, 2}, {6, 7, 8}};
  AlignConfig cfg;
  cfg.gamma = 0.0;
  cfg.beta = 0.0;
  cfg.base_lr = 0.1;
  Rng r1 = rng.split(4), r2 = rng.split(4);
  const auto p = pga_exact_step(obj, model.params(), batches, cfg, r1);
  const auto n = naive_dual_step(obj, model.params(), batches, cfg, r2);
  const auto pv = p.params.values(), nv = n.params.values();
  const bool same = std::equal(pv.begin(), pv.end(), nv.begin(), nv.end());
  return {"pga with zero weights equals naive dual", same, same ? "bit-identical" : "parameters differ", 0.0};
}

}  // namespace

double max_fd_relative_error(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                             std::span<const double> analytic, std::span<const std::size_t> coords, double h) {
  if (analytic.size() != x.size()) throw StructuralError("max_fd_relative_error: size mismatch");
  std::vector<double> p(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t i : coords) {
    const double x0 = p.at(i);
    p[i] = x0 + h;
    const double fp = f(p);
    p[i] = x0 - h;
    const double fm = f(p);
    p[i] = x0;
    const double num = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(num), std::abs(analytic[i]), 1e-6});
    worst = std::max(worst, std::abs(num - analytic[i]) / denom);
  }
  return worst;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("loglog_slope: need >= 2 paired points");
  double mx = 0, my = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= 0 || y[i] <= 0) throw DegenerateInputError("loglog_slope: values must be positive");
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

std::vector<CheckResult> run_verify(const VerifyOptions& opts) {
  using Check = CheckResult (*)(const VerifyOptions&);
  const Check checks[] = {seg_gradient, denoiser_param_gradient, prompt_gradient, taylor_slope, hvp_quadratic,
                          diffusion_statistics, metric_anchors, pga_reduces_to_naive};
  std::vector<CheckResult> out;
  for (Check c : checks) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = c(opts);
    } catch (const std::exception& e) {
      r = {"check", false, std::string("threw: ") + e.what(), 0.0};
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace sitecl
