// Copyright 2026 The cvdetect Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "cvdetect/attacks/config.hpp"
#include "cvdetect/core/rng.hpp"
#include "cvdetect/detector/recon.hpp"
#include "cvdetect/models/classifier.hpp"

namespace cvdetect {

/// Attacks process inputs in fixed-size batches; each batch owns an RNG stream keyed by its index.
inline constexpr std::size_t kAttackBatch = 128;

template <typename T>
struct AttackResult {
  Tensor<T> x_adv;
  std::vector<std::uint8_t> success;  ///< untargeted: pred != y; targeted: pred == target
  std::vector<double> norms;          ///< ||x_adv - x|| in the attack's norm
  std::vector<int> predictions;
  std::vector<int> targets;  ///< empty for untargeted attacks

  std::size_t size() const noexcept { return success.size(); }
  double success_rate() const {
    if (success.empty()) return 0.0;
    return static_cast<double>(std::count(success.begin(), success.end(), 1)) / static_cast<double>(success.size());
  }
};

template <typename T>
void clamp_unit(Tensor<T>& x) {
  for (auto& v : x.storage()) v = std::clamp(v, T{0}, T{1});
}

template <typename T>
std::vector<double> perturbation_norms(const Tensor<T>& x_adv, const Tensor<T>& x, Norm norm) {
  if (x_adv.shape() != x.shape()) throw ArgumentError("perturbation: shape mismatch");
  const std::size_t n = x.batch(), k = x.sample_size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double r = double(x_adv[i * k + j]) - double(x[i * k + j]);
      acc = norm == Norm::kL2 ? acc + r * r : std::max(acc, std::abs(r));
    }
    out[i] = norm == Norm::kL2 ? std::sqrt(acc) : acc;
  }
  return out;
}

/// Project `x_adv` onto the eps-ball around `x`, then onto the valid pixel range [0,1].
template <typename T>
void clip_to_ball(Tensor<T>& x_adv, const Tensor<T>& x, double eps, Norm norm) {
  if (x_adv.shape() != x.shape()) throw ArgumentError("clip_to_ball: shape mismatch");
  if (!(eps >= 0)) throw ArgumentError("clip_to_ball: eps must be >= 0");
  const std::size_t n = x.batch(), k = x.sample_size();
  const T e = static_cast<T>(eps);
  if (norm == Norm::kLinf) {
    for (std::size_t i = 0; i < x.size(); ++i) x_adv[i] = std::clamp(x_adv[i], x[i] - e, x[i] + e);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double sq = 0;
      for (std::size_t j = 0; j < k; ++j) {
        const double r = double(x_adv[i * k + j]) - double(x[i * k + j]);
        sq += r * r;
      }
      const double len = std::sqrt(sq);
      if (len <= eps) continue;
      const double s = eps / len;
      for (std::size_t j = 0; j < k; ++j)
        x_adv[i * k + j] = static_cast<T>(double(x[i * k + j]) + s * (double(x_adv[i * k + j]) - double(x[i * k + j])));
    }
  }
  clamp_unit(x_adv);
}

/// Gradient of a scalar loss w.r.t. its input. `loss_fn(x)` returns nn::LossAndGrad.
template <typename T, typename LossFn>
Tensor<T> grad_wrt_input(LossFn&& loss_fn, const Tensor<T>& x) {
  auto g = std::forward<LossFn>(loss_fn)(x).grad;
  if (!g.all_finite()) throw NumericError("input gradient is not finite");
  return g;
}

/// Steepest-ascent unit step: sign(g) for linf, g/||g||_2 for l2. Marks samples whose gradient is zero.
template <typename T>
Tensor<T> step_direction(const Tensor<T>& g, Norm norm, std::vector<std::uint8_t>* zero = nullptr) {
  const std::size_t n = g.batch(), k = g.sample_size();
  Tensor<T> d(g.shape());
  if (zero) zero->assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0;
    for (std::size_t j = 0; j < k; ++j) sq += double(g[i * k + j]) * double(g[i * k + j]);
    if (zero && sq == 0.0) (*zero)[i] = 1;
    if (norm == Norm::kLinf) {
      for (std::size_t j = 0; j < k; ++j) {
        const T v = g[i * k + j];
        d[i * k + j] = v > T{0} ? T{1} : (v < T{0} ? T{-1} : T{0});
      }
    } else if (sq > 0.0) {
      const double inv = 1.0 / std::sqrt(sq);
      for (std::size_t j = 0; j < k; ++j) d[i * k + j] = static_cast<T>(double(g[i * k + j]) * inv);
    }
  }
  return d;
}

/// One target per sample, drawn uniformly from the classes other than its label.
inline std::vector<int> choose_targets(std::span<const int> y, std::uint64_t seed, int num_classes = kNumClasses) {
  if (num_classes < 2) throw ArgumentError("targeted attacks need at least two classes");
  Rng rng(derive_seed(seed, "targets"));
  std::vector<int> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) t[i] = (y[i] + 1 + int(rng.integer(0, num_classes - 2))) % num_classes;
  return t;
}

namespace detail {

template <typename T>
void check_attack_inputs(const ClassifierModel<T>& m, const Tensor<T>& x, std::span<const int> y,
                         std::span<const int> targets) {
  check_image_batch(x);
  if (x.dim(1) != m.channels) throw ArgumentError("attack input channels do not match the classifier");
  if (y.size() != x.batch()) throw ArgumentError("one label per input required");
  if (!targets.empty() && targets.size() != x.batch()) throw ArgumentError("one target per input required");
}

/// Apply `fn(xb, yb, tb, batch_index)` batch by batch and stitch the adversarial images back together.
template <typename T, typename Fn>
Tensor<T> batched(const Tensor<T>& x, std::span<const int> y, std::span<const int> targets, Fn&& fn) {
  Tensor<T> out(x.shape());
  const std::size_t k = x.sample_size();
  for (std::size_t b = 0, bi = 0; b < x.batch(); b += kAttackBatch, ++bi) {
    const std::size_t e = std::min(x.batch(), b + kAttackBatch);
    const auto xb = x.slice(b, e);
    const auto yb = y.subspan(b, e - b);
    const auto tb = targets.empty() ? targets : targets.subspan(b, e - b);
    const Tensor<T> adv = fn(xb, yb, tb, bi);
    std::copy_n(adv.ptr(), adv.size(), out.ptr() + b * k);
  }
  return out;
}

template <typename T>
AttackResult<T> finalize(const ClassifierModel<T>& m, const Tensor<T>& x, Tensor<T> x_adv, std::span<const int> y,
                         std::vector<int> targets, Norm norm, const std::vector<std::uint8_t>& forced_fail = {}) {
  AttackResult<T> r;
  r.predictions = classifier_predict(m, x_adv);
  r.norms = perturbation_norms(x_adv, x, norm);
  r.success.resize(x.batch());
  for (std::size_t i = 0; i < x.batch(); ++i) {
    const bool hit = targets.empty() ? r.predictions[i] != y[i] : r.predictions[i] == targets[i];
    r.success[i] = hit && (forced_fail.empty() || !forced_fail[i]);
  }
  r.x_adv = std::move(x_adv);
  r.targets = std::move(targets);
  return r;
}

template <typename T>
Tensor<T> uniform_noise_start(const Tensor<T>& x, double radius, Rng& rng) {
  Tensor<T> out = x;
  for (auto& v : out.storage()) v += static_cast<T>(rng.uniform(-radius, radius));
  clamp_unit(out);
  return out;
}

/// Iterated signed/normalized gradient steps with projection. direction +1 ascends, -1 descends.
template <typename T, typename GradFn>
Tensor<T> iterate_projected(const Tensor<T>& x, double eps, double alpha, int steps, Norm norm, int direction,
                            GradFn&& grad) {
  Tensor<T> xk = x;
  const T a = static_cast<T>(alpha) * static_cast<T>(direction);
  for (int it = 0; it < steps; ++it) {
    const auto d = step_direction(grad(xk), norm);
    for (std::size_t i = 0; i < xk.size(); ++i) xk[i] += a * d[i];
    clip_to_ball(xk, x, eps, norm);
  }
  return xk;
}

}  // namespace detail

/// Uniform noise in the linf ball: clamp(x + U(-eps, eps)).
template <typename T>
AttackResult<T> attack_random(const ClassifierModel<T>& m, const Tensor<T>& x, std::span<const int> y, double eps,
                              std::uint64_t seed) {
  detail::check_attack_inputs(m, x, y, {});
  if (!(eps >= 0)) throw ArgumentError("eps must be >= 0");
  const auto stream = derive_seed(seed, "random");
  auto adv = detail::batched(x, y, {}, [&](const Tensor<T>& xb, auto, auto, std::size_t bi) {
    Rng rng(derive_seed(stream, std::uint64_t(bi)));
    return detail::uniform_noise_start(xb, eps, rng);
  });
  return detail::finalize(m, x, std::move(adv), y, {}, Norm::kLinf);
}

/// Single gradient step of size eps. Samples with an all-zero gradient are left unchanged and count as failures.
template <typename T>
AttackResult<T> attack_fgsm(const ClassifierModel<T>& m, const Tensor<T>& x, std::span<const int> y, double eps,
                            Norm norm) {
  detail::check_attack_inputs(m, x, y, {});
  std::vector<std::uint8_t> zero_all(x.batch(), 0);
  std::size_t offset = 0;
  auto adv = detail::batched(x, y, {}, [&](const Tensor<T>& xb, std::span<const int> yb, auto, std::size_t) {
    std::vector<std::uint8_t> zero;
    const auto d = step_direction(
        grad_wrt_input([&](const Tensor<T>& v) { return classifier_loss_input_grad(m, v, yb); }, xb), norm, &zero);
    Tensor<T> out = xb;
    const T e = static_cast<T>(eps);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += e * d[i];
    clamp_unit(out);
    std::copy(zero.begin(), zero.end(), zero_all.begin() + offset);
    offset += xb.batch();
    return out;
  });
  return detail::finalize(m, x, std::move(adv), y, {}, norm, zero_all);
}

/// Random start in the linf box of radius eps_rand, one FGSM step of size eps, projection to the eps-ball around x.
template <typename T>
AttackResult<T> attack_rfgsm(const ClassifierModel<T>& m, const Tensor<T>& x, std::span<const int> y, double eps,
                             double eps_rand, Norm norm, std::uint64_t seed) {
  detail::check_attack_inputs(m, x, y, {});
  const auto stream = derive_seed(seed, "rfgsm");
  auto adv = detail::batched(x, y, {}, [&](const Tensor<T>& xb, std::span<const int> yb, auto, std::size_t bi) {
    Rng rng(derive_seed(stream, std::uint64_t(bi)));
    Tensor<T> out = detail::uniform_noise_start(xb, eps_rand, rng);
    const auto d = step_direction(
        grad_wrt_input([&](const Tensor<T>& v) { return classifier_loss_input_grad(m, v, yb); }, out), norm);
    const T e = static_cast<T>(eps);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += e * d[i];
    clip_to_ball(out, xb, eps, norm);
    return out;
  });
  return detail::finalize(m, x, std::move(adv), y, {}, norm);
}

/// Projected gradient descent from x (no random start). With `targets`, descends the cross-entropy of the target.
template <typename T>
AttackResult<T> attack_pgd(const ClassifierModel<T>& m, const Tensor<T>& x, std::span<const int> y, double eps,
                           double alpha, int steps, Norm norm, std::vector<int> targets = {}) {
  detail::check_attack_inputs(m, x, y, targets);
  if (steps < 1 || !(alpha > 0)) throw ArgumentError("PGD needs steps >= 1 and alpha > 0");
  const std::span<const int> ts(targets);
  auto adv = detail::batched(x, y, ts, [&](const Tensor<T>& xb, std::span<const int> yb, std::span<const int> tb,
                                           std::size_t) {
    const bool targeted = !tb.empty();
    const auto labels = targeted ? tb : yb;
    return detail::iterate_projected(xb, eps, alpha, steps, norm, targeted ? -1 : 1, [&](const Tensor<T>& v) {
      return grad_wrt_input([&](const Tensor<T>& u) { return classifier_loss_input_grad(m, u, labels); }, v);
    });
  });
  return detail::finalize(m, x, std::move(adv), y, std::move(targets), norm);
}

/// Targeted PGD against classifier and detector jointly:
/// descend (1 - sigma) CE(f(x), t) + sigma ||x - D(E(x, t), t)||^2.
template <typename T>
AttackResult<T> attack_whitebox_pgd(const ClassifierModel<T>& m, const CVAEModel<T>& cvae, const Tensor<T>& x,
                                    std::span<const int> y, double eps, double alpha, int steps, double sigma,
                                    std::vector<int> targets, Norm norm = Norm::kLinf) {
  detail::check_attack_inputs(m, x, y, targets);
  if (targets.size() != x.batch()) throw ArgumentError("white-box attack needs one target per input");
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw ArgumentError("sigma must lie in [0,1]");
  if (steps < 1 || !(alpha > 0)) throw ArgumentError("PGD needs steps >= 1 and alpha > 0");
  const std::span<const int> ts(targets);
  auto adv = detail::batched(x, y, ts, [&](const Tensor<T>& xb, auto, std::span<const int> tb, std::size_t) {
    return detail::iterate_projected(xb, eps, alpha, steps, norm, -1, [&](const Tensor<T>& v) {
      auto ce = [&](const Tensor<T>& u) { return classifier_loss_input_grad(m, u, tb); };
      if (sigma == 0.0) return grad_wrt_input(ce, v);
      auto g_rec = recon_distance_input_grad(cvae, v, tb).grad;
      if (!g_rec.all_finite()) throw NumericError("detector gradient is not finite");
      if (sigma == 1.0) return g_rec;
      auto g = grad_wrt_input(ce, v);
      const T a = static_cast<T>(1.0 - sigma), b = static_cast<T>(sigma);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = a * g[i] + b * g_rec[i];
      return g;
    });
  });
  return detail::finalize(m, x, std::move(adv), y, std::move(targets), norm);
}

namespace detail {

template <typename T>
Tensor<T> cw_batch(const ClassifierModel<T>& m, const Tensor<T>& x, std::span<const int> y,
                   std::span<const int> targets, const CwParams& p) {
  const std::size_t n = x.batch(), k = x.sample_size();
  const bool targeted = !targets.empty();
  const double kappa = p.confidence;
  Tensor<T> w0(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    w0[i] = static_cast<T>(std::atanh(std::clamp((2.0 * double(x[i]) - 1.0) * 0.999999, -0.999999, 0.999999)));
  std::vector<double> lower(n, 0.0), upper(n, 1e10), c(n, p.c_init), best_l2(n, std::numeric_limits<double>::infinity());
  Tensor<T> best = x;
  const int check_every = std::max(1, p.max_iter / 10);

  for (int step = 0; step < p.binary_search_steps; ++step) {
    Tensor<T> w = w0, m1(x.shape()), m2(x.shape()), xa(x.shape());
    std::vector<std::uint8_t> hit(n, 0);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < p.max_iter; ++it) {
      for (std::size_t i = 0; i < w.size(); ++i) xa[i] = static_cast<T>((std::tanh(double(w[i])) + 1.0) * 0.5);
      nn::Tape<T> tape;
      const auto z = m.net.forward(xa, nn::Mode::kEval, &tape);
      const std::size_t nc = z.dim(1);
      Tensor<T> gz(z.shape());
      double total = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const int lab = targeted ? targets[i] : y[i];
        double l2 = 0;
        for (std::size_t j = 0; j < k; ++j) {
          const double r = double(xa[i * k + j]) - double(x[i * k + j]);
          l2 += r * r;
        }
        int other = -1;
        for (std::size_t j = 0; j < nc; ++j)
          if (int(j) != lab && (other < 0 || z[i * nc + j] > z[i * nc + other])) other = int(j);
        const double real = z[i * nc + lab], oth = z[i * nc + other];
        const double margin = targeted ? oth - real + kappa : real - oth + kappa;
        const double f = std::max(margin, 0.0);
        total += l2 + c[i] * f;
        // success under the confidence margin: the adversarial class wins by at least kappa
        const bool ok = targeted ? oth - real + kappa <= 0.0 && oth < real : real - oth + kappa <= 0.0 && real < oth;
        if (ok) {
          hit[i] = 1;
          if (l2 < best_l2[i]) {
            best_l2[i] = l2;
            std::copy_n(xa.ptr() + i * k, k, best.ptr() + i * k);
          }
        }
        if (margin > 0.0) {
          const T s = static_cast<T>(c[i]);
          gz[i * nc + lab] += targeted ? -s : s;
          gz[i * nc + other] += targeted ? s : -s;
        }
      }
      if (!std::isfinite(total)) throw NumericError("CW objective is not finite");
      if (p.abort_early && it % check_every == 0) {
        if (total > prev * 0.9999) break;
        prev = total;
      }
      auto gx = m.net.backward(gz, tape);
      const double b1 = 0.9, b2 = 0.999, t = it + 1;
      const double corr = std::sqrt(1.0 - std::pow(b2, t)) / (1.0 - std::pow(b1, t));
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double th = std::tanh(double(w[i]));
        const double g = (double(gx[i]) + 2.0 * (double(xa[i]) - double(x[i]))) * (1.0 - th * th) * 0.5;
        m1[i] = static_cast<T>(b1 * m1[i] + (1 - b1) * g);
        m2[i] = static_cast<T>(b2 * m2[i] + (1 - b2) * g * g);
        w[i] = static_cast<T>(w[i] - p.lr * corr * m1[i] / (std::sqrt(double(m2[i])) + 1e-8));
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (hit[i]) {
        upper[i] = std::min(upper[i], c[i]);
        if (upper[i] < 1e9) c[i] = (lower[i] + upper[i]) / 2;
      } else {
        lower[i] = std::max(lower[i], c[i]);
        c[i] = upper[i] < 1e9 ? (lower[i] + upper[i]) / 2 : c[i] * 10;
      }
    }
  }
  return best;
}

template <typename T>
Tensor<T> deepfool_batch(const ClassifierModel<T>& m, const Tensor<T>& x, std::span<const int> y,
                         const DeepFoolParams& p) {
  const std::size_t n = x.batch(), k = x.sample_size();
  Tensor<T> xi = x;
  std::vector<double> r_tot(n * k, 0.0);
  std::vector<std::size_t> active(n);
  std::iota(active.begin(), active.end(), std::size_t{0});
  for (int iter = 0; iter <= p.max_iter && !active.empty(); ++iter) {
    const auto xa = xi.gather(active);
    nn::Tape<T> tape;
    const auto z = m.net.forward(xa, nn::Mode::kEval, &tape);
    const std::size_t na = active.size(), nc = z.dim(1);
    std::vector<std::size_t> still;
    for (std::size_t a = 0; a < na; ++a)
      if (argmax_rows(z.slice(a, a + 1))[0] == y[active[a]]) still.push_back(a);
    if (still.empty() || iter == p.max_iter) break;
    std::vector<Tensor<T>> grads;
    grads.reserve(nc);
    for (std::size_t j = 0; j < nc; ++j) {
      Tensor<T> onehot(z.shape());
      for (std::size_t a : still) onehot[a * nc + j] = T{1};
      grads.push_back(m.net.backward(onehot, tape));
    }
    std::vector<std::size_t> next;
    for (std::size_t a : still) {
      const std::size_t i = active[a];
      const int lab = y[i];
      double best = std::numeric_limits<double>::infinity();
      std::vector<double> w_best;
      for (std::size_t j = 0; j < nc; ++j) {
        if (int(j) == lab) continue;
        std::vector<double> wj(k);
        double sq = 0;
        for (std::size_t q = 0; q < k; ++q) {
          wj[q] = double(grads[j][a * k + q]) - double(grads[lab][a * k + q]);
          const double cur = double(xi[i * k + q]);
          if ((cur <= 0.0 && wj[q] < 0.0) || (cur >= 1.0 && wj[q] > 0.0)) wj[q] = 0.0;
          sq += wj[q] * wj[q];
        }
        if (sq == 0.0) continue;
        const double pert = std::abs(double(z[a * nc + j]) - double(z[a * nc + lab])) / std::sqrt(sq);
        if (pert < best) {
          best = pert;
          for (auto& v : wj) v /= std::sqrt(sq);
          w_best = std::move(wj);
        }
      }
      if (w_best.empty()) continue;
      for (std::size_t q = 0; q < k; ++q) {
        r_tot[i * k + q] += best * w_best[q];
        xi[i * k + q] = static_cast<T>(std::clamp(double(x[i * k + q]) + (1.0 + p.overshoot) * r_tot[i * k + q], 0.0, 1.0));
      }
      next.push_back(i);
    }
    active = std::move(next);
  }
  return xi;
}

}  // namespace detail

/// L2 Carlini-Wagner attack in tanh space with a per-sample binary search over c. Failures return x unchanged.
template <typename T>
AttackResult<T> attack_cw(const ClassifierModel<T>& m, const Tensor<T>& x, std::span<const int> y,
                          const CwParams& p = {}, std::vector<int> targets = {}) {
  detail::check_attack_inputs(m, x, y, targets);
  const std::span<const int> ts(targets);
  auto adv = detail::batched(x, y, ts, [&](const Tensor<T>& xb, std::span<const int> yb, std::span<const int> tb,
                                           std::size_t) { return detail::cw_batch(m, xb, yb, tb, p); });
  return detail::finalize(m, x, std::move(adv), y, std::move(targets), Norm::kL2);
}

/// Multi-class DeepFool. Linearised steps use only coordinates free to move inside [0,1].
/// Inputs already misclassified are returned unchanged.
template <typename T>
AttackResult<T> attack_deepfool(const ClassifierModel<T>& m, const Tensor<T>& x, std::span<const int> y,
                                const DeepFoolParams& p = {}) {
  detail::check_attack_inputs(m, x, y, {});
  auto adv = detail::batched(x, y, {}, [&](const Tensor<T>& xb, std::span<const int> yb, auto, std::size_t) {
    return detail::deepfool_batch(m, xb, yb, p);
  });
  return detail::finalize(m, x, std::move(adv), y, {}, Norm::kL2);
}

/// Dispatch on `cfg.kind`. `cvae` is required for whitebox_pgd only.
template <typename T>
AttackResult<T> run_attack(const AttackConfig& cfg, const ClassifierModel<T>& m, const CVAEModel<T>* cvae,
                           const Tensor<T>& x, std::span<const int> y) {
  cfg.validate();
  std::vector<int> targets;
  if (cfg.targeted()) targets = choose_targets(y, cfg.seed, int(m.num_classes));
  switch (cfg.kind) {
    case AttackKind::kRandom: return attack_random(m, x, y, cfg.eps, cfg.seed);
    case AttackKind::kFgsm: return attack_fgsm(m, x, y, cfg.eps, cfg.norm);
    case AttackKind::kRfgsm: return attack_rfgsm(m, x, y, cfg.eps, cfg.eps_rand, cfg.norm, cfg.seed);
    case AttackKind::kPgd:
      return attack_pgd(m, x, y, cfg.eps, cfg.alpha, cfg.resolved_iterations(), cfg.norm, std::move(targets));
    case AttackKind::kCw: return attack_cw(m, x, y, cfg.cw, std::move(targets));
    case AttackKind::kDeepfool: return attack_deepfool(m, x, y, cfg.df);
    case AttackKind::kWhiteboxPgd:
      if (!cvae) throw StateError("whitebox_pgd needs a trained CVAE");
      return attack_whitebox_pgd(m, *cvae, x, y, cfg.eps, cfg.alpha, cfg.resolved_iterations(), cfg.sigma,
                                 std::move(targets), cfg.norm);
  }
  throw ArgumentError("unknown attack kind");
}

}  // namespace cvdetect
