#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "crme/core/error.hpp"
#include "crme/core/files.hpp"
#include "crme/core/seed.hpp"
#include "crme/nn/discriminator.hpp"
#include "crme/nn/generator.hpp"
#include "crme/training/batch.hpp"
#include "crme/training/losses.hpp"
#include "crme/training/optimizer.hpp"

namespace crme::training {

struct TrainConfig {
  double lambda = 100.0;
  double eta_g = 2e-4;
  double eta_d = 2e-4;
  int n_stop = 10;
  int batch_size = 16;  // 0 = whole dataset per update
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // epochs; 0 = final checkpoint only
  // Score the fake pair again with the freshly updated discriminator before
  // the generator step. false = reuse the scores from before the D update.
  bool rescore_after_d_step = true;
  bool shuffle = true;

  void validate() const {
    if (!(eta_g > 0.0) || !(eta_d > 0.0)) throw ValidationError("train: step sizes must be > 0");
    if (n_stop < 0) throw ValidationError("train: n_stop must be >= 0");
    if (batch_size < 0) throw ValidationError("train: batch_size must be >= 0");
    if (lambda < 0.0) throw ValidationError("train: lambda must be >= 0");
  }
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline Json to_json(const TrainConfig& c) {
  return {{"lambda", c.lambda},
          {"eta_g", c.eta_g},
          {"eta_d", c.eta_d},
          {"n_stop", c.n_stop},
          {"batch_size", c.batch_size},
          {"optimizer", std::string(to_string(c.optimizer))},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every},
          {"rescore_after_d_step", c.rescore_after_d_step},
          {"shuffle", c.shuffle}};
}

inline TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "lambda") c.lambda = v.get<double>();
    else if (key == "eta_g") c.eta_g = v.get<double>();
    else if (key == "eta_d") c.eta_d = v.get<double>();
    else if (key == "n_stop") c.n_stop = v.get<int>();
    else if (key == "batch_size") c.batch_size = v.get<int>();
    else if (key == "optimizer") c.optimizer = optimizer_from_string(v.get<std::string>());
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "checkpoint_every") c.checkpoint_every = v.get<int>();
    else if (key == "rescore_after_d_step") c.rescore_after_d_step = v.get<bool>();
    else if (key == "shuffle") c.shuffle = v.get<bool>();
    else throw ValidationError("train: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

struct EpochLog {
  int epoch = 0;
  double loss_g = 0.0;        // summed over records
  double loss_g_adversarial = 0.0;
  double loss_g_pixel = 0.0;  // the lambda-weighted term
  double loss_d = 0.0;
  double seconds = 0.0;
  double eta_g = 0.0;
  double eta_d = 0.0;
  std::optional<double> validation_nmse;
};

struct TrainLog {
  std::string optimizer;
  std::vector<EpochLog> rows;

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(10);
    out << "epoch,loss_g,loss_g_adversarial,loss_g_pixel,loss_d,seconds,eta_g,eta_d,optimizer,validation_nmse\n";
    for (const auto& r : rows) {
      out << r.epoch << ',' << r.loss_g << ',' << r.loss_g_adversarial << ',' << r.loss_g_pixel << ','
          << r.loss_d << ',' << r.seconds << ',' << r.eta_g << ',' << r.eta_d << ',' << optimizer << ',';
      if (r.validation_nmse) out << *r.validation_nmse;
      out << '\n';
    }
    return out.str();
  }
};

template <class T>
struct TrainHooks {
  std::optional<std::filesystem::path> checkpoint_dir;
  std::function<double(const nn::ModelParams<T>&)> validate;  // returns NMSE
  std::function<void(const EpochLog&)> on_epoch;
};

template <class T>
struct TrainResult {
  nn::ModelParams<T> gen;
  nn::ModelParams<T> disc;
  TrainLog log;
  long d_updates = 0;
  long g_updates = 0;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, const TrainConfig& cfg, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (cfg.shuffle) {
    Rng rng(derive_seed(cfg.seed, {0xe90c, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);
  }
  const std::size_t b = cfg.batch_size == 0 ? n : static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += b)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + b)));
  return out;
}

inline void require_finite(double v, const char* what, int epoch) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string("non-finite ") + what + " at epoch " + std::to_string(epoch));
  }
}

template <class T>
void save_pair(const std::filesystem::path& dir, const std::string& tag, const nn::Generator<T>& g,
               const nn::ModelParams<T>& gp, const nn::Discriminator<T>* d, const nn::ModelParams<T>* dp) {
  std::filesystem::create_directories(dir);
  nn::save_params(dir / ("generator_" + tag + ".bin"), gp, to_json(g.spec()));
  if (d && dp) nn::save_params(dir / ("discriminator_" + tag + ".bin"), *dp, to_json(d->spec()));
}

}  // namespace detail

/// Gradients of the summed generator loss over one batch. Exposed so the
/// update rule can be checked against finite differences.
template <class T>
GeneratorLoss generator_step_grads(const nn::Generator<T>& gen, const nn::ModelParams<T>& gp,
                                   const nn::Discriminator<T>* disc, const nn::ModelParams<T>* dp,
                                   const Batch<T>& batch, double lambda, nn::ModelParams<T>& ggrad) {
  typename nn::Generator<T>::Cache gc;
  const auto fake = gen.forward(batch.input, gp, &gc);
  GeneratorLoss loss;
  nn::Tensor<T> dfake = pixel_grad(batch.label, fake, lambda);
  loss.pixel = lambda * detail::sq_dist<T>(batch.label.values(), fake.values());
  if (disc) {
    typename nn::Discriminator<T>::Cache dc;
    const auto s_fake = disc->forward(batch.input, fake, *dp, &dc);
    loss.adversarial = detail::sq_dist_to<T>(s_fake.values(), 1.0);
    nn::Tensor<T> dadv;
    disc->backward(dc, *dp, adversarial_grad(s_fake), nullptr, &dadv);
    nn::add_inplace(dfake, dadv);
  }
  gen.backward(gc, gp, std::move(dfake), ggrad);
  return loss;
}

/// Gradients of the discriminator loss over one batch with the generator
/// output held fixed.
template <class T>
double discriminator_step_grads(const nn::Discriminator<T>& disc, const nn::ModelParams<T>& dp,
                                const Batch<T>& batch, const nn::Tensor<T>& fake, nn::ModelParams<T>& dgrad) {
  typename nn::Discriminator<T>::Cache real_c, fake_c;
  const auto s_real = disc.forward(batch.input, batch.label, dp, &real_c);
  const auto s_fake = disc.forward(batch.input, fake, dp, &fake_c);
  nn::Tensor<T> d_real, d_fake;
  loss_discriminator_grad(s_real, s_fake, d_real, d_fake);
  disc.backward(real_c, dp, d_real, &dgrad);
  disc.backward(fake_c, dp, d_fake, &dgrad);
  return loss_discriminator(s_real, s_fake);
}

/// Adversarial training: per batch, one discriminator step on
/// ||1 - S||^2 + ||S_fake||^2, then one generator step on
/// ||1 - S_fake||^2 + lambda ||P - P_fake||^2 against the frozen
/// discriminator.
template <class T>
TrainResult<T> train(std::span<const Example<T>> data, const nn::Generator<T>& gen, nn::ModelParams<T> gp,
                     const nn::Discriminator<T>& disc, nn::ModelParams<T> dp, const TrainConfig& cfg,
                     const TrainHooks<T>& hooks = {}) {
  cfg.validate();
  if (data.empty()) throw ValidationError("train: dataset is empty");
  if (!gp.same_layout(gen.layout())) throw ShapeError("train: generator params do not match spec");
  if (!dp.same_layout(disc.layout())) throw ShapeError("train: discriminator params do not match spec");

  TrainResult<T> res;
  res.log.optimizer = std::string(to_string(cfg.optimizer));
  Optimizer<T> opt_g(cfg.optimizer, cfg.eta_g, gp);
  Optimizer<T> opt_d(cfg.optimizer, cfg.eta_d, dp);
  auto ggrad = gp.zeros_like();
  auto dgrad = dp.zeros_like();

  try {
    for (int epoch = 0; epoch < cfg.n_stop; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();
      EpochLog row;
      row.epoch = epoch + 1;
      for (const auto& idx : detail::epoch_batches(data.size(), cfg, epoch)) {
        const Batch<T> batch = make_batch<T>(data, idx);

        typename nn::Generator<T>::Cache gc;
        const auto fake = gen.forward(batch.input, gp, &gc);

        dgrad.set_zero();
        typename nn::Discriminator<T>::Cache fake_c;
        const auto d_before = cfg.rescore_after_d_step ? nn::ModelParams<T>{} : dp;
        {
          typename nn::Discriminator<T>::Cache real_c;
          const auto s_real = disc.forward(batch.input, batch.label, dp, &real_c);
          const auto s_fake = disc.forward(batch.input, fake, dp, &fake_c);
          const double ld = loss_discriminator(s_real, s_fake);
          detail::require_finite(ld, "discriminator loss", epoch + 1);
          row.loss_d += ld;
          nn::Tensor<T> d_real, d_fake;
          loss_discriminator_grad(s_real, s_fake, d_real, d_fake);
          disc.backward(real_c, dp, d_real, &dgrad);
          disc.backward(fake_c, dp, d_fake, &dgrad);
        }
        opt_d.apply(dp, dgrad);
        ++res.d_updates;

        const nn::ModelParams<T>& d_used = cfg.rescore_after_d_step ? dp : d_before;
        if (cfg.rescore_after_d_step) fake_c = {};
        const auto s_fake = cfg.rescore_after_d_step ? disc.forward(batch.input, fake, dp, &fake_c)
                                                     : fake_c.outputs.back();
        const double adv = detail::sq_dist_to<T>(s_fake.values(), 1.0);
        const double pix = cfg.lambda * detail::sq_dist<T>(batch.label.values(), fake.values());
        detail::require_finite(adv + pix, "generator loss", epoch + 1);
        row.loss_g_adversarial += adv;
        row.loss_g_pixel += pix;

        nn::Tensor<T> dfake = pixel_grad(batch.label, fake, cfg.lambda);
        nn::Tensor<T> dadv;
        disc.backward(fake_c, d_used, adversarial_grad(s_fake), nullptr, &dadv);
        nn::add_inplace(dfake, dadv);
        ggrad.set_zero();
        gen.backward(gc, gp, std::move(dfake), ggrad);
        opt_g.apply(gp, ggrad);
        ++res.g_updates;
      }
      row.loss_g = row.loss_g_adversarial + row.loss_g_pixel;
      row.eta_g = cfg.eta_g;
      row.eta_d = cfg.eta_d;
      if (hooks.validate) row.validation_nmse = hooks.validate(gp);
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      res.log.rows.push_back(row);
      if (hooks.on_epoch) hooks.on_epoch(row);
      if (hooks.checkpoint_dir && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
        detail::save_pair(*hooks.checkpoint_dir, "epoch" + std::to_string(epoch + 1), gen, gp, &disc, &dp);
      }
    }
  } catch (const NumericError&) {
    if (hooks.checkpoint_dir) detail::save_pair(*hooks.checkpoint_dir, "diagnostic", gen, gp, &disc, &dp);
    throw;
  }
  if (hooks.checkpoint_dir) detail::save_pair(*hooks.checkpoint_dir, "final", gen, gp, &disc, &dp);
  res.gen = std::move(gp);
  res.disc = std::move(dp);
  return res;
}

/// Ablation without the discriminator: minimises lambda ||P - P_fake||^2 only.
template <class T>
TrainResult<T> train_l2_only(std::span<const Example<T>> data, const nn::Generator<T>& gen,
                             nn::ModelParams<T> gp, const TrainConfig& cfg, const TrainHooks<T>& hooks = {}) {
  cfg.validate();
  if (data.empty()) throw ValidationError("train: dataset is empty");
  if (!gp.same_layout(gen.layout())) throw ShapeError("train: generator params do not match spec");
  TrainResult<T> res;
  res.log.optimizer = std::string(to_string(cfg.optimizer));
  Optimizer<T> opt_g(cfg.optimizer, cfg.eta_g, gp);
  auto ggrad = gp.zeros_like();
  for (int epoch = 0; epoch < cfg.n_stop; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochLog row;
    row.epoch = epoch + 1;
    for (const auto& idx : detail::epoch_batches(data.size(), cfg, epoch)) {
      const Batch<T> batch = make_batch<T>(data, idx);
      ggrad.set_zero();
      const auto loss = generator_step_grads<T>(gen, gp, nullptr, nullptr, batch, cfg.lambda, ggrad);
      detail::require_finite(loss.total(), "generator loss", epoch + 1);
      row.loss_g_pixel += loss.pixel;
      opt_g.apply(gp, ggrad);
      ++res.g_updates;
    }
    row.loss_g = row.loss_g_pixel;
    row.eta_g = cfg.eta_g;
    if (hooks.validate) row.validation_nmse = hooks.validate(gp);
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.log.rows.push_back(row);
    if (hooks.on_epoch) hooks.on_epoch(row);
    if (hooks.checkpoint_dir && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
      detail::save_pair<T>(*hooks.checkpoint_dir, "epoch" + std::to_string(epoch + 1), gen, gp, nullptr, nullptr);
    }
  }
  if (hooks.checkpoint_dir) detail::save_pair<T>(*hooks.checkpoint_dir, "final", gen, gp, nullptr, nullptr);
  res.gen = std::move(gp);
  return res;
}

}  // namespace crme::training
