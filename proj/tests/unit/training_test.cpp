#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "crme/dataset/builder.hpp"
#include "crme/nn/discriminator.hpp"
#include "crme/nn/generator.hpp"
#include "crme/nn/params.hpp"
#include "crme/training/trainer.hpp"

namespace crme::training {
namespace {

using nn::Tensor;

nn::GeneratorSpec tiny_generator() {
  return {.in_channels = 2, .depth = 1, .base_channels = 4, .max_channels = 16, .kernel_size = 3};
}

nn::DiscriminatorSpec tiny_discriminator() {
  return {.in_channels = 3, .layers = 2, .base_channels = 4, .max_channels = 16, .kernel_size = 4,
          .strided_layers = 1, .late_concat = 2};
}

std::vector<Example<double>> tiny_examples(int n, std::uint64_t seed) {
  dataset::DatasetConfig dc;
  dc.num_records = n;
  dc.seed = seed;
  dc.city.width = dc.city.height = 8;
  dc.city.min_side = 2;
  dc.city.max_side = 3;
  dc.city.min_buildings = dc.city.max_buildings = 1;
  dc.city.min_gap = 1;
  dc.users = {3, 6};
  std::vector<dataset::SampleRecord> recs;
  for (int i = 0; i < n; ++i) recs.push_back(dataset::synthesize_record(dc, i));
  return to_examples<double>(recs);
}

Batch<double> whole_batch(const std::vector<Example<double>>& ex) {
  std::vector<std::size_t> idx(ex.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return make_batch<double>(ex, idx);
}

TEST(Losses, HandExamples) {
  EXPECT_NEAR(loss_discriminator(Tensor<double>(1, 1, 2, 2, 0.0), Tensor<double>(1, 1, 2, 2, 1.0)), 8.0, 1e-12);
  EXPECT_NEAR(loss_discriminator(Tensor<double>(1, 1, 1, 1, 0.5), Tensor<double>(1, 1, 1, 1, 0.5)), 0.5, 1e-12);
  EXPECT_NEAR(loss_generator(Tensor<double>(1, 1, 1, 1, 0.5), Tensor<double>(1, 1, 1, 1, 1.0),
                             Tensor<double>(1, 1, 1, 1, 0.0), 2.0),
              2.25, 1e-12);
  EXPECT_EQ(loss_discriminator(Tensor<double>(1, 1, 2, 2, 1.0), Tensor<double>(1, 1, 2, 2, 0.0)), 0.0);
}

TEST(Losses, ErrorsOnShapeAndNegativeLambda) {
  EXPECT_THROW(loss_discriminator(Tensor<double>(1, 1, 2, 2), Tensor<double>(1, 1, 1, 2)), ShapeError);
  EXPECT_THROW(loss_generator(Tensor<double>(1, 1, 1, 1), Tensor<double>(1, 1, 1, 1), Tensor<double>(1, 1, 1, 1), -1.0),
               ValidationError);
}

TEST(Losses, GeneratorLossIsAffineInLambda) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<double> s(1, 1, 2, 2), p(1, 1, 3, 3), q(1, 1, 3, 3);
  for (auto* t : {&s, &p, &q})
    for (auto& v : t->values()) v = u(rng);
  const double l0 = loss_generator(s, p, q, 0.0), l1 = loss_generator(s, p, q, 1.0);
  for (double lam : {0.5, 3.0, 100.0}) EXPECT_NEAR(loss_generator(s, p, q, lam), l0 + lam * (l1 - l0), 1e-9);
}

TEST(SingleStep, SmallDiscriminatorStepLowersItsLoss) {
  const auto ex = tiny_examples(2, 3);
  const auto batch = whole_batch(ex);
  const nn::Generator<double> gen(tiny_generator());
  const nn::Discriminator<double> disc(tiny_discriminator());
  const auto gp = gen.init_params(1);
  const auto dp = disc.init_params(2);
  const auto fake = gen.forward(batch.input, gp);
  auto grad = dp.zeros_like();
  const double before = discriminator_step_grads(disc, dp, batch, fake, grad);
  bool decreased = false;
  for (double eta = 1e-1; eta > 1e-12 && !decreased; eta /= 2) {
    auto moved = dp;
    Optimizer<double>(OptimizerKind::plain, eta, moved).apply(moved, grad);
    decreased = loss_discriminator(disc.forward(batch.input, batch.label, moved), disc.forward(batch.input, fake, moved)) <
                before;
  }
  EXPECT_TRUE(decreased);
}

TEST(SingleStep, SmallGeneratorStepLowersItsLoss) {
  const auto ex = tiny_examples(2, 3);
  const auto batch = whole_batch(ex);
  const nn::Generator<double> gen(tiny_generator());
  const nn::Discriminator<double> disc(tiny_discriminator());
  const auto gp = gen.init_params(1);
  const auto dp = disc.init_params(2);
  auto grad = gp.zeros_like();
  const double before = generator_step_grads(gen, gp, &disc, &dp, batch, 10.0, grad).total();
  bool decreased = false;
  for (double eta = 1e-1; eta > 1e-12 && !decreased; eta /= 2) {
    auto moved = gp;
    Optimizer<double>(OptimizerKind::plain, eta, moved).apply(moved, grad);
    const auto est = gen.forward(batch.input, moved);
    decreased = loss_generator(disc.forward(batch.input, est, dp), batch.label, est, 10.0) < before;
  }
  EXPECT_TRUE(decreased);
}

TEST(Train, ZeroEpochsReturnsInitialParams) {
  const auto ex = tiny_examples(2, 5);
  const nn::Generator<double> gen(tiny_generator());
  const nn::Discriminator<double> disc(tiny_discriminator());
  TrainConfig cfg;
  cfg.n_stop = 0;
  const auto res = train<double>(ex, gen, gen.init_params(1), disc, disc.init_params(2), cfg);
  EXPECT_EQ(res.gen, gen.init_params(1));
  EXPECT_TRUE(res.log.rows.empty());
}

TEST(Train, FullBatchMakesOneUpdateOfEachPerEpoch) {
  const auto ex = tiny_examples(3, 6);
  const nn::Generator<double> gen(tiny_generator());
  const nn::Discriminator<double> disc(tiny_discriminator());
  TrainConfig cfg;
  cfg.n_stop = 2;
  cfg.batch_size = 0;
  const auto res = train<double>(ex, gen, gen.init_params(1), disc, disc.init_params(2), cfg);
  EXPECT_EQ(res.d_updates, 2);
  EXPECT_EQ(res.g_updates, 2);
  cfg.batch_size = 2;
  const auto mini = train<double>(ex, gen, gen.init_params(1), disc, disc.init_params(2), cfg);
  EXPECT_EQ(mini.g_updates, 4);
}

TEST(Train, RejectsEmptyDataAndMismatchedParams) {
  const nn::Generator<double> gen(tiny_generator());
  const nn::Discriminator<double> disc(tiny_discriminator());
  const std::vector<Example<double>> none;
  EXPECT_THROW(train<double>(none, gen, gen.init_params(1), disc, disc.init_params(2), {}), ValidationError);
  const auto ex = tiny_examples(1, 1);
  EXPECT_THROW(train<double>(ex, gen, disc.init_params(2), disc, disc.init_params(2), {}), ShapeError);
}

TEST(Train, DeterministicUnderSeed) {
  const auto ex = tiny_examples(3, 7);
  const nn::Generator<double> gen(tiny_generator());
  const nn::Discriminator<double> disc(tiny_discriminator());
  TrainConfig cfg;
  cfg.n_stop = 2;
  cfg.batch_size = 1;
  cfg.seed = 9;
  const auto a = train<double>(ex, gen, gen.init_params(1), disc, disc.init_params(2), cfg);
  const auto b = train<double>(ex, gen, gen.init_params(1), disc, disc.init_params(2), cfg);
  EXPECT_EQ(a.gen, b.gen);
  EXPECT_EQ(a.disc, b.disc);
  const auto l2a = train_l2_only<double>(ex, gen, gen.init_params(1), cfg);
  const auto l2b = train_l2_only<double>(ex, gen, gen.init_params(1), cfg);
  EXPECT_EQ(l2a.gen, l2b.gen);
}

TEST(Train, L2OnlyGradientIsGanGradientWithoutAdversarialTerm) {
  const auto ex = tiny_examples(2, 8);
  const auto batch = whole_batch(ex);
  const nn::Generator<double> gen(tiny_generator());
  const auto gp = gen.init_params(1);
  auto g = gp.zeros_like();
  const auto loss = generator_step_grads<double>(gen, gp, nullptr, nullptr, batch, 5.0, g);
  EXPECT_EQ(loss.adversarial, 0.0);
  // The pixel gradient alone, pushed through the generator by hand.
  typename nn::Generator<double>::Cache cache;
  const auto fake = gen.forward(batch.input, gp, &cache);
  auto h = gp.zeros_like();
  gen.backward(cache, gp, pixel_grad(batch.label, fake, 5.0), h);
  EXPECT_EQ(g, h);
}

TEST(Train, L2OnlyReducesPixelLoss) {
  const auto ex = tiny_examples(2, 10);
  const nn::Generator<double> gen(tiny_generator());
  TrainConfig cfg;
  cfg.n_stop = 60;
  cfg.batch_size = 0;
  cfg.eta_g = 1e-3;
  const auto res = train_l2_only<double>(ex, gen, gen.init_params(1), cfg);
  EXPECT_LT(res.log.rows.back().loss_g_pixel, 0.5 * res.log.rows.front().loss_g_pixel);
}

TEST(Train, LogCsvHasOneRowPerEpoch) {
  const auto ex = tiny_examples(1, 11);
  const nn::Generator<double> gen(tiny_generator());
  const nn::Discriminator<double> disc(tiny_discriminator());
  TrainConfig cfg;
  cfg.n_stop = 3;
  const auto res = train<double>(ex, gen, gen.init_params(1), disc, disc.init_params(2), cfg);
  const auto csv = res.log.to_csv();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(TrainConfigJson, RoundTripAndValidation) {
  TrainConfig c;
  c.lambda = 50;
  c.optimizer = OptimizerKind::plain;
  EXPECT_EQ(train_config_from_json(to_json(c)), c);
  EXPECT_THROW(train_config_from_json(Json{{"n_stop", -1}}), ValidationError);
  EXPECT_THROW(train_config_from_json(Json{{"eta_g", 0.0}}), ValidationError);
  EXPECT_THROW(optimizer_from_string("rmsprop"), ValidationError);
}

TEST(Optimizer, PlainStepIsThetaMinusEtaGrad) {
  nn::ModelParams<double> p;
  p.add("w", {2});
  p[0].values = {1.0, -2.0};
  auto g = p.zeros_like();
  g[0].values = {0.5, 4.0};
  Optimizer<double>(OptimizerKind::plain, 0.1, p).apply(p, g);
  EXPECT_DOUBLE_EQ(p[0].values[0], 0.95);
  EXPECT_DOUBLE_EQ(p[0].values[1], -2.4);
}

TEST(Optimizer, FirstAdamStepMovesByEta) {
  nn::ModelParams<double> p;
  p.add("w", {3});
  auto g = p.zeros_like();
  g[0].values = {2.0, -5.0, 300.0};
  Optimizer<double> opt(OptimizerKind::adam, 1e-3, p);
  opt.apply(p, g);
  EXPECT_NEAR(p[0].values[0], -1e-3, 1e-9);
  EXPECT_NEAR(p[0].values[1], 1e-3, 1e-9);
  EXPECT_NEAR(p[0].values[2], -1e-3, 1e-9);
}

// ---- model parameters ----------------------------------------------------

TEST(Models, DefaultLayerCounts) {
  EXPECT_EQ(nn::Generator<float>(nn::GeneratorSpec{}).learned_layer_count(), 17u);
  EXPECT_EQ(nn::Discriminator<float>(nn::DiscriminatorSpec{}).learned_layer_count(), 5u);
}

TEST(Models, SaveLoadIsBitExact) {
  const nn::Generator<float> gen(tiny_generator());
  const auto p = gen.init_params(42);
  const auto path = std::filesystem::temp_directory_path() / "crme_models_gen.bin";
  nn::save_params(path, p, nn::to_json(tiny_generator()));
  auto back = gen.layout();
  Json spec;
  nn::load_params_into(path, back, &spec);
  EXPECT_EQ(back, p);
  EXPECT_EQ(nn::generator_spec_from_json(spec), tiny_generator());
}

TEST(Models, LoadRejectsWrongSpecAndDtype) {
  const nn::Generator<float> gen(tiny_generator());
  const auto path = std::filesystem::temp_directory_path() / "crme_models_wrong.bin";
  nn::save_params(path, gen.init_params(1), nn::to_json(tiny_generator()));
  auto wider = tiny_generator();
  wider.base_channels = 8;
  auto layout = nn::Generator<float>(wider).layout();
  EXPECT_THROW(nn::load_params_into(path, layout, nullptr), ValidationError);
  auto as_double = nn::Generator<double>(tiny_generator()).layout();
  EXPECT_THROW(nn::load_params_into(path, as_double, nullptr), ValidationError);
}

TEST(Models, GeneratorOutputInUnitIntervalAndShapeChecked) {
  const nn::Generator<double> gen(tiny_generator());
  const auto p = gen.init_params(3);
  Tensor<double> x(2, 2, 8, 8);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 5.0);
  for (auto& v : x.values()) v = n(rng);
  const auto y = gen.forward(x, p);
  for (double v : y.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW(gen.forward(Tensor<double>(1, 2, 7, 8), p), ShapeError);
  EXPECT_THROW(gen.forward(Tensor<double>(1, 3, 8, 8), p), ShapeError);
}

TEST(Models, BatchPermutationPermutesOutputs) {
  const nn::Generator<double> gen(tiny_generator());
  const auto p = gen.init_params(3);
  const auto ex = tiny_examples(3, 12);
  const std::vector<std::size_t> fwd = {0, 1, 2}, rev = {2, 1, 0};
  const auto a = gen.forward(make_batch<double>(ex, fwd).input, p);
  const auto b = gen.forward(make_batch<double>(ex, rev).input, p);
  for (int i = 0; i < 3; ++i)
    EXPECT_TRUE(std::equal(a.sample(i), a.sample(i) + a.sample_size(), b.sample(2 - i)));
}

}  // namespace
}  // namespace crme::training
