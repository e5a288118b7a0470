#include <cmath>

#include "doctest.h"
#include "strokeforge/sketch_vae.hpp"
#include "support/fixtures.hpp"

using namespace strokeforge;
using namespace sf_test;

TEST_CASE("config validation and json round trip") {
  VaeConfig c = desk_vae();
  CHECK(VaeConfig::from_json(c.to_json()).to_json() == c.to_json());
  c.mixtures = 0;
  CHECK_THROWS_AS(c.validate(), DataError);
  CHECK(VaeConfig::full_scale().dec_hidden == 512);
}

TEST_CASE("teacher-forcing batch layout") {
  StrokeSequence s;
  s.points = {{1, 2, Pen::Down}, {3, 4, Pen::StrokeEnd}, {5, 6, Pen::SketchEnd}};
  const SequenceBatch b = make_batch({&s}, 5);
  CHECK(b.batch == 1);
  CHECK(b.length == 5);
  // Decoder input 0 is the start token; input t is target t-1.
  CHECK(b.decoder_inputs[0] == Tensor::from({{0, 0, 1, 0, 0}}));
  CHECK(b.decoder_inputs[2] == Tensor::from({{3, 4, 0, 1, 0}}));
  CHECK(b.encoder_inputs[4] == Tensor::from({{0, 0, 0, 0, 1}}));
  CHECK(b.target_dx[1][0] == 3.0f);
  CHECK(b.target_pen[3] == Tensor::from({{0, 0, 1}}));
  const float mask[5] = {1, 1, 1, 0, 0};
  for (int t = 0; t < 5; ++t) CHECK(b.offset_mask[static_cast<std::size_t>(t)][0] == mask[t]);
}

TEST_CASE("graph batch loss agrees with the per-sequence scalar losses") {
  const auto data = cat_set(3, 1);
  SketchVae vae(desk_vae(), 2);
  const std::vector<float> eps = {0.3f, -1.0f, 0.5f, 0.0f, 1.2f, -0.4f, 0.9f, 0.1f,
                                  -0.7f, 0.2f, 0.0f, 0.6f, -1.5f, 0.8f, 0.4f, -0.2f};
  const StrokeSequence& s = data.sequences[0];
  const LossBreakdown ref = sequence_loss(vae, s, vae.encode_with_noise(s, eps));
  NoGradGuard guard;
  const auto g = vae.batch_loss(make_batch({&s}, 48), Tensor({1, 16}, eps));
  CHECK(g.offset.value()[0] == doctest::Approx(ref.offset).epsilon(1e-4));
  CHECK(g.pen.value()[0] == doctest::Approx(ref.pen).epsilon(1e-4));
  CHECK(g.kl.value()[0] == doctest::Approx(ref.kl).epsilon(1e-4));
  CHECK(g.total.value()[0] == doctest::Approx(ref.total(1.0)).epsilon(1e-4));
}

TEST_CASE("zero kl weight drops the kl term from the objective") {
  VaeConfig c = desk_vae();
  c.kl_weight = 0.0f;
  SketchVae vae(c, 3);
  const auto data = cat_set(2, 2);
  const auto g = vae.batch_loss(make_batch({&data.sequences[0], &data.sequences[1]}, 48), Tensor({2, 16}, 0.5f));
  CHECK(g.total.value()[0] == doctest::Approx(g.offset.value()[0] + g.pen.value()[0]));
  CHECK(g.kl.value()[0] > 0.0f);
}

TEST_CASE("sampling terminates with an end-of-sketch point and is seed-deterministic") {
  VaeConfig c = desk_vae(20);
  SketchVae vae(c, 4);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng a(seed), b(seed);
    const auto za = sample_prior(c.latent, a);
    const auto zb = sample_prior(c.latent, b);
    const StrokeSequence sa = sample_sketch(vae, za, a, {.temperature = 0.7});
    const StrokeSequence sb = sample_sketch(vae, zb, b, {.temperature = 0.7});
    CHECK(sa == sb);
    CHECK(sa.size() <= 20);
    CHECK_NOTHROW(validate_sequence(sa));
  }
}

TEST_CASE("training lowers the loss and is reproducible") {
  const auto data = cat_set(8, 3);
  auto train = [&](int steps) {
    SketchVae vae(desk_vae(), 5);
    vae.set_offset_scale(data.offset_scale);
    BaselineTrainer t(vae, {steps, 8, 3e-3f, 9});
    const LossRecord before = t.evaluate(data.sequences, 1);
    const auto log = t.run(data.sequences);
    const LossRecord after = t.evaluate(data.sequences, 1);
    return std::make_tuple(before, after, log);
  };
  const auto [b1, a1, log1] = train(60);
  const auto [b2, a2, log2] = train(60);
  CHECK(a1.offset + a1.pen < 0.8 * (b1.offset + b1.pen));
  REQUIRE(log1.size() == log2.size());
  for (std::size_t i = 0; i < log1.size(); ++i) CHECK(loss_csv_row(log1[i]) == loss_csv_row(log2[i]));
  CHECK(loss_csv_header() == "step,L_S,L_P,L_KL,total");
}

TEST_CASE("checkpoint restores the model and optimizer") {
  const auto data = cat_set(8, 4);
  SketchVae vae(desk_vae(), 6);
  vae.set_offset_scale(data.offset_scale);
  BaselineTrainer t(vae, {5, 4, 1e-3f, 2});
  t.run(data.sequences);
  const Checkpoint ck = t.checkpoint();
  CHECK(ck.meta.at("kind") == "baseline");
  CHECK(ck.meta.at("step") == 5);
  SketchVae back = SketchVae::from_checkpoint(ck);
  CHECK(back.params().snapshot() == vae.params().snapshot());
  CHECK(back.offset_scale() == data.offset_scale);
  SketchVae fresh(desk_vae(), 7);
  BaselineTrainer t2(fresh, {5, 4, 1e-3f, 2});
  t2.restore(ck);
  CHECK(t2.steps_done() == 5);
  CHECK(fresh.params().snapshot() == vae.params().snapshot());

  Checkpoint wrong = ck;
  wrong.meta["kind"] = "refiner";
  CHECK_THROWS_AS(SketchVae::from_checkpoint(wrong), DataError);
}

TEST_CASE("encode rejects an empty sequence") {
  SketchVae vae(desk_vae(), 8);
  Rng rng(1);
  CHECK_THROWS_AS(vae.encode(StrokeSequence{}, rng), DataError);
}
