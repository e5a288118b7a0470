#include "doctest.h"
#include "strokeforge/refiner.hpp"
#include "support/fixtures.hpp"
#include "support/primitive_checks.hpp"

using namespace strokeforge;
using namespace sf_test;

TEST_CASE("config validation, json and conv output shape") {
  const RefinerConfig d = RefinerConfig::desk();
  CHECK(d.conv_output_shape() == Shape{16, 8, 8});
  CHECK(RefinerConfig::from_json(d.to_json()).to_json() == d.to_json());
  CHECK(RefinerConfig{}.conv_output_shape() == Shape{512, 8, 8});
  RefinerConfig bad = d;
  bad.conv_depths.pop_back();
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = d;
  bad.conv_strides[0] = 3;
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("forward emits one mixture head per image") {
  CnnRefiner net(RefinerConfig::desk(), 1);
  RasterImage a, b;
  b.set(3, 4, 1.0f);
  const Tensor batch = net.image_batch({&a, &b});
  CHECK(batch.shape() == Shape{2, 3, 128, 128});
  CHECK(net.forward(constant(batch)).shape() == Shape{2, head_size(5)});
  CHECK(net.head(b).size() == static_cast<std::size_t>(head_size(5)));
  CHECK(net.refine(a).components() == 5);
  RasterImage small(64);
  CHECK_THROWS_AS(net.image_batch({&small}), ShapeError);
}

TEST_CASE("refine network gradient against finite differences") {
  CHECK(refiner_composite_check().rel_error < 1e-3);
}

TEST_CASE("alpha = 1 reproduces baseline sampling exactly") {
  SketchVae vae(desk_vae(24), 2);
  CnnRefiner ref(RefinerConfig::desk(), 3);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng a(seed), b(seed);
    const auto z = sample_prior(16, a);
    sample_prior(16, b);
    CHECK(refined_sample(vae, ref, z, 0.8, 1.0f, a) == sample_sketch(vae, z, b, {.temperature = 0.8}));
  }
}

TEST_CASE("an active refiner changes the samples") {
  SketchVae vae(desk_vae(24), 2);
  CnnRefiner ref(RefinerConfig::desk(), 3);
  int differ = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng a(seed), b(seed);
    const auto z = sample_prior(16, a);
    sample_prior(16, b);
    differ += refined_sample(vae, ref, z, 0.8, 0.3f, a) != sample_sketch(vae, z, b, {.temperature = 0.8});
  }
  CHECK(differ > 0);
}

TEST_CASE("refiner training leaves the baseline untouched and lowers the loss") {
  const auto data = cat_set(8, 5);
  SketchVae vae(desk_vae(), 4);
  vae.set_offset_scale(data.offset_scale);
  BaselineTrainer(vae, {40, 8, 3e-3f, 1}).run(data.sequences);
  const auto before_params = vae.params().snapshot();

  CnnRefiner ref(RefinerConfig::desk(), 6);
  RefinerTrainer t(ref, vae, {40, 8, 1e-3f, 2});
  const LossRecord before = t.evaluate(data.sequences, 77);
  t.run(data.sequences);
  const LossRecord after = t.evaluate(data.sequences, 77);
  CHECK(vae.params().snapshot() == before_params);
  CHECK(after.total < before.total);

  const Checkpoint ck = t.checkpoint();
  CHECK(ck.meta.at("kind") == "refiner");
  CnnRefiner back = CnnRefiner::from_checkpoint(ck);
  CHECK(back.params().snapshot() == ref.params().snapshot());
  CHECK(back.config().to_json() == ref.config().to_json());
}

TEST_CASE("mismatched mixture counts are rejected") {
  SketchVae vae(desk_vae(), 4);
  RefinerConfig c = RefinerConfig::desk();
  c.mixtures = 3;
  CnnRefiner ref(c, 1);
  CHECK_THROWS_AS(RefinerTrainer(ref, vae, {}), DataError);
  std::vector<float> z(16, 0.0f);
  Rng rng(1);
  CHECK_THROWS(refined_sample(vae, ref, z, 1.0, 0.5f, rng));
}
