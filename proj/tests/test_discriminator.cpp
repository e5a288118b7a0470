#include <fstream>
#include <sstream>

#include "doctest.h"
#include "strokeforge/discriminator.hpp"
#include "strokeforge/synthetic.hpp"

using namespace strokeforge;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("class order and names") {
  CHECK(static_cast<int>(SketchClass::SketchRnn) == 0);
  CHECK(static_cast<int>(SketchClass::Human) == 2);
  CHECK(std::string(kClassNames[1]) == "Our model");
  CHECK(parse_class("human") == 2);
  CHECK(parse_class("Sketch-RNN") == 0);
  CHECK(parse_class("1") == 1);
  CHECK_THROWS_AS(parse_class("robot"), DataError);
}

TEST_CASE("output shapes and probability simplex") {
  Discriminator d(DiscriminatorConfig::desk(), 1);
  RasterImage img;
  img.set(10, 10, 1.0f);
  const auto p = d.classify(img);
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0));
  CHECK(d.features(img).size() == 32);
  CHECK(DiscriminatorConfig{}.dense_widths[1] == 128);
  CHECK(argmax_lowest(std::vector<float>{0.2f, 0.4f, 0.4f}) == 1);
}

TEST_CASE("learns the synthetic shape fixture") {
  const auto data = shape_fixture(40, 3);
  std::vector<LabeledImage> train(data.begin(), data.begin() + 90), val(data.begin() + 90, data.end());
  Discriminator d(DiscriminatorConfig::desk(), 2);
  const auto log = train_discriminator(d, train, val, {6, 16, 1e-3f, 4});
  CHECK(log.back().val_accuracy >= 80.0);
  CHECK(log.back().train_loss < log.front().train_loss);

  const ConfusionMatrix cm = confusion(d, val);
  for (int r = 0; r < kNumClasses; ++r) {
    double sum = 0.0;
    for (double v : cm.percent[static_cast<std::size_t>(r)]) sum += v;
    CHECK(sum == doctest::Approx(100.0).epsilon(1e-9));
  }
  const Checkpoint ck = d.to_checkpoint(nullptr);
  Discriminator back = Discriminator::from_checkpoint(ck);
  for (const auto& ex : val) CHECK(back.classify(ex.image) == d.classify(ex.image));
}

TEST_CASE("training requires three examples per class") {
  auto data = shape_fixture(2, 1);
  Discriminator d(DiscriminatorConfig::desk(), 2);
  CHECK_THROWS_AS(train_discriminator(d, data, {}, {}), DataError);
}

TEST_CASE("stored predictions reproduce the reference table") {
  const auto preds = read_predictions_csv(read_file(SF_FIXTURE_DIR "/reference_predictions.csv"));
  CHECK(preds.size() == 3000);
  const ConfusionMatrix cm = confusion_from_predictions(preds);
  CHECK(cm.to_table() == read_file(SF_FIXTURE_DIR "/reference_table.txt"));
  CHECK(*cm.mislead_rate(0) == doctest::Approx(7.4));
  CHECK(*cm.mislead_rate(1) == doctest::Approx(13.6));
}

TEST_CASE("csv rows sum to 100 and absent classes are marked") {
  const ConfusionMatrix cm = confusion_from_predictions({{0, 0}, {0, 1}, {0, 2}, {2, 2}});
  CHECK_FALSE(cm.has_row(1));
  CHECK_FALSE(cm.mislead_rate(1).has_value());
  const std::string csv = cm.to_csv();
  CHECK(csv.find("NA") != std::string::npos);
  CHECK(cm.to_table().find("n/a") != std::string::npos);
  CHECK_THROWS_AS(confusion_from_predictions({{0, 3}}), DataError);
  CHECK_THROWS_AS(read_predictions_csv("true,pred\nhuman\n"), DataError);
}
