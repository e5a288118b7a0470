#include <cstdlib>
#include <regex>

#include "doctest.h"
#include "strokeforge/config.hpp"
#include "strokeforge/svg.hpp"
#include "strokeforge/synthetic.hpp"

using namespace strokeforge;
using nlohmann::json;

TEST_CASE("presets validate and round-trip through json") {
  for (const RunConfig& c : {RunConfig::desk(), RunConfig::full()}) {
    CHECK_NOTHROW(c.validate());
    const RunConfig back = config_from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
  }
  CHECK(RunConfig::full().vae.latent == 128);
}

TEST_CASE("overrides apply and unknown keys are rejected") {
  const RunConfig c = config_from_json({{"preset", "desk"}, {"mixtures", 3}, {"alpha", 0.25}, {"seed", 9}});
  CHECK(c.vae.mixtures == 3);
  CHECK(c.refiner.mixtures == 3);
  CHECK(c.alpha == 0.25f);
  CHECK(c.seed == 9);
  CHECK_THROWS_AS(config_from_json({{"mixturez", 3}}), DataError);
  CHECK_THROWS_AS(config_from_json({{"preset", "huge"}}), DataError);
  CHECK_THROWS_AS(config_from_json({{"alpha", 1.5}}), DataError);
  CHECK_THROWS_AS(config_from_json({{"lr", "fast"}}), DataError);
  CHECK_THROWS_AS(config_from_json({{"refiner_conv_depths", {1, 2}}}), DataError);
  CHECK_THROWS_AS(config_from_json(json::array()), DataError);
}

TEST_CASE("data directory honours the environment") {
  setenv("STROKEFORGE_DATA_DIR", "/tmp/sf_data_here", 1);
  CHECK(default_data_dir() == "/tmp/sf_data_here");
  CHECK(RunConfig::desk().data_dir == "/tmp/sf_data_here");
  unsetenv("STROKEFORGE_DATA_DIR");
  CHECK(default_data_dir() == "data");
}

TEST_CASE("svg has one polyline per pen-down run") {
  StrokeSequence s;
  s.points = {{10, 0, Pen::StrokeEnd}, {0, 10, Pen::Down}, {10, 0, Pen::Down}, {0, 5, Pen::SketchEnd}};
  const auto runs = pen_runs(s, 1.0);
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].size() == 2);
  CHECK(runs[1].size() == 3);
  const std::string svg = sketch_to_svg(s, 1.0);
  const std::regex poly("<polyline");
  CHECK(std::distance(std::sregex_iterator(svg.begin(), svg.end(), poly), std::sregex_iterator()) == 2);
  CHECK(svg.find("stroke-width=\"2\"") != std::string::npos);
  CHECK(svg.find("viewBox=\"-2 -2 24 19\"") != std::string::npos);
}

TEST_CASE("grid holds every sketch") {
  const auto seqs = parse_ndjson_text(cat_ndjson(50, 1)).sequences;
  const std::string svg = grid_svg(seqs, 1.0, 10);
  const std::regex group("<g>");
  CHECK(std::distance(std::sregex_iterator(svg.begin(), svg.end(), group), std::sregex_iterator()) == 50);
  CHECK(svg.find("viewBox=\"0 0 1000 500\"") != std::string::npos);
}
