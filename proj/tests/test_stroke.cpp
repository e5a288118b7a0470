#include <cmath>

#include "doctest.h"
#include "strokeforge/stroke.hpp"
#include "strokeforge/synthetic.hpp"

using namespace strokeforge;

TEST_CASE("quickdraw drawing converts to origin-anchored offsets") {
  const std::string line =
      R"({"key_id":"k1","drawing":[[[10,20,20],[5,5,15]],[[30,31],[40,41]]]})";
  const ParseResult r = parse_ndjson_text(line);
  REQUIRE(r.sequences.size() == 1);
  const auto& s = r.sequences[0];
  CHECK(s.source_id == "k1");
  // Anchor (10,5); then (20,5) (20,15)| (30,40) (31,41).
  REQUIRE(s.size() == 4);
  CHECK(s.points[0] == Stroke5Point{10, 0, Pen::Down});
  CHECK(s.points[1] == Stroke5Point{0, 10, Pen::StrokeEnd});
  CHECK(s.points[2] == Stroke5Point{10, 25, Pen::Down});
  CHECK(s.points[3] == Stroke5Point{1, 1, Pen::SketchEnd});
  CHECK(s.stop_index() == 4);
  CHECK_NOTHROW(validate_sequence(s));
}

TEST_CASE("malformed, empty and over-length lines are counted, not fatal") {
  const std::string text =
      "{not json\n"
      "{\"drawing\": 3}\n"
      "{\"drawing\": [[[1],[1]]]}\n"
      "\n"
      "{\"drawing\": [[[0,1,2,3,4],[0,0,0,0,0]]]}\n"
      "{\"drawing\": [[[0,1],[0,1]]]}\n";
  const ParseResult r = parse_ndjson_text(text, 3);
  CHECK(r.stats.malformed == 2);
  CHECK(r.stats.empty == 1);
  CHECK(r.stats.too_long == 1);
  CHECK(r.stats.parsed == 1);
  CHECK(r.sequences.at(0).source_id == "line6");
}

TEST_CASE("pen one-hot holds for every parsed point") {
  const ParseResult r = parse_ndjson(SF_FIXTURE_DIR "/cats100.ndjson");
  REQUIRE(r.sequences.size() == 100);
  for (const auto& s : r.sequences) {
    CHECK_NOTHROW(validate_sequence(s));
    for (const auto& p : s.points) {
      const auto a = p.as_array();
      CHECK(a[2] + a[3] + a[4] == 1.0f);
      CHECK(p.p1() + p.p2() + p.p3() == 1);
    }
  }
}

TEST_CASE("absolute round trip is exact") {
  const ParseResult r = parse_ndjson(SF_FIXTURE_DIR "/cats100.ndjson");
  for (const auto& s : r.sequences) CHECK(from_absolute(to_absolute(s)).points == s.points);
  const Normalized n = normalize_offsets(r.sequences);
  for (const auto& s : n.sequences) CHECK(from_absolute(to_absolute(s)).points == s.points);
}

TEST_CASE("from_array rejects a broken one-hot") {
  CHECK_THROWS_AS(Stroke5Point::from_array({0, 0, 1, 1, 0}), DataError);
  CHECK_THROWS_AS(Stroke5Point::from_array({0, 0, 0, 0, 0}), DataError);
  CHECK(Stroke5Point::from_array({1, 2, 0, 0, 1}) == Stroke5Point{1, 2, Pen::SketchEnd});
}

TEST_CASE("normalization gives unit pooled std") {
  const ParseResult r = parse_ndjson(SF_FIXTURE_DIR "/cats100.ndjson");
  const Normalized n = normalize_offsets(r.sequences);
  CHECK(offset_std(n.sequences) == doctest::Approx(1.0).epsilon(1e-5));
  // Independent two-pass population std.
  double sum = 0.0, cnt = 0.0;
  for (const auto& s : r.sequences)
    for (const auto& p : s.points) sum += p.dx + p.dy, cnt += 2;
  const double mean = sum / cnt;
  double ss = 0.0;
  for (const auto& s : r.sequences)
    for (const auto& p : s.points) ss += (p.dx - mean) * (p.dx - mean) + (p.dy - mean) * (p.dy - mean);
  CHECK(n.offset_scale == doctest::Approx(std::sqrt(ss / cnt)).epsilon(1e-9));

  StrokeSequence flat;
  flat.points = {{0, 0, Pen::Down}, {0, 0, Pen::SketchEnd}};
  CHECK_THROWS_AS(normalize_offsets({flat}), DataError);
}

TEST_CASE("split is deterministic, deduplicated and scaled by the train set") {
  auto seqs = parse_ndjson(SF_FIXTURE_DIR "/cats100.ndjson").sequences;
  seqs.push_back(seqs[0]);  // duplicate id
  const DatasetSplit a = split_dataset(seqs, {80, 10, 10}, 5);
  const DatasetSplit b = split_dataset(seqs, {80, 10, 10}, 5);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.offset_scale == b.offset_scale);
  CHECK(offset_std(a.train) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK_THROWS_AS(split_dataset(seqs, {90, 10, 10}, 5), DataError);
  const DatasetSplit c = split_dataset(seqs, {80, 10, 10}, 6);
  CHECK_FALSE(c.train == a.train);
}

TEST_CASE("random crop splits inside the sequence") {
  const auto seqs = parse_ndjson(SF_FIXTURE_DIR "/cats100.ndjson").sequences;
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto& s = seqs[static_cast<std::size_t>(i) % seqs.size()];
    const CropPair c = random_crop(s, rng);
    CHECK(c.prefix.size() >= 1);
    CHECK(c.suffix.size() >= 1);
    CHECK(c.prefix.size() + c.suffix.size() == s.size());
  }
  StrokeSequence one;
  one.points = {{1, 1, Pen::SketchEnd}};
  CHECK_THROWS_AS(random_crop(one, rng), DataError);
}

TEST_CASE("padding appends end-of-sketch tokens") {
  StrokeSequence s;
  s.points = {{1, 2, Pen::Down}, {3, 4, Pen::SketchEnd}};
  const auto p = padded_points(s, 4);
  REQUIRE(p.size() == 4);
  CHECK(p[2] == kPadToken);
  CHECK(padded_points(s, 1).size() == 1);
}

TEST_CASE("jsonl storage round trip") {
  const auto seqs = parse_ndjson(SF_FIXTURE_DIR "/cats100.ndjson").sequences;
  for (const auto& s : seqs) CHECK(from_jsonl_line(to_jsonl_line(s)) == s);
  CHECK_THROWS_AS(from_jsonl_line("{\"points\": [[1,2,3]]}"), DataError);
  CHECK_THROWS_AS(from_jsonl_line("{\"points\": [[1,2,\"x\",0,0]]}"), DataError);
  CHECK_THROWS_AS(from_jsonl_line("garbage"), DataError);
}

TEST_CASE("synthetic cat doodles stay within the desk sequence length") {
  const auto r = parse_ndjson_text(cat_ndjson(50, 9));
  CHECK(r.stats.parsed == 50);
  for (const auto& s : r.sequences) {
    CHECK(s.size() >= 20);
    CHECK(s.size() <= 48);
  }
}
