#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "strokeforge/layers.hpp"

namespace strokeforge {

/// One-hot pen state. Down: the stroke continues from this point to the
/// next. StrokeEnd: the pen lifts after this point. SketchEnd: nothing follows.
enum class Pen : std::uint8_t { Down = 0, StrokeEnd = 1, SketchEnd = 2 };

struct Stroke5Point {
  float dx = 0.0f;
  float dy = 0.0f;
  Pen pen = Pen::Down;

  int p1() const { return pen == Pen::Down; }
  int p2() const { return pen == Pen::StrokeEnd; }
  int p3() const { return pen == Pen::SketchEnd; }
  std::array<float, 5> as_array() const;
  /// Validates that exactly one of p1, p2, p3 is set.
  static Stroke5Point from_array(const std::array<float, 5>& v);

  friend bool operator==(const Stroke5Point&, const Stroke5Point&) = default;
};

/// Decoder start token (0, 0, 1, 0, 0).
inline constexpr Stroke5Point kStartToken{0.0f, 0.0f, Pen::Down};
/// Padding after the end of a sketch (0, 0, 0, 0, 1).
inline constexpr Stroke5Point kPadToken{0.0f, 0.0f, Pen::SketchEnd};

inline constexpr int kDefaultMaxSeqLen = 250;

struct StrokeSequence {
  std::vector<Stroke5Point> points;
  std::string source_id;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  /// 1-based index of the first SketchEnd point, 0 if there is none.
  int stop_index() const;
  friend bool operator==(const StrokeSequence&, const StrokeSequence&) = default;
};

/// Throws DataError when the pen states break the sequence invariants
/// (missing or early SketchEnd).
void validate_sequence(const StrokeSequence& seq);

/// Points padded with kPadToken (or truncated) to exactly `length`.
std::vector<Stroke5Point> padded_points(const StrokeSequence& seq, int length);

struct AbsolutePoint {
  double x = 0.0;
  double y = 0.0;
  Pen pen = Pen::Down;
};

/// Cumulative sum of offsets scaled by `offset_scale`, starting at the origin.
std::vector<AbsolutePoint> to_absolute(const StrokeSequence& seq, double offset_scale = 1.0);
/// Inverse of to_absolute: successive differences divided by `offset_scale`.
StrokeSequence from_absolute(const std::vector<AbsolutePoint>& pts, double offset_scale = 1.0);

// ---------------------------------------------------------------------------
// QuickDraw ingestion

struct ParseStats {
  int parsed = 0;
  int malformed = 0;   // unparseable JSON or missing/invalid "drawing"
  int empty = 0;       // drawings without any usable point
  int too_long = 0;    // dropped for exceeding max_len
};

struct ParseResult {
  std::vector<StrokeSequence> sequences;
  ParseStats stats;
};

/// Converts QuickDraw drawings (lists of [[x...],[y...]] polylines in
/// absolute coordinates) to stroke-5. The first drawn point is the origin;
/// every later point becomes an offset from its predecessor.
ParseResult parse_ndjson_text(const std::string& text, int max_len = kDefaultMaxSeqLen);
ParseResult parse_ndjson(const std::filesystem::path& path, int max_len = kDefaultMaxSeqLen);

// ---------------------------------------------------------------------------
// Normalization and splits

struct Normalized {
  std::vector<StrokeSequence> sequences;
  double offset_scale = 1.0;
};

/// Population standard deviation of every dx and dy value, pooled.
double offset_std(const std::vector<StrokeSequence>& sequences);
/// Divides every offset by offset_std(sequences). Throws DataError on an
/// empty set or zero variance.
Normalized normalize_offsets(const std::vector<StrokeSequence>& sequences);
std::vector<StrokeSequence> scale_offsets(std::vector<StrokeSequence> sequences, double divisor);

struct SplitSizes {
  int train = 70000;
  int test = 2500;
  int validation = 2500;
};

struct DatasetSplit {
  std::vector<StrokeSequence> train;
  std::vector<StrokeSequence> test;
  std::vector<StrokeSequence> validation;
  double offset_scale = 1.0;
};

/// Deduplicates by source_id, shuffles with `seed`, takes the requested
/// sizes and normalizes all three parts by the train-set offset scale.
DatasetSplit split_dataset(std::vector<StrokeSequence> sequences, const SplitSizes& sizes,
                           std::uint64_t seed);

struct CropPair {
  StrokeSequence prefix;
  StrokeSequence suffix;
};

/// Splits at a point drawn uniformly from [1, size - 1].
CropPair random_crop(const StrokeSequence& seq, Rng& rng);

// ---------------------------------------------------------------------------
// Internal storage: one {"id": ..., "points": [[dx,dy,p1,p2,p3], ...]} per line.

std::string to_jsonl_line(const StrokeSequence& seq);
StrokeSequence from_jsonl_line(const std::string& line);
void write_jsonl(const std::filesystem::path& path, const std::vector<StrokeSequence>& seqs);
std::vector<StrokeSequence> read_jsonl(const std::filesystem::path& path);

}  // namespace strokeforge
