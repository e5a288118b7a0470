#include "strokeforge/stroke.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace strokeforge {

using nlohmann::json;

std::array<float, 5> Stroke5Point::as_array() const {
  return {dx, dy, static_cast<float>(p1()), static_cast<float>(p2()), static_cast<float>(p3())};
}

Stroke5Point Stroke5Point::from_array(const std::array<float, 5>& v) {
  int hot = -1;
  for (int k = 0; k < 3; ++k) {
    const float p = v[static_cast<std::size_t>(2 + k)];
    if (p == 1.0f) {
      if (hot >= 0) throw DataError("pen state has more than one bit set");
      hot = k;
    } else if (p != 0.0f) {
      throw DataError("pen state bits must be 0 or 1");
    }
  }
  if (hot < 0) throw DataError("pen state has no bit set");
  return {v[0], v[1], static_cast<Pen>(hot)};
}

int StrokeSequence::stop_index() const {
  for (std::size_t i = 0; i < points.size(); ++i)
    if (points[i].pen == Pen::SketchEnd) return static_cast<int>(i) + 1;
  return 0;
}

void validate_sequence(const StrokeSequence& seq) {
  const int stop = seq.stop_index();
  if (stop == 0) throw DataError("sequence " + seq.source_id + " has no end-of-sketch point");
  if (stop != static_cast<int>(seq.size())) {
    throw DataError("sequence " + seq.source_id + " has points after the end-of-sketch point");
  }
}

std::vector<Stroke5Point> padded_points(const StrokeSequence& seq, int length) {
  std::vector<Stroke5Point> out(seq.points.begin(),
                                seq.points.begin() + std::min<std::ptrdiff_t>(
                                                         length, static_cast<std::ptrdiff_t>(seq.size())));
  out.resize(static_cast<std::size_t>(length), kPadToken);
  return out;
}

std::vector<AbsolutePoint> to_absolute(const StrokeSequence& seq, double offset_scale) {
  std::vector<AbsolutePoint> out;
  out.reserve(seq.size());
  double x = 0.0, y = 0.0;
  for (const auto& p : seq.points) {
    x += static_cast<double>(p.dx) * offset_scale;
    y += static_cast<double>(p.dy) * offset_scale;
    out.push_back({x, y, p.pen});
  }
  return out;
}

StrokeSequence from_absolute(const std::vector<AbsolutePoint>& pts, double offset_scale) {
  StrokeSequence seq;
  seq.points.reserve(pts.size());
  double px = 0.0, py = 0.0;
  for (const auto& p : pts) {
    seq.points.push_back({static_cast<float>((p.x - px) / offset_scale),
                          static_cast<float>((p.y - py) / offset_scale), p.pen});
    px = p.x;
    py = p.y;
  }
  return seq;
}

// ---------------------------------------------------------------------------

namespace {

struct RawPoint {
  double x, y;
  bool stroke_end;
};

// Returns false when the drawing field is structurally invalid.
bool collect_points(const json& drawing, std::vector<RawPoint>& pts) {
  if (!drawing.is_array()) return false;
  for (const auto& stroke : drawing) {
    if (!stroke.is_array() || stroke.size() < 2) return false;
    const auto& xs = stroke[0];
    const auto& ys = stroke[1];
    if (!xs.is_array() || !ys.is_array() || xs.size() != ys.size()) return false;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!xs[i].is_number() || !ys[i].is_number()) return false;
      pts.push_back({xs[i].get<double>(), ys[i].get<double>(), i + 1 == xs.size()});
    }
  }
  return true;
}

}  // namespace

ParseResult parse_ndjson_text(const std::string& text, int max_len) {
  ParseResult result;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object() || !obj.contains("drawing")) {
      ++result.stats.malformed;
      continue;
    }
    std::vector<RawPoint> pts;
    if (!collect_points(obj["drawing"], pts)) {
      ++result.stats.malformed;
      continue;
    }
    // The first point anchors the sketch; a sketch needs at least one offset.
    if (pts.size() < 2) {
      ++result.stats.empty;
      continue;
    }
    if (static_cast<int>(pts.size()) - 1 > max_len) {
      ++result.stats.too_long;
      continue;
    }
    StrokeSequence seq;
    if (obj.contains("key_id")) {
      const auto& k = obj["key_id"];
      seq.source_id = k.is_string() ? k.get<std::string>() : k.dump();
    } else {
      seq.source_id = "line" + std::to_string(line_no);
    }
    for (std::size_t i = 1; i < pts.size(); ++i) {
      Pen pen = pts[i].stroke_end ? Pen::StrokeEnd : Pen::Down;
      if (i + 1 == pts.size()) pen = Pen::SketchEnd;
      seq.points.push_back({static_cast<float>(pts[i].x - pts[i - 1].x),
                            static_cast<float>(pts[i].y - pts[i - 1].y), pen});
    }
    result.sequences.push_back(std::move(seq));
    ++result.stats.parsed;
  }
  return result;
}

ParseResult parse_ndjson(const std::filesystem::path& path, int max_len) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_ndjson_text(buf.str(), max_len);
}

// ---------------------------------------------------------------------------

double offset_std(const std::vector<StrokeSequence>& sequences) {
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (const auto& s : sequences)
    for (const auto& p : s.points) {
      for (double v : {static_cast<double>(p.dx), static_cast<double>(p.dy)}) {
        sum += v;
        sum_sq += v * v;
        ++n;
      }
    }
  if (n == 0) throw DataError("cannot normalize an empty set of sequences");
  const double mean = sum / static_cast<double>(n);
  return std::sqrt(std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean));
}

std::vector<StrokeSequence> scale_offsets(std::vector<StrokeSequence> sequences, double divisor) {
  for (auto& s : sequences)
    for (auto& p : s.points) {
      p.dx = static_cast<float>(p.dx / divisor);
      p.dy = static_cast<float>(p.dy / divisor);
    }
  return sequences;
}

Normalized normalize_offsets(const std::vector<StrokeSequence>& sequences) {
  const double scale = offset_std(sequences);
  if (!(scale > 0.0)) throw DataError("offsets have zero variance; cannot normalize");
  return {scale_offsets(sequences, scale), scale};
}

DatasetSplit split_dataset(std::vector<StrokeSequence> sequences, const SplitSizes& sizes,
                           std::uint64_t seed) {
  if (sizes.train <= 0 || sizes.test < 0 || sizes.validation < 0) {
    throw DataError("split sizes must be train > 0, test >= 0, validation >= 0");
  }
  std::set<std::string> seen;
  std::erase_if(sequences, [&](const StrokeSequence& s) { return !seen.insert(s.source_id).second; });

  const std::size_t need = static_cast<std::size_t>(sizes.train) + sizes.test + sizes.validation;
  if (sequences.size() < need) {
    throw DataError("need " + std::to_string(need) + " sequences (" + std::to_string(sizes.train) +
                    "/" + std::to_string(sizes.test) + "/" + std::to_string(sizes.validation) +
                    ") but only " + std::to_string(sequences.size()) + " unique are available");
  }
  Rng rng(seed);
  std::shuffle(sequences.begin(), sequences.end(), rng);

  DatasetSplit split;
  auto it = sequences.begin();
  split.train.assign(it, it + sizes.train);
  it += sizes.train;
  split.test.assign(it, it + sizes.test);
  it += sizes.test;
  split.validation.assign(it, it + sizes.validation);

  Normalized norm = normalize_offsets(split.train);
  split.offset_scale = norm.offset_scale;
  split.train = std::move(norm.sequences);
  split.test = scale_offsets(std::move(split.test), split.offset_scale);
  split.validation = scale_offsets(std::move(split.validation), split.offset_scale);
  return split;
}

CropPair random_crop(const StrokeSequence& seq, Rng& rng) {
  if (seq.size() < 2) {
    throw DataError("random_crop needs at least 2 points, got " + std::to_string(seq.size()));
  }
  std::uniform_int_distribution<std::size_t> dist(1, seq.size() - 1);
  const std::size_t cut = dist(rng);
  CropPair pair;
  pair.prefix.source_id = seq.source_id;
  pair.suffix.source_id = seq.source_id;
  pair.prefix.points.assign(seq.points.begin(), seq.points.begin() + static_cast<std::ptrdiff_t>(cut));
  pair.suffix.points.assign(seq.points.begin() + static_cast<std::ptrdiff_t>(cut), seq.points.end());
  return pair;
}

// ---------------------------------------------------------------------------

std::string to_jsonl_line(const StrokeSequence& seq) {
  json pts = json::array();
  for (const auto& p : seq.points) pts.push_back(p.as_array());
  return json{{"id", seq.source_id}, {"points", pts}}.dump();
}

StrokeSequence from_jsonl_line(const std::string& line) {
  json obj = json::parse(line, nullptr, false);
  if (obj.is_discarded() || !obj.is_object() || !obj.contains("points")) {
    throw DataError("malformed sequence line");
  }
  StrokeSequence seq;
  try {
    seq.source_id = obj.value("id", "");
    for (const auto& p : obj["points"]) {
      if (!p.is_array() || p.size() != 5) throw DataError("point must have 5 entries in " + seq.source_id);
      seq.points.push_back(Stroke5Point::from_array(p.get<std::array<float, 5>>()));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed sequence line: ") + e.what());
  }
  return seq;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<StrokeSequence>& seqs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& s : seqs) out << to_jsonl_line(s) << '\n';
}

std::vector<StrokeSequence> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<StrokeSequence> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(from_jsonl_line(line));
  }
  return out;
}

}  // namespace strokeforge
