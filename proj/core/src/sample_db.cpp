#include "semisamp/sample_db.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "semisamp/error.hpp"

namespace semisamp {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kFormatVersion = "1";
constexpr std::string_view kIndexHeader = "# semisamp sample index v1";
constexpr std::size_t kPointBins = 24;
constexpr std::size_t kScoreBins = 10;

DatabaseKind parse_kind(std::string_view s) {
  if (s == "gt") return DatabaseKind::gt;
  if (s == "pseudo") return DatabaseKind::pseudo;
  throw FormatError("unknown database kind '" + std::string(s) + "'");
}

CropMethod parse_crop(std::string_view s) {
  if (s == "box") return CropMethod::box;
  if (s == "mask") return CropMethod::mask;
  throw FormatError("unknown crop method '" + std::string(s) + "'");
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    out.emplace_back(s.substr(pos, next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

void check_token(const std::string& s, std::string_view what) {
  if (s.empty() || s.find_first_of(" \t\r\n,=") != std::string::npos) {
    throw InputError(std::string(what) + " '" + s + "' cannot be stored in a database index");
  }
}

std::size_t detect_channels(std::span<const Frame> frames, std::size_t fallback) {
  if (frames.empty()) return fallback;
  const std::size_t c = frames.front().cloud.channel_count();
  for (const Frame& f : frames) {
    if (f.cloud.channel_count() != c) {
      throw InputError("frame '" + f.frame_id + "' has a different channel_count");
    }
  }
  return c;
}

std::uint64_t to_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw FormatError("invalid integer '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::string_view to_string(DatabaseKind kind) { return kind == DatabaseKind::gt ? "gt" : "pseudo"; }
std::string_view to_string(CropMethod method) { return method == CropMethod::box ? "box" : "mask"; }

SampleDatabase::SampleDatabase(DatabaseKind kind, std::size_t channel_count,
                               std::vector<std::string> categories)
    : kind_(kind), channels_(channel_count), categories_(std::move(categories)) {
  if (channel_count < 3) throw InputError("channel_count must be at least 3");
  for (const auto& c : categories_) {
    check_token(c, "category");
    if (!by_category_.emplace(c, std::vector<SampleId>{}).second) {
      throw InputError("duplicate category '" + c + "'");
    }
  }
}

bool SampleDatabase::has_category(std::string_view category) const {
  return by_category_.find(category) != by_category_.end();
}

const std::vector<SampleId>& SampleDatabase::ids(std::string_view category) const {
  const auto it = by_category_.find(category);
  if (it == by_category_.end()) {
    throw InputError("unknown category '" + std::string(category) + "'");
  }
  return it->second;
}

std::span<const float> SampleDatabase::raw_points(SampleId id) const {
  const SampleRecord& r = records_.at(id);
  return std::span<const float>(store_).subspan(r.offset, r.num_points * channels_);
}

ObjectSample SampleDatabase::materialize(SampleId id) const {
  const SampleRecord& r = records_.at(id);
  const auto raw = raw_points(id);
  std::vector<double> values(raw.begin(), raw.end());
  return {r.category, PointCloud(channels_, std::move(values)), r.box, r.score, r.source_frame,
          r.num_points};
}

SampleId SampleDatabase::add(std::string category, const PointCloud& points,
                             const OrientedBox3D& box, double score, std::string source_frame,
                             CropMethod crop) {
  if (points.channel_count() != channels_) throw InputError("sample channel_count mismatch");
  const auto it = by_category_.find(category);
  if (it == by_category_.end()) throw InputError("unknown category '" + category + "'");
  if (!(score >= 0.0 && score <= 1.0)) throw InputError("sample score outside [0, 1]");
  if (kind_ == DatabaseKind::gt && score != 1.0) throw InputError("gt samples must score 1.0");
  check_token(source_frame, "frame id");
  SampleRecord rec{std::move(category), box, score, std::move(source_frame), points.size(),
                   store_.size(), crop};
  for (double v : points.values()) store_.push_back(static_cast<float>(v));
  const SampleId id = records_.size();
  records_.push_back(std::move(rec));
  it->second.push_back(id);
  return id;
}

bool operator==(const SampleDatabase& a, const SampleDatabase& b) {
  if (a.kind_ != b.kind_ || a.channels_ != b.channels_ || a.categories_ != b.categories_ ||
      a.records_ != b.records_ || a.meta_ != b.meta_ || a.store_.size() != b.store_.size()) {
    return false;
  }
  // Bitwise comparison: distinguishes -0.0 from 0.0.
  for (std::size_t i = 0; i < a.store_.size(); ++i) {
    if (std::bit_cast<std::uint32_t>(a.store_[i]) != std::bit_cast<std::uint32_t>(b.store_[i])) {
      return false;
    }
  }
  return true;
}

SampleDatabase build_gt_database(std::span<const Frame> frames, const GtBuildOptions& options) {
  SampleDatabase db(DatabaseKind::gt, detect_channels(frames, options.channel_count),
                    options.categories);
  db.set_metadata("min_points", std::to_string(options.min_points));
  db.set_metadata("use_masks", options.use_masks ? "true" : "false");
  for (const Frame& frame : frames) {
    for (std::size_t li = 0; li < frame.labels.size(); ++li) {
      const Label& label = frame.labels[li];
      if (label.source != LabelSource::groundtruth) continue;
      if (!db.has_category(label.category)) continue;
      PointCloud crop(db.channel_count());
      if (options.use_masks) {
        const std::vector<std::size_t>* mask = nullptr;
        if (frame.instance_masks) {
          const auto it = frame.instance_masks->find(li);
          if (it != frame.instance_masks->end()) mask = &it->second;
        }
        if (!mask) {
          throw InputError("frame '" + frame.frame_id + "' label " + std::to_string(li) + " (" +
                           label.category + ") has no instance mask");
        }
        crop = crop_points_by_mask(frame.cloud, *mask);
      } else {
        crop = crop_points_in_box(frame.cloud, label.box).cloud;
      }
      if (crop.size() < options.min_points) continue;
      db.add(label.category, crop, label.box, 1.0, frame.frame_id,
             options.use_masks ? CropMethod::mask : CropMethod::box);
    }
  }
  return db;
}

SampleDatabase build_pseudo_database(std::span<const Frame> frames,
                                     std::span<const std::vector<Label>> pseudo_labels,
                                     const PseudoBuildOptions& options) {
  if (frames.size() != pseudo_labels.size()) {
    throw InputError("one pseudo label list is required per unlabeled frame");
  }
  SampleDatabase db(DatabaseKind::pseudo, detect_channels(frames, options.channel_count),
                    options.categories);
  db.set_metadata("min_points", std::to_string(options.min_points));
  db.set_metadata("min_score", format_real(options.min_score));
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const Frame& frame = frames[fi];
    for (const Label& label : pseudo_labels[fi]) {
      if (!label.score) {
        throw FormatError("frame '" + frame.frame_id + "': pseudo label (" + label.category +
                          ") without score");
      }
      if (!db.has_category(label.category)) continue;
      if (*label.score < options.min_score) continue;
      PointCloud crop = crop_points_in_box(frame.cloud, label.box).cloud;
      if (crop.size() < options.min_points) continue;
      db.add(label.category, crop, label.box, *label.score, frame.frame_id, CropMethod::box);
    }
  }
  return db;
}

DatabaseView::DatabaseView(const SampleDatabase& db) : db_(&db) {
  for (const auto& c : db.categories()) by_category_.emplace(c, db.ids(c));
}

const std::vector<SampleId>& DatabaseView::ids(std::string_view category) const {
  const auto it = by_category_.find(category);
  if (it == by_category_.end()) {
    throw InputError("unknown category '" + std::string(category) + "'");
  }
  return it->second;
}

std::size_t DatabaseView::size() const {
  std::size_t n = 0;
  for (const auto& [c, ids] : by_category_) n += ids.size();
  return n;
}

DatabaseView filter_by_score(const SampleDatabase& db, const ThresholdMap& thresholds) {
  for (const auto& [c, t] : thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) throw InputError("threshold for '" + c + "' outside [0, 1]");
  }
  DatabaseView view(db);
  for (auto& [category, ids] : view.by_category_) {
    const auto it = thresholds.find(category);
    if (it == thresholds.end()) {
      throw InputError("no score threshold for category '" + category + "'");
    }
    const double tau = it->second;
    std::erase_if(ids, [&](SampleId id) { return !(db.record(id).score > tau); });
  }
  return view;
}

std::vector<SampleId> draw_sample_ids(const DatabaseView& view, std::string_view category,
                                      std::size_t k, Rng& rng) {
  const auto& pool = view.ids(category);
  const std::size_t n = pool.size();
  const std::size_t take = std::min(k, n);
  // Partial Fisher-Yates over a virtual permutation; only displaced
  // positions are recorded, so cost is O(take^2) rather than O(n).
  std::vector<std::pair<std::size_t, std::size_t>> moved;
  auto at = [&](std::size_t pos) {
    for (const auto& [p, v] : moved) {
      if (p == pos) return v;
    }
    return pos;
  };
  auto put = [&](std::size_t pos, std::size_t value) {
    for (auto& [p, v] : moved) {
      if (p == pos) {
        v = value;
        return;
      }
    }
    moved.emplace_back(pos, value);
  };
  std::vector<SampleId> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    const std::size_t vi = at(i);
    const std::size_t vj = at(j);
    put(j, vi);
    put(i, vj);
    out.push_back(pool[vj]);
  }
  return out;
}

std::vector<ObjectSample> draw_samples(const DatabaseView& view, std::string_view category,
                                       std::size_t k, Rng& rng) {
  std::vector<ObjectSample> out;
  for (SampleId id : draw_sample_ids(view, category, k, rng)) {
    out.push_back(view.database().materialize(id));
  }
  return out;
}

void save_db(const SampleDatabase& db, const fs::path& dir) {
  fs::create_directories(dir);
  std::string meta;
  meta += "format_version=" + std::string(kFormatVersion) + "\n";
  meta += "kind=" + std::string(to_string(db.kind())) + "\n";
  meta += "channel_count=" + std::to_string(db.channel_count()) + "\n";
  meta += "categories=" + join(db.categories(), ',') + "\n";
  meta += "sample_count=" + std::to_string(db.size()) + "\n";
  meta += "store_values=" + std::to_string(db.point_store().size()) + "\n";
  for (const auto& [k, v] : db.metadata()) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw InputError("metadata entry '" + k + "' cannot be stored");
    }
    meta += "meta." + k + "=" + v + "\n";
  }
  write_text_file(dir / "meta", meta);

  std::string index(kIndexHeader);
  index += '\n';
  for (const SampleRecord& r : db.records()) {
    const auto& c = r.box.center();
    const auto& s = r.box.size();
    index += r.category + ' ' + r.source_frame + ' ' + std::to_string(r.offset * 4) + ' ' +
             std::to_string(r.num_points);
    for (double v : {c.x, c.y, c.z, s.x, s.y, s.z, r.box.yaw(), r.score}) {
      index += ' ';
      index += format_real(v);
    }
    index += ' ';
    index += to_string(r.crop);
    index += '\n';
  }
  write_text_file(dir / "index.txt", index);

  const auto store = db.point_store();
  std::vector<std::uint8_t> bytes(store.size() * 4);
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(store[i]);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  write_file_bytes(dir / "points.bin", bytes);
}

SampleDatabase load_db(const fs::path& dir) {
  for (const char* name : {"meta", "index.txt", "points.bin"}) {
    if (!fs::exists(dir / name)) {
      throw NotFoundError("database file missing: " + (dir / name).string());
    }
  }
  std::map<std::string, std::string> meta;
  {
    std::istringstream in(read_text_file(dir / "meta"));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw FormatError("meta: malformed line '" + line + "'");
      meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  auto need = [&](const std::string& key) -> const std::string& {
    const auto it = meta.find(key);
    if (it == meta.end()) throw FormatError("meta: missing key '" + key + "'");
    return it->second;
  };
  if (need("format_version") != kFormatVersion) {
    throw FormatError("unsupported database format version '" + need("format_version") + "'");
  }
  const DatabaseKind kind = parse_kind(need("kind"));
  const std::size_t channels = to_u64(need("channel_count"));
  const std::size_t sample_count = to_u64(need("sample_count"));
  const std::size_t store_values = to_u64(need("store_values"));
  SampleDatabase db = [&] {
    try {
      return SampleDatabase(kind, channels, split(need("categories"), ','));
    } catch (const InputError& e) {
      throw FormatError(std::string("meta: ") + e.what());
    }
  }();
  for (const auto& [k, v] : meta) {
    if (k.rfind("meta.", 0) == 0) db.meta_[k.substr(5)] = v;
  }

  const auto bytes = read_file_bytes(dir / "points.bin");
  if (bytes.size() != store_values * 4) {
    throw FormatError("points.bin holds " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(store_values * 4));
  }
  db.store_.resize(store_values);
  for (std::size_t i = 0; i < store_values; ++i) {
    const std::uint8_t* b = bytes.data() + 4 * i;
    const std::uint32_t bits = std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) |
                               (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
    db.store_[i] = std::bit_cast<float>(bits);
  }

  const std::string index = read_text_file(dir / "index.txt");
  std::istringstream in(index);
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t expected_offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != kIndexHeader) throw FormatError("index.txt: unsupported header");
      continue;
    }
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);
    const std::string where = "index.txt line " + std::to_string(line_no) + ": ";
    if (tok.size() != 13) throw FormatError(where + "expected 13 fields");
    SampleRecord r;
    try {
      r.category = tok[0];
      r.source_frame = tok[1];
      const std::uint64_t byte_offset = to_u64(tok[2]);
      r.num_points = to_u64(tok[3]);
      double v[8];
      for (int i = 0; i < 8; ++i) v[i] = parse_real(tok[4 + i]);
      r.box = OrientedBox3D({v[0], v[1], v[2]}, {v[3], v[4], v[5]}, v[6]);
      r.score = v[7];
      r.crop = parse_crop(tok[12]);
      if (byte_offset % 4 != 0 || byte_offset / 4 != expected_offset) {
        throw FormatError("offset disagrees with point store layout");
      }
      r.offset = byte_offset / 4;
    } catch (const InputError& e) {
      throw FormatError(where + e.what());
    } catch (const FormatError& e) {
      throw FormatError(where + e.what());
    }
    const std::uint64_t end = r.offset + r.num_points * channels;
    if (end > store_values) throw FormatError(where + "sample extends past points.bin");
    const auto it = db.by_category_.find(r.category);
    if (it == db.by_category_.end()) throw FormatError(where + "unknown category");
    if (!(r.score >= 0.0 && r.score <= 1.0)) throw FormatError(where + "score outside [0, 1]");
    if (kind == DatabaseKind::gt && r.score != 1.0) throw FormatError(where + "gt score != 1");
    expected_offset = end;
    it->second.push_back(db.records_.size());
    db.records_.push_back(std::move(r));
  }
  if (db.records_.size() != sample_count) {
    throw FormatError("index.txt lists " + std::to_string(db.records_.size()) +
                      " samples, meta declares " + std::to_string(sample_count));
  }
  if (expected_offset != store_values) {
    throw FormatError("index does not cover the whole point store");
  }
  return db;
}

DbStats db_stats(const SampleDatabase& db) {
  DbStats stats;
  stats.kind = db.kind();
  for (const auto& c : db.categories()) {
    CategoryStats cs;
    cs.point_histogram.assign(kPointBins, 0);
    cs.score_histogram.assign(kScoreBins, 0);
    for (SampleId id : db.ids(c)) {
      const SampleRecord& r = db.record(id);
      ++cs.count;
      cs.total_points += r.num_points;
      const std::size_t pb =
          r.num_points == 0 ? 0 : static_cast<std::size_t>(std::bit_width(r.num_points) - 1);
      ++cs.point_histogram[std::min(pb, kPointBins - 1)];
      const auto sb = static_cast<std::size_t>(r.score * kScoreBins);
      ++cs.score_histogram[std::min(sb, kScoreBins - 1)];
    }
    stats.total += cs.count;
    stats.per_category.emplace(c, std::move(cs));
  }
  return stats;
}

std::string format_db_stats(const DbStats& stats) {
  std::ostringstream out;
  out << "kind " << to_string(stats.kind) << '\n';
  out << "total " << stats.total << '\n';
  for (const auto& [c, cs] : stats.per_category) {
    out << "category " << c << " count " << cs.count << " points " << cs.total_points << '\n';
    out << "  point_histogram";
    std::size_t last = 0;
    for (std::size_t i = 0; i < cs.point_histogram.size(); ++i) {
      if (cs.point_histogram[i]) last = i + 1;
    }
    for (std::size_t i = 0; i < last; ++i) {
      out << ' ' << (std::size_t{1} << i) << ':' << cs.point_histogram[i];
    }
    out << '\n' << "  score_histogram";
    for (std::size_t i = 0; i < cs.score_histogram.size(); ++i) {
      out << ' ' << cs.score_histogram[i];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace semisamp
