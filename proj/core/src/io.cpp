#include "semisamp/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "semisamp/error.hpp"

namespace semisamp {

namespace fs = std::filesystem;

namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    ++line_no;
    std::string_view line = text.substr(pos, end - pos);
    const auto first = line.find_first_not_of(" \t\r");
    if (first != std::string_view::npos && line[first] != '#') fn(line, line_no);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
}

std::size_t parse_index(std::string_view text) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw FormatError("invalid index '" + std::string(text) + "'");
  }
  return v;
}

[[noreturn]] void fail_line(std::size_t line_no, const std::string& what) {
  throw FormatError("line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::string_view to_string(LabelSource source) {
  switch (source) {
    case LabelSource::groundtruth: return "groundtruth";
    case LabelSource::pseudo: return "pseudo";
    case LabelSource::pasted_gt: return "pasted_gt";
    case LabelSource::pasted_pseudo: return "pasted_pseudo";
  }
  return "groundtruth";
}

LabelSource parse_label_source(std::string_view name) {
  if (name == "groundtruth") return LabelSource::groundtruth;
  if (name == "pseudo") return LabelSource::pseudo;
  if (name == "pasted_gt") return LabelSource::pasted_gt;
  if (name == "pasted_pseudo") return LabelSource::pasted_pseudo;
  throw FormatError("unknown label source '" + std::string(name) + "'");
}

std::string format_real(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

double parse_real(std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw FormatError("invalid real '" + std::string(text) + "'");
  }
  return v;
}

PointCloud read_points_bin(std::span<const std::uint8_t> bytes, std::size_t channel_count) {
  if (channel_count < 3) throw FormatError("channel_count must be at least 3");
  const std::size_t row_bytes = 4 * channel_count;
  if (bytes.size() % row_bytes != 0) {
    throw FormatError("points payload of " + std::to_string(bytes.size()) +
                      " bytes is not a multiple of " + std::to_string(row_bytes));
  }
  std::vector<double> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint8_t* b = bytes.data() + 4 * i;
    const std::uint32_t bits = std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) |
                               (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
    const float f = std::bit_cast<float>(bits);
    if (!std::isfinite(f)) {
      throw FormatError("non-finite value at point " + std::to_string(i / channel_count));
    }
    values[i] = f;
  }
  return PointCloud(channel_count, std::move(values));
}

std::vector<std::uint8_t> write_points_bin(const PointCloud& cloud) {
  const auto values = cloud.values();
  std::vector<std::uint8_t> out(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto f = static_cast<float>(values[i]);
    if (!std::isfinite(f)) throw FormatError("value overflows float32");
    const auto bits = std::bit_cast<std::uint32_t>(f);
    out[4 * i] = static_cast<std::uint8_t>(bits);
    out[4 * i + 1] = static_cast<std::uint8_t>(bits >> 8);
    out[4 * i + 2] = static_cast<std::uint8_t>(bits >> 16);
    out[4 * i + 3] = static_cast<std::uint8_t>(bits >> 24);
  }
  return out;
}

std::vector<Label> read_labels(std::string_view text) {
  std::vector<Label> labels;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const auto tok = split_ws(line);
    if (tok.size() != 10) {
      fail_line(line_no, "expected 10 fields, found " + std::to_string(tok.size()));
    }
    try {
      Label label;
      label.category = std::string(tok[0]);
      double v[7];
      for (int i = 0; i < 7; ++i) v[i] = parse_real(tok[1 + i]);
      label.box = OrientedBox3D({v[0], v[1], v[2]}, {v[3], v[4], v[5]}, v[6]);
      if (tok[8] != "-") {
        const double s = parse_real(tok[8]);
        if (s < 0.0 || s > 1.0) throw FormatError("score outside [0, 1]");
        label.score = s;
      }
      label.source = parse_label_source(tok[9]);
      if (label.source == LabelSource::groundtruth && label.score && *label.score != 1.0) {
        throw FormatError("groundtruth label with score other than 1");
      }
      if ((label.source == LabelSource::pseudo || label.source == LabelSource::pasted_pseudo) &&
          !label.score) {
        throw FormatError("pseudo label without score");
      }
      labels.push_back(std::move(label));
    } catch (const FormatError& e) {
      fail_line(line_no, e.what());
    } catch (const InputError& e) {
      fail_line(line_no, e.what());
    }
  });
  return labels;
}

std::string write_labels(std::span<const Label> labels) {
  std::string out;
  for (const Label& l : labels) {
    if (l.category.empty() || l.category.find_first_of(" \t\r\n#") != std::string::npos) {
      throw InputError("category '" + l.category + "' cannot be serialized");
    }
    const auto& c = l.box.center();
    const auto& s = l.box.size();
    out += l.category;
    for (double v : {c.x, c.y, c.z, s.x, s.y, s.z, l.box.yaw()}) {
      out += ' ';
      out += format_real(v);
    }
    out += ' ';
    out += l.score ? format_real(*l.score) : std::string("-");
    out += ' ';
    out += to_string(l.source);
    out += '\n';
  }
  return out;
}

InstanceMasks read_masks(std::string_view text) {
  InstanceMasks masks;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) fail_line(line_no, "missing ':'");
    try {
      const auto key_tok = split_ws(line.substr(0, colon));
      if (key_tok.size() != 1) throw FormatError("expected one label index before ':'");
      const std::size_t key = parse_index(key_tok[0]);
      std::vector<std::size_t> idx;
      for (auto t : split_ws(line.substr(colon + 1))) idx.push_back(parse_index(t));
      if (!masks.emplace(key, std::move(idx)).second) {
        throw FormatError("duplicate mask for label " + std::to_string(key));
      }
    } catch (const FormatError& e) {
      fail_line(line_no, e.what());
    }
  });
  return masks;
}

std::string write_masks(const InstanceMasks& masks) {
  std::string out;
  for (const auto& [key, idx] : masks) {
    out += std::to_string(key);
    out += ':';
    for (std::size_t i : idx) {
      out += ' ';
      out += std::to_string(i);
    }
    out += '\n';
  }
  return out;
}

DatasetManifest read_manifest(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / kManifestFile : path;
  if (!fs::exists(file)) throw NotFoundError("manifest not found: " + file.string());
  DatasetManifest m;
  m.root = file.parent_path();
  try {
    const auto j = nlohmann::json::parse(read_text_file(file));
    m.channel_count = j.value("channel_count", kDefaultChannelCount);
    m.categories = j.at("categories").get<std::vector<std::string>>();
    m.labeled = j.value("labeled", std::vector<std::string>{});
    m.unlabeled = j.value("unlabeled", std::vector<std::string>{});
    m.eval = j.value("eval", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + file.string() + ": " + e.what());
  }
  if (m.channel_count < 3) throw FormatError("manifest channel_count must be at least 3");
  if (m.categories.empty()) throw FormatError("manifest declares no categories");
  const std::set<std::string> labeled(m.labeled.begin(), m.labeled.end());
  for (const auto& id : m.unlabeled) {
    if (labeled.count(id)) throw FormatError("frame '" + id + "' is both labeled and unlabeled");
  }
  return m;
}

void write_manifest(const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["channel_count"] = m.channel_count;
  j["categories"] = m.categories;
  j["labeled"] = m.labeled;
  j["unlabeled"] = m.unlabeled;
  j["eval"] = m.eval;
  fs::create_directories(m.root);
  write_text_file(m.root / kManifestFile, j.dump(2) + "\n");
}

FramePaths frame_paths(const fs::path& root, std::string_view frame_id) {
  const std::string id(frame_id);
  return {root / (id + ".bin"), root / (id + ".labels"), root / (id + ".masks"),
          root / (id + ".truth"), root / (id + ".pseudo")};
}

Frame load_frame(const fs::path& root, std::string_view frame_id, std::size_t channel_count) {
  const FramePaths p = frame_paths(root, frame_id);
  if (!fs::exists(p.points)) throw NotFoundError("points file not found: " + p.points.string());
  Frame f;
  f.frame_id = std::string(frame_id);
  try {
    f.cloud = read_points_bin(read_file_bytes(p.points), channel_count);
  } catch (const FormatError& e) {
    throw FormatError(p.points.string() + ": " + e.what());
  }
  if (auto labels = read_label_file(p.labels)) f.labels = std::move(*labels);
  if (fs::exists(p.masks)) {
    InstanceMasks masks;
    try {
      masks = read_masks(read_text_file(p.masks));
    } catch (const FormatError& e) {
      throw FormatError(p.masks.string() + ": " + e.what());
    }
    for (const auto& [key, idx] : masks) {
      if (key >= f.labels.size()) {
        throw FormatError(p.masks.string() + ": mask for label " + std::to_string(key) +
                          " but frame has " + std::to_string(f.labels.size()) + " labels");
      }
      for (std::size_t i : idx) {
        if (i >= f.cloud.size()) {
          throw FormatError(p.masks.string() + ": index " + std::to_string(i) +
                            " out of range for " + std::to_string(f.cloud.size()) + " points");
        }
      }
    }
    f.instance_masks = std::move(masks);
  }
  return f;
}

void save_frame(const fs::path& root, const Frame& frame) {
  const FramePaths p = frame_paths(root, frame.frame_id);
  fs::create_directories(root);
  write_file_bytes(p.points, write_points_bin(frame.cloud));
  if (!frame.labels.empty()) write_label_file(p.labels, frame.labels);
  if (frame.instance_masks) write_text_file(p.masks, write_masks(*frame.instance_masks));
}

std::optional<std::vector<Label>> read_label_file(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    return read_labels(read_text_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_label_file(const fs::path& path, std::span<const Label> labels) {
  write_text_file(path, write_labels(labels));
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed: " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw InputError("write failed: " + path.string());
}

}  // namespace semisamp
