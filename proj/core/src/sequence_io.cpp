#include "mtnetkit/sequence_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mtnetkit/error.hpp"

namespace mtnet {

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto end = text.find('\n');
    const std::string_view line = text.substr(0, end);
    ++line_no;
    fn(line, line_no);
    if (end == std::string_view::npos) break;
    text.remove_prefix(end + 1);
  }
}

}  // namespace

std::vector<PixelBox> parse_boxes(std::string_view text, const std::string& source) {
  std::vector<PixelBox> boxes;
  for_each_line(text, [&](std::string_view raw, std::size_t line_no) {
    const std::string_view line = trim(raw);
    if (line.empty()) return;
    std::string fields(line);
    for (char& ch : fields) {
      if (ch == ',' || ch == '\t') ch = ' ';
    }
    std::istringstream in(fields);
    in.imbue(std::locale::classic());
    double v[4];
    std::string rest;
    if (!(in >> v[0] >> v[1] >> v[2] >> v[3]) || (in >> rest)) {
      throw IoError(source + ":" + std::to_string(line_no) + ": expected four numbers x,y,w,h");
    }
    for (double x : v) {
      if (!std::isfinite(x)) {
        throw IoError(source + ":" + std::to_string(line_no) + ": non-finite coordinate");
      }
    }
    if (v[2] < 0 || v[3] < 0) {
      throw IoError(source + ":" + std::to_string(line_no) + ": negative box extent");
    }
    boxes.push_back({v[0], v[1], v[2], v[3]});
  });
  return boxes;
}

std::vector<PixelBox> read_boxes(const fs::path& path) {
  return parse_boxes(slurp(path), path.string());
}

std::string format_box(const PixelBox& b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%.4f", b.x, b.y, b.w, b.h);
  return buf;
}

void write_boxes(const fs::path& path, std::span<const PixelBox> boxes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const PixelBox& b : boxes) out << format_box(b) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

fs::path numbered(const fs::path& dir, const char* sub, std::size_t index, const char* ext) {
  char name[32];
  std::snprintf(name, sizeof name, "%06zu.%s", index, ext);
  return dir / sub / name;
}

}  // namespace

fs::path rgb_frame_path(const fs::path& dir, std::size_t index) {
  return numbered(dir, "rgb", index, "ppm");
}

fs::path thermal_frame_path(const fs::path& dir, std::size_t index) {
  return numbered(dir, "thermal", index, "pgm");
}

bool looks_like_sequence(const fs::path& dir) {
  std::error_code ec;
  return fs::is_regular_file(dir / "groundtruth.txt", ec) && fs::is_directory(dir / "rgb", ec) &&
         fs::is_directory(dir / "thermal", ec);
}

SequenceInfo open_sequence(const fs::path& dir) {
  if (!looks_like_sequence(dir)) {
    throw IoError(dir.string() + ": expected rgb/, thermal/ and groundtruth.txt");
  }
  SequenceInfo seq;
  seq.dir = dir;
  fs::path norm = fs::absolute(dir).lexically_normal();
  if (norm.filename().empty()) norm = norm.parent_path();
  seq.name = norm.filename().string();
  seq.groundtruth = read_boxes(dir / "groundtruth.txt");
  if (seq.groundtruth.empty()) throw IoError(dir.string() + ": groundtruth.txt is empty");
  std::size_t n = 0;
  while (fs::exists(rgb_frame_path(dir, n + 1))) ++n;
  if (n != seq.groundtruth.size()) {
    throw IoError(dir.string() + ": " + std::to_string(n) + " rgb frames but " +
                  std::to_string(seq.groundtruth.size()) + " ground-truth rows");
  }
  for (std::size_t i = 1; i <= n; ++i) {
    if (!fs::exists(thermal_frame_path(dir, i))) {
      throw IoError("missing thermal frame " + thermal_frame_path(dir, i).string());
    }
  }
  seq.frame_count = n;
  return seq;
}

Frame load_frame(const SequenceInfo& seq, std::size_t index) {
  if (index >= seq.frame_count) throw std::out_of_range("load_frame: index past sequence end");
  Frame f{read_ppm(rgb_frame_path(seq.dir, index + 1)),
          read_pgm(thermal_frame_path(seq.dir, index + 1)), static_cast<int>(index)};
  validate_frame(f);
  return f;
}

std::map<std::string, std::vector<std::string>> parse_attributes(std::string_view text) {
  std::map<std::string, std::vector<std::string>> out;
  for_each_line(text, [&](std::string_view raw, std::size_t line_no) {
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') return;
    const auto split = line.find_first_of(" \t");
    if (split == std::string_view::npos) {
      throw IoError("attributes:" + std::to_string(line_no) + ": expected 'name attr1,attr2'");
    }
    std::vector<std::string>& tags = out[std::string(line.substr(0, split))];
    std::string_view rest = trim(line.substr(split));
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view tag = trim(rest.substr(0, comma));
      if (!tag.empty()) tags.emplace_back(tag);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
  });
  return out;
}

std::map<std::string, std::vector<std::string>> read_attributes(const fs::path& path) {
  return parse_attributes(slurp(path));
}

}  // namespace mtnet
