#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mtnetkit/bbox.hpp"
#include "mtnetkit/image.hpp"

namespace mtnet {

/// One `x,y,w,h` box per line; commas, tabs or spaces separate fields and
/// blank lines are skipped.
std::vector<PixelBox> parse_boxes(std::string_view text, const std::string& source = "<text>");
std::vector<PixelBox> read_boxes(const std::filesystem::path& path);
std::string format_box(const PixelBox& box);
void write_boxes(const std::filesystem::path& path, std::span<const PixelBox> boxes);

/// Sequence layout on disk:
///   <dir>/rgb/000001.ppm ...  <dir>/thermal/000001.pgm ...  <dir>/groundtruth.txt
struct SequenceInfo {
  std::filesystem::path dir;
  std::string name;
  std::size_t frame_count = 0;
  std::vector<PixelBox> groundtruth;
};

std::filesystem::path rgb_frame_path(const std::filesystem::path& dir, std::size_t index);
std::filesystem::path thermal_frame_path(const std::filesystem::path& dir, std::size_t index);

/// Validates the layout and that frame and ground-truth counts agree.
SequenceInfo open_sequence(const std::filesystem::path& dir);
bool looks_like_sequence(const std::filesystem::path& dir);

/// Loads frame `index` (0-based; files are numbered from 1).
Frame load_frame(const SequenceInfo& seq, std::size_t index);

/// Sidecar of `sequence_name attr1,attr2,...` lines.
std::map<std::string, std::vector<std::string>> read_attributes(const std::filesystem::path& path);
std::map<std::string, std::vector<std::string>> parse_attributes(std::string_view text);

}  // namespace mtnet
