#include "mtnetkit/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "mtnetkit/error.hpp"

namespace mtnet {

void validate_frame(const Frame& frame) {
  const Tensor& rgb = frame.rgb;
  const Tensor& th = frame.thermal;
  if (rgb.rank() != 3 || rgb.dim(0) != 3) throw ShapeError("frame: rgb must be [3,H,W]");
  if (th.rank() != 3 || th.dim(0) != 1) throw ShapeError("frame: thermal must be [1,H,W]");
  if (rgb.dim(1) != th.dim(1) || rgb.dim(2) != th.dim(2)) {
    throw ShapeError("frame: rgb " + shape_string(rgb.shape()) + " and thermal " +
                     shape_string(th.shape()) + " differ in size");
  }
  if (rgb.dim(1) == 0 || rgb.dim(2) == 0) throw ShapeError("frame: empty image");
  const auto in_range = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!std::all_of(rgb.data().begin(), rgb.data().end(), in_range) ||
      !std::all_of(th.data().begin(), th.data().end(), in_range)) {
    throw ShapeError("frame: pixel values outside [0,1]");
  }
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in, const std::filesystem::path& path) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  if (token.empty()) throw IoError(path.string() + ": truncated header");
  return token;
}

std::size_t parse_extent(const std::string& token, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const long v = std::stol(token, &used);
    if (used != token.size() || v <= 0) throw std::invalid_argument(token);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw IoError(path.string() + ": bad header field '" + token + "'");
  }
}

Tensor read_netpbm(const std::filesystem::path& path, const char* magic, std::size_t channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  if (next_token(in, path) != magic) {
    throw IoError(path.string() + ": expected netpbm " + magic);
  }
  const std::size_t width = parse_extent(next_token(in, path), path);
  const std::size_t height = parse_extent(next_token(in, path), path);
  const std::size_t maxval = parse_extent(next_token(in, path), path);
  if (maxval != 255) throw IoError(path.string() + ": only 8-bit (maxval 255) supported");

  std::vector<unsigned char> raw(width * height * channels);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw IoError(path.string() + ": truncated pixel data");
  }
  Tensor out({channels, height, width});
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        out.at(c, y, x) = raw[(y * width + x) * channels + c] / 255.0;
      }
    }
  }
  return out;
}

void write_netpbm(const std::filesystem::path& path, const Tensor& img, const char* magic,
                  std::size_t channels) {
  if (img.rank() != 3 || img.dim(0) != channels) {
    throw ShapeError(std::string("write ") + magic + ": unexpected shape " +
                     shape_string(img.shape()));
  }
  const std::size_t height = img.dim(1), width = img.dim(2);
  std::vector<unsigned char> raw(width * height * channels);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
        raw[(y * width + x) * channels + c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << magic << '\n' << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

Tensor read_ppm(const std::filesystem::path& path) { return read_netpbm(path, "P6", 3); }
Tensor read_pgm(const std::filesystem::path& path) { return read_netpbm(path, "P5", 1); }
void write_ppm(const std::filesystem::path& path, const Tensor& rgb) {
  write_netpbm(path, rgb, "P6", 3);
}
void write_pgm(const std::filesystem::path& path, const Tensor& gray) {
  write_netpbm(path, gray, "P5", 1);
}

}  // namespace mtnet
