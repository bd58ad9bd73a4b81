#include "qtae/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace qtae {

std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

std::vector<std::uint8_t> to_interleaved_bytes(const Image& image) {
  require(image.rank() == 3, "expected a [C,H,W] image");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::vector<std::uint8_t> out(c * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) out[(y * w + x) * c + ch] = to_byte(image[(ch * h + y) * w + x]);
  return out;
}

Image from_interleaved_bytes(const std::uint8_t* bytes, std::size_t channels, std::size_t height, std::size_t width) {
  Image img({channels, height, width});
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t ch = 0; ch < channels; ++ch)
        img[(ch * height + y) * width + x] = static_cast<float>(bytes[(y * width + x) * channels + ch]) / 255.0f;
  return img;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  require(image.rank() == 3 && (image.dim(0) == 1 || image.dim(0) == 3), "write_ppm: expected a 1- or 3-channel image");
  const std::size_t h = image.dim(1), w = image.dim(2);
  Image rgb = image;
  if (image.dim(0) == 1) {
    rgb = Image({3, h, w});
    for (std::size_t ch = 0; ch < 3; ++ch) std::copy(image.ptr(), image.ptr() + h * w, rgb.ptr() + ch * h * w);
  }
  const auto bytes = to_interleaved_bytes(rgb);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P6\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

namespace {

// Reads the next whitespace-separated header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  while (in) {
    int c = in.get();
    if (c == '#') {
      while (in && c != '\n') c = in.get();
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    if (c == EOF) break;
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace

Image read_ppm(const std::filesystem::path& path, std::size_t channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string magic = next_token(in);
  if (magic != "P6" && magic != "P5") throw FormatError("not a binary PPM/PGM: " + path.string(), 0);
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_token(in));
    h = std::stoul(next_token(in));
    maxval = std::stoul(next_token(in));
  } catch (const std::exception&) {
    throw FormatError("bad PPM header in " + path.string(), static_cast<std::size_t>(in.tellg()));
  }
  if (maxval != 255 || w == 0 || h == 0) throw FormatError("unsupported PPM header in " + path.string(), 0);
  const std::size_t file_c = magic == "P6" ? 3 : 1;
  std::vector<std::uint8_t> bytes(w * h * file_c);
  const auto header_end = static_cast<std::size_t>(in.tellg());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size())
    throw FormatError("truncated PPM pixel data in " + path.string(), header_end + static_cast<std::size_t>(in.gcount()));
  Image img = from_interleaved_bytes(bytes.data(), file_c, h, w);
  if (channels == 0 || channels == file_c) return img;
  require(channels == 1 || channels == 3, "read_ppm: channels must be 1 or 3");
  Image out({channels, h, w});
  if (channels == 1) {
    for (std::size_t i = 0; i < h * w; ++i) out[i] = (img[i] + img[h * w + i] + img[2 * h * w + i]) / 3.0f;
  } else {
    for (std::size_t ch = 0; ch < 3; ++ch) std::copy(img.ptr(), img.ptr() + h * w, out.ptr() + ch * h * w);
  }
  return out;
}

Image tile_grid(const std::vector<Image>& frames, std::size_t rows, std::size_t cols) {
  require(!frames.empty() && frames.size() <= rows * cols, "tile_grid: frame count does not fit the grid");
  const auto& s = frames.front().shape();
  for (const auto& f : frames) require(f.shape() == s, "tile_grid: frames must share a shape");
  const std::size_t c = s[0], h = s[1], w = s[2];
  Image out({c, rows * h, cols * w});
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::size_t r = i / cols, q = i % cols;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        std::copy(frames[i].ptr() + (ch * h + y) * w, frames[i].ptr() + (ch * h + y + 1) * w,
                  out.ptr() + (ch * rows * h + r * h + y) * cols * w + q * w);
  }
  return out;
}

Image center_canvas(const Image& image, std::size_t height, std::size_t width) {
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Image out({c, height, width});
  const long oy = (static_cast<long>(height) - static_cast<long>(h)) / 2;
  const long ox = (static_cast<long>(width) - static_cast<long>(w)) / 2;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (long y = 0; y < static_cast<long>(height); ++y)
      for (long x = 0; x < static_cast<long>(width); ++x) {
        const long sy = y - oy, sx = x - ox;
        if (sy >= 0 && sy < static_cast<long>(h) && sx >= 0 && sx < static_cast<long>(w))
          out[(ch * height + static_cast<std::size_t>(y)) * width + static_cast<std::size_t>(x)] =
              image[(ch * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)];
      }
  return out;
}

}  // namespace qtae
