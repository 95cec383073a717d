#include "disc/common/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include "disc/errors.hpp"

namespace disc {

namespace {

unsigned char to_byte(float x) {
  const float c = std::clamp(std::isnan(x) ? 0.0f : x, 0.0f, 1.0f);
  return static_cast<unsigned char>(std::lround(c * 255.0f));
}

void write_pnm(const std::filesystem::path &path, const Tensor<float> &image, std::size_t channels, char magic) {
  const auto &s = image.shape();
  if (s.size() != 3 || s[0] != channels)
    throw std::invalid_argument("cannot write a " + to_string(s) + " tensor as P" + magic);
  const std::size_t h = s[1], w = s[2];
  std::vector<unsigned char> bytes(channels * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < channels; ++c)
        bytes[(y * w + x) * channels + c] = to_byte(image[(c * h + y) * w + x]);
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot write " + path.string());
  out << 'P' << magic << '\n' << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw IoError("failed writing " + path.string());
}

std::size_t read_header_int(std::istream &in, const std::filesystem::path &path) {
  in >> std::ws;
  while (in.peek() == '#') {
    std::string comment;
    std::getline(in, comment);
    in >> std::ws;
  }
  long long v = -1;
  if (!(in >> v) || v <= 0)
    throw DataError(path.string() + ": malformed image header");
  return static_cast<std::size_t>(v);
}

} // namespace

void write_ppm(const std::filesystem::path &path, const Tensor<float> &image) { write_pnm(path, image, 3, '6'); }
void write_pgm(const std::filesystem::path &path, const Tensor<float> &image) { write_pnm(path, image, 1, '5'); }

float quantize_level(float x) { return static_cast<float>(to_byte(x)) / 255.0f; }

Tensor<float> read_pnm(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot read " + path.string());
  char p = 0, magic = 0;
  in.get(p).get(magic);
  if (p != 'P' || (magic != '5' && magic != '6'))
    throw DataError(path.string() + ": not a binary PGM/PPM file");
  const std::size_t channels = magic == '6' ? 3 : 1;
  const auto w = read_header_int(in, path);
  const auto h = read_header_int(in, path);
  if (read_header_int(in, path) != 255)
    throw DataError(path.string() + ": only 8-bit images are supported");
  in.get(); // single whitespace before the raster
  std::vector<unsigned char> bytes(channels * h * w);
  in.read(reinterpret_cast<char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw DataError(path.string() + ": truncated raster");
  Tensor<float> image(Shape{channels, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < channels; ++c)
        image[(c * h + y) * w + x] = static_cast<float>(bytes[(y * w + x) * channels + c]) / 255.0f;
  return image;
}

} // namespace disc
