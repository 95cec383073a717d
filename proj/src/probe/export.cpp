#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "disc/common/image_io.hpp"
#include "disc/errors.hpp"
#include "disc/probe/probe.hpp"

namespace disc::probe {

namespace {

void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot write " + path.string());
  out << text;
  if (!out.flush())
    throw IoError("failed writing " + path.string());
}

std::string number(double v) {
  if (std::isnan(v))
    return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

} // namespace

void write_distance_csv(const std::filesystem::path &path, const DistanceStats &stats) {
  std::string text = "category";
  for (auto c : stats.categories)
    text += "," + std::to_string(c);
  text += "\n";
  for (std::size_t a = 0; a < stats.categories.size(); ++a) {
    text += std::to_string(stats.categories[a]);
    for (double v : stats.matrix[a])
      text += "," + number(v);
    text += "\n";
  }
  write_text(path, text);
}

void write_distance_heatmap(const std::filesystem::path &path, const DistanceStats &stats, std::size_t cell) {
  if (cell == 0)
    throw std::invalid_argument("heat-map cell size must be positive");
  const std::size_t K = stats.matrix.size();
  double lo = INFINITY, hi = -INFINITY;
  for (const auto &row : stats.matrix)
    for (double v : row)
      if (!std::isnan(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  Tensor<float> image(Shape{1, K * cell, K * cell});
  for (std::size_t a = 0; a < K; ++a)
    for (std::size_t b = 0; b < K; ++b) {
      const double v = stats.matrix[a][b];
      float level = 0.0f;
      if (!std::isnan(v))
        level = hi > lo ? static_cast<float>((v - lo) / (hi - lo)) : 1.0f;
      for (std::size_t y = a * cell; y < (a + 1) * cell; ++y)
        for (std::size_t x = b * cell; x < (b + 1) * cell; ++x)
          image[y * K * cell + x] = level;
    }
  write_pgm(path, image);
}

void write_retrieval_grid(const std::filesystem::path &path, const std::vector<RetrievalRow> &rows,
                          const std::vector<Tensor<float>> &images, std::size_t gutter) {
  if (rows.empty())
    throw std::invalid_argument("no retrievals to draw");
  const auto &first = images.at(rows.front().query_ref);
  if (first.rank() != 3 || first.shape()[0] != 3)
    throw std::invalid_argument("retrieval grids need 3 x H x W images");
  const std::size_t h = first.shape()[1], w = first.shape()[2];
  std::size_t columns = 0;
  for (const auto &r : rows)
    columns = std::max(columns, r.neighbors.size() + 1);
  const std::size_t H = rows.size() * h + (rows.size() + 1) * gutter;
  const std::size_t W = columns * w + (columns + 1) * gutter;
  Tensor<float> canvas(Shape{3, H, W}, 1.0f);
  const auto paste = [&](std::size_t ref, std::size_t row, std::size_t col) {
    const auto &img = images.at(ref);
    if (img.shape() != first.shape())
      throw std::invalid_argument("retrieval images differ in shape");
    const std::size_t y0 = gutter + row * (h + gutter), x0 = gutter + col * (w + gutter);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          canvas[(c * H + y0 + y) * W + x0 + x] = img[(c * h + y) * w + x];
  };
  for (std::size_t r = 0; r < rows.size(); ++r) {
    paste(rows[r].query_ref, r, 0);
    for (std::size_t k = 0; k < rows[r].neighbors.size(); ++k)
      paste(rows[r].neighbors[k].ref, r, k + 1);
  }
  write_ppm(path, canvas);
}

void write_confusion_csv(const std::filesystem::path &path, const std::vector<std::vector<std::size_t>> &confusion) {
  std::string text = "true\\predicted";
  for (std::size_t c = 0; c < confusion.size(); ++c)
    text += "," + std::to_string(c);
  text += "\n";
  for (std::size_t t = 0; t < confusion.size(); ++t) {
    text += std::to_string(t);
    for (auto v : confusion[t])
      text += "," + std::to_string(v);
    text += "\n";
  }
  write_text(path, text);
}

} // namespace disc::probe
