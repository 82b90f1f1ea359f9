#include "drseg/clahe.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "drseg/color.hpp"

namespace drseg {
namespace {

constexpr int kBins = 256;

int quantize(float v, float range_max) {
  int q = static_cast<int>(std::lround(v * (kBins - 1) / range_max));
  return std::clamp(q, 0, kBins - 1);
}

}  // namespace

std::vector<float> clahe_channel(const std::vector<float>& channel, int height, int width,
                                 double clip_limit, TileGrid tiles, float range_max) {
  if (height < 1 || width < 1 || channel.size() != static_cast<std::size_t>(height) * width) {
    throw ContractError("clahe_channel: empty or mis-sized channel");
  }
  if (clip_limit <= 0.0) throw ConfigError("clahe_channel: clip_limit must be positive");
  if (tiles.rows < 1 || tiles.cols < 1) throw ConfigError("clahe_channel: tile grid must be >= 1x1");
  if (tiles.rows > height || tiles.cols > width) {
    throw ConfigError("clahe_channel: tile grid " + std::to_string(tiles.rows) + "x" +
                      std::to_string(tiles.cols) + " larger than channel " +
                      std::to_string(height) + "x" + std::to_string(width));
  }

  // Tile bounds: equal partition, last tiles absorb the remainder.
  std::vector<int> row_edge(tiles.rows + 1), col_edge(tiles.cols + 1);
  for (int i = 0; i <= tiles.rows; ++i) row_edge[i] = static_cast<int>(std::lround(double(i) * height / tiles.rows));
  for (int j = 0; j <= tiles.cols; ++j) col_edge[j] = static_cast<int>(std::lround(double(j) * width / tiles.cols));

  // Per-tile equalization LUTs.
  std::vector<double> lut(static_cast<std::size_t>(tiles.rows) * tiles.cols * kBins);
  for (int ti = 0; ti < tiles.rows; ++ti) {
    for (int tj = 0; tj < tiles.cols; ++tj) {
      double hist[kBins] = {0.0};
      const int y0 = row_edge[ti], y1 = row_edge[ti + 1];
      const int x0 = col_edge[tj], x1 = col_edge[tj + 1];
      const double pixels = double(y1 - y0) * (x1 - x0);
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          hist[quantize(channel[static_cast<std::size_t>(y) * width + x], range_max)] += 1.0;
        }
      }
      // Clip at clip_limit x mean bin height; spread excess evenly.
      const double limit = clip_limit * pixels / kBins;
      double excess = 0.0;
      for (double& h : hist) {
        if (h > limit) {
          excess += h - limit;
          h = limit;
        }
      }
      const double share = excess / kBins;
      double cdf_left = 0.0;
      double* tile_lut = &lut[(static_cast<std::size_t>(ti) * tiles.cols + tj) * kBins];
      for (int q = 0; q < kBins; ++q) {
        const double h = hist[q] + share;
        tile_lut[q] = (cdf_left + h / 2.0) * range_max / pixels;
        cdf_left += h;
      }
    }
  }

  // Tile centers for the interpolation lattice.
  std::vector<double> cy(tiles.rows), cx(tiles.cols);
  for (int i = 0; i < tiles.rows; ++i) cy[i] = (row_edge[i] + row_edge[i + 1] - 1) / 2.0;
  for (int j = 0; j < tiles.cols; ++j) cx[j] = (col_edge[j] + col_edge[j + 1] - 1) / 2.0;

  auto lut_at = [&](int ti, int tj, int q) {
    return lut[(static_cast<std::size_t>(ti) * tiles.cols + tj) * kBins + q];
  };

  std::vector<float> out(channel.size());
  for (int y = 0; y < height; ++y) {
    int i1 = int(std::upper_bound(cy.begin(), cy.end(), double(y)) - cy.begin()) - 1;
    i1 = std::clamp(i1, 0, tiles.rows - 1);
    const int i2 = std::min(i1 + 1, tiles.rows - 1);
    double wy = (i1 == i2) ? 0.0 : (y - cy[i1]) / (cy[i2] - cy[i1]);
    wy = std::clamp(wy, 0.0, 1.0);
    for (int x = 0; x < width; ++x) {
      int j1 = int(std::upper_bound(cx.begin(), cx.end(), double(x)) - cx.begin()) - 1;
      j1 = std::clamp(j1, 0, tiles.cols - 1);
      const int j2 = std::min(j1 + 1, tiles.cols - 1);
      double wx = (j1 == j2) ? 0.0 : (x - cx[j1]) / (cx[j2] - cx[j1]);
      wx = std::clamp(wx, 0.0, 1.0);

      const int q = quantize(channel[static_cast<std::size_t>(y) * width + x], range_max);
      const double v = (1 - wy) * ((1 - wx) * lut_at(i1, j1, q) + wx * lut_at(i1, j2, q)) +
                       wy * ((1 - wx) * lut_at(i2, j1, q) + wx * lut_at(i2, j2, q));
      out[static_cast<std::size_t>(y) * width + x] = static_cast<float>(std::clamp(v, 0.0, double(range_max)));
    }
  }
  return out;
}

RasterImage enhance_contrast_lab(const RasterImage& img, double clip_limit, TileGrid tiles) {
  LabImage lab = rgb_to_lab(img);
  lab.L = clahe_channel(lab.L, lab.height, lab.width, clip_limit, tiles, /*range_max=*/100.0f);
  return lab_to_rgb(lab, img.kind());
}

}  // namespace drseg
