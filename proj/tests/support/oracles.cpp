#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>

namespace drseg::testing {

std::vector<float> reference_clahe(const std::vector<float>& channel, int height, int width,
                                   double clip_limit, int tile_rows, int tile_cols,
                                   float range_max) {
  // Tile edges and centers.
  std::vector<int> ys(tile_rows + 1), xs(tile_cols + 1);
  for (int i = 0; i <= tile_rows; ++i) ys[i] = (int)std::lround((double)i * height / tile_rows);
  for (int j = 0; j <= tile_cols; ++j) xs[j] = (int)std::lround((double)j * width / tile_cols);

  // Clipped, redistributed histogram per tile.
  std::vector<std::vector<double>> hist(tile_rows * tile_cols, std::vector<double>(256, 0.0));
  std::vector<double> tile_pixels(tile_rows * tile_cols, 0.0);
  auto bin_of = [&](float v) {
    int q = (int)std::lround(v * 255.0 / range_max);
    return std::min(std::max(q, 0), 255);
  };
  for (int ti = 0; ti < tile_rows; ++ti) {
    for (int tj = 0; tj < tile_cols; ++tj) {
      std::vector<double>& h = hist[ti * tile_cols + tj];
      for (int y = ys[ti]; y < ys[ti + 1]; ++y) {
        for (int x = xs[tj]; x < xs[tj + 1]; ++x) {
          h[bin_of(channel[(std::size_t)y * width + x])] += 1.0;
        }
      }
      const double pixels = (double)(ys[ti + 1] - ys[ti]) * (xs[tj + 1] - xs[tj]);
      tile_pixels[ti * tile_cols + tj] = pixels;
      const double limit = clip_limit * pixels / 256.0;
      double excess = 0.0;
      for (double& b : h) {
        if (b > limit) {
          excess += b - limit;
          b = limit;
        }
      }
      for (double& b : h) b += excess / 256.0;
    }
  }

  std::vector<double> cy(tile_rows), cx(tile_cols);
  for (int i = 0; i < tile_rows; ++i) cy[i] = (ys[i] + ys[i + 1] - 1) / 2.0;
  for (int j = 0; j < tile_cols; ++j) cx[j] = (xs[j] + xs[j + 1] - 1) / 2.0;

  // Midpoint equalization map, evaluated by direct summation.
  auto map_value = [&](int ti, int tj, int q) {
    const std::vector<double>& h = hist[ti * tile_cols + tj];
    double below = 0.0;
    for (int b = 0; b < q; ++b) below += h[b];
    return (below + h[q] / 2.0) * range_max / tile_pixels[ti * tile_cols + tj];
  };

  std::vector<float> out(channel.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      // Surrounding tile centers, clamped at the borders.
      int i1 = tile_rows - 1;
      for (int i = 0; i < tile_rows; ++i) {
        if (cy[i] > y) {
          i1 = i - 1;
          break;
        }
      }
      i1 = std::min(std::max(i1, 0), tile_rows - 1);
      const int i2 = std::min(i1 + 1, tile_rows - 1);
      double wy = i1 == i2 ? 0.0 : (y - cy[i1]) / (cy[i2] - cy[i1]);
      wy = std::min(std::max(wy, 0.0), 1.0);

      int j1 = tile_cols - 1;
      for (int j = 0; j < tile_cols; ++j) {
        if (cx[j] > x) {
          j1 = j - 1;
          break;
        }
      }
      j1 = std::min(std::max(j1, 0), tile_cols - 1);
      const int j2 = std::min(j1 + 1, tile_cols - 1);
      double wx = j1 == j2 ? 0.0 : (x - cx[j1]) / (cx[j2] - cx[j1]);
      wx = std::min(std::max(wx, 0.0), 1.0);

      const int q = bin_of(channel[(std::size_t)y * width + x]);
      const double v = (1 - wy) * ((1 - wx) * map_value(i1, j1, q) + wx * map_value(i1, j2, q)) +
                       wy * ((1 - wx) * map_value(i2, j1, q) + wx * map_value(i2, j2, q));
      out[(std::size_t)y * width + x] = (float)std::min(std::max(v, 0.0), (double)range_max);
    }
  }
  return out;
}

BoundingBox reference_foreground_box(const RasterImage& img, float threshold) {
  BoundingBox box;
  int min_y = img.height(), max_y = -1, min_x = img.width(), max_x = -1;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      float gray;
      if (img.channels() == 3) {
        gray = 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) + 0.114f * img.at(y, x, 2);
      } else {
        gray = img.at(y, x, 0);
      }
      if (gray > threshold) {
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
      }
    }
  }
  if (max_y < 0) return box;
  box.found = true;
  box.top = min_y;
  box.left = min_x;
  box.height = max_y - min_y + 1;
  box.width = max_x - min_x + 1;
  return box;
}

ReferenceRatios reference_ratios(const BinaryMask& pred, const BinaryMask& truth) {
  double tp = 0, tn = 0, fp = 0, fn = 0;
  for (int y = 0; y < pred.height; ++y) {
    for (int x = 0; x < pred.width; ++x) {
      const bool p = pred.at(y, x) != 0;
      const bool t = truth.at(y, x) != 0;
      if (p && t) tp += 1;
      if (!p && !t) tn += 1;
      if (p && !t) fp += 1;
      if (!p && t) fn += 1;
    }
  }
  ReferenceRatios r{};
  r.accuracy = (tp + tn) / (tp + tn + fp + fn);
  r.specificity = (tn + fp) == 0 ? 1.0 : tn / (tn + fp);
  r.sensitivity = (tp + fn) == 0 ? 1.0 : tp / (tp + fn);
  r.precision = (tp + fp) == 0 ? 1.0 : tp / (tp + fp);
  r.f1 = (r.precision + r.sensitivity) == 0 ? 0.0
                                            : 2.0 * r.precision * r.sensitivity /
                                                  (r.precision + r.sensitivity);
  r.iou = (tp + fp + fn) == 0 ? 1.0 : tp / (tp + fp + fn);
  return r;
}

double reference_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  double concordant = 0.0;
  long long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) {
        concordant += 1.0;
      } else if (scores[i] == scores[j]) {
        concordant += 0.5;
      }
    }
  }
  return concordant / (double)pairs;
}

double reference_lightness(double r8, double g8, double b8) {
  auto lin = [](double c) {
    c /= 255.0;
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
  };
  const double y = 0.2126729 * lin(r8) + 0.7151522 * lin(g8) + 0.0721750 * lin(b8);
  const double t = y / 1.0;
  const double f = t > std::pow(6.0 / 29.0, 3.0) ? std::cbrt(t)
                                                 : t / (3.0 * std::pow(6.0 / 29.0, 2.0)) + 4.0 / 29.0;
  return 116.0 * f - 16.0;
}

}  // namespace drseg::testing
