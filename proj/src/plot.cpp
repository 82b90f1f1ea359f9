#include "drseg/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>

#include "drseg/image_io.hpp"

namespace drseg {
namespace {

// 5x7 glyphs for axis labels and the legend, one bit per pixel.
const std::map<char, std::array<std::uint8_t, 7>>& glyphs() {
  static const std::map<char, std::array<std::uint8_t, 7>> table = {
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
      {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
      {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
      {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
      {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
      {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
      {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
      {'e', {0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E}},
      {'t', {0x08, 0x08, 0x1C, 0x08, 0x08, 0x09, 0x06}},
      {'r', {0x00, 0x00, 0x16, 0x19, 0x10, 0x10, 0x10}},
      {'a', {0x00, 0x00, 0x0E, 0x01, 0x0F, 0x11, 0x0F}},
      {'i', {0x04, 0x00, 0x0C, 0x04, 0x04, 0x04, 0x0E}},
      {'n', {0x00, 0x00, 0x16, 0x19, 0x11, 0x11, 0x11}},
      {'v', {0x00, 0x00, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {'l', {0x0C, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'o', {0x00, 0x00, 0x0E, 0x11, 0x11, 0x11, 0x0E}},
      {'s', {0x00, 0x00, 0x0F, 0x10, 0x0E, 0x01, 0x1E}},
      {'p', {0x00, 0x00, 0x1E, 0x11, 0x1E, 0x10, 0x10}},
      {'c', {0x00, 0x00, 0x0E, 0x10, 0x10, 0x11, 0x0E}},
      {'h', {0x10, 0x10, 0x16, 0x19, 0x11, 0x11, 0x11}},
      {'d', {0x01, 0x01, 0x0D, 0x13, 0x11, 0x11, 0x0F}},
      {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
  };
  return table;
}

struct Canvas {
  struct Rgb8 {
    float r, g, b;
  };

  RasterImage img;

  explicit Canvas(int h, int w) : img(h, w, 3, ColorSpace::kRgb, PixelKind::kByte) {
    std::fill(img.data().begin(), img.data().end(), 255.0f);
  }

  void put(int y, int x, Rgb8 c) {
    if (y < 0 || y >= img.height() || x < 0 || x >= img.width()) return;
    img.at(y, x, 0) = c.r;
    img.at(y, x, 1) = c.g;
    img.at(y, x, 2) = c.b;
  }

  void line(int y0, int x0, int y1, int x1, Rgb8 c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      put(y0, x0, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void text(int y, int x, const std::string& s, Rgb8 c) {
    for (char ch : s) {
      auto it = glyphs().find(ch);
      if (it != glyphs().end()) {
        for (int row = 0; row < 7; ++row) {
          for (int col = 0; col < 5; ++col) {
            if (it->second[row] & (1 << (4 - col))) put(y + row, x + col, c);
          }
        }
      }
      x += 6;
    }
  }
};

std::string format_tick(double v) {
  char buf[32];
  if (v != 0.0 && (std::abs(v) < 0.01 || std::abs(v) >= 1000.0)) {
    std::snprintf(buf, sizeof(buf), "%.1e", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%.3f", v);
  }
  return buf;
}

}  // namespace

RasterImage render_loss_curves(const std::vector<double>& train_loss,
                               const std::vector<double>& val_loss, int width, int height) {
  if (train_loss.size() != val_loss.size()) {
    throw ContractError("render_loss_curves: series lengths differ");
  }
  Canvas canvas(height, width);
  const Canvas::Rgb8 black{0, 0, 0}, grey{210, 210, 210};
  const Canvas::Rgb8 train_color{31, 119, 180}, val_color{255, 127, 14};

  const int left = 70, right = width - 15, top = 20, bottom = height - 40;
  const int epochs = static_cast<int>(train_loss.size());

  double lo = 0.0, hi = 1e-6;
  for (double v : train_loss) hi = std::max(hi, v);
  for (double v : val_loss) hi = std::max(hi, v);
  hi *= 1.05;

  auto x_of = [&](int epoch_idx) {
    if (epochs <= 1) return (left + right) / 2;
    return left + epoch_idx * (right - left) / (epochs - 1);
  };
  auto y_of = [&](double v) {
    return bottom - static_cast<int>(std::lround((v - lo) / (hi - lo) * (bottom - top)));
  };

  // Grid + ticks.
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = lo + (hi - lo) * tick / 4.0;
    const int y = y_of(v);
    canvas.line(y, left, y, right, grey);
    canvas.text(y - 3, 8, format_tick(v), black);
  }
  const int x_ticks = std::min(epochs, 6);
  for (int tick = 0; tick < x_ticks; ++tick) {
    const int idx = epochs <= 1 ? 0 : tick * (epochs - 1) / std::max(1, x_ticks - 1);
    const int x = x_of(idx);
    canvas.line(bottom, x, bottom + 4, x, black);
    canvas.text(bottom + 8, x - 6, std::to_string(idx + 1), black);
  }
  canvas.line(top, left, bottom, left, black);
  canvas.line(bottom, left, bottom, right, black);
  canvas.text(bottom + 22, (left + right) / 2 - 15, "epoch", black);

  auto draw_series = [&](const std::vector<double>& series, Canvas::Rgb8 color) {
    for (int i = 0; i + 1 < epochs; ++i) {
      canvas.line(y_of(series[i]), x_of(i), y_of(series[i + 1]), x_of(i + 1), color);
    }
    if (epochs == 1) canvas.put(y_of(series[0]), x_of(0), color);
  };
  draw_series(train_loss, train_color);
  draw_series(val_loss, val_color);

  // Legend.
  canvas.line(top + 6, right - 120, top + 6, right - 100, train_color);
  canvas.text(top + 2, right - 94, "train loss", black);
  canvas.line(top + 20, right - 120, top + 20, right - 100, val_color);
  canvas.text(top + 16, right - 94, "val loss", black);
  return canvas.img;
}

void save_loss_plot(const std::vector<double>& train_loss, const std::vector<double>& val_loss,
                    const std::filesystem::path& path) {
  write_image(path, render_loss_curves(train_loss, val_loss));
}

}  // namespace drseg
