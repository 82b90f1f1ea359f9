#pragma once

#include <filesystem>
#include <vector>

#include "drseg/image.hpp"

namespace drseg {

/// Renders a train/validation loss curve chart to an RGB image: axes with
/// numeric ticks, one polyline per series, small legend. Self-contained
/// bitmap rendering, no plotting dependency.
RasterImage render_loss_curves(const std::vector<double>& train_loss,
                               const std::vector<double>& val_loss, int width = 640,
                               int height = 400);

void save_loss_plot(const std::vector<double>& train_loss, const std::vector<double>& val_loss,
                    const std::filesystem::path& path);

}  // namespace drseg
