#pragma once

#include <optional>
#include <string>

#include "ballnet/datamodel.hpp"

namespace ballnet {

/// Decodes an image file into an RGB [0,1] frame. Optionally resizes to
/// (width, height). Throws DataError naming the path on failure.
ImageFrame load_image(const std::string& path, std::optional<int> width = std::nullopt,
                      std::optional<int> height = std::nullopt);

/// Writes an RGB [0,1] frame as PNG.
void save_image(const ImageFrame& frame, const std::string& path);

}  // namespace ballnet
