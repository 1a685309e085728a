#pragma once

#include <string>

#include "ptdet/grid.hpp"

namespace ptdet {

/// Reads a binary NetPBM image (P5 or P6, maxval <= 65535) into a grid with
/// values scaled to [0, 1]. P5 yields one channel, P6 three.
Grid read_pnm(const std::string& path);

/// Writes an H x W x 3 grid as 8-bit P6. Values are clamped to [0, 1].
void write_ppm(const std::string& path, const Grid& rgb);

/// Writes a single-channel grid as P5 with the given maxval (255 or 65535).
/// Stored value = round(maxval * clamp(v, 0, 1)).
void write_pgm(const std::string& path, const Grid& gray, int maxval = 65535);

}  // namespace ptdet
