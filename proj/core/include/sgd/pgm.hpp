#pragma once

#include <filesystem>
#include <string>

#include "sgd/grid.hpp"

namespace sgd {

/// Binary 8-bit PGM (P5). Values are clamped to [0, 1] and mapped with
/// round-half-up: floor(v * 255 + 0.5).
std::string encode_pgm(const Grid2D& image);
void write_pgm(const std::filesystem::path& path, const Grid2D& image);

}  // namespace sgd
