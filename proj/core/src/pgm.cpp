#include "sgd/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sgd/errors.hpp"

namespace sgd {

std::string encode_pgm(const Grid2D& image) {
  if (image.empty()) throw InputError("encode_pgm: empty image");
  std::string out = "P5\n" + std::to_string(image.width()) + " " +
                    std::to_string(image.height()) + "\n255\n";
  out.reserve(out.size() + image.size());
  for (double v : image.values()) {
    // NaN clamps to 0 through the comparison below.
    const double c = v > 0.0 ? std::min(v, 1.0) : 0.0;
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::floor(c * 255.0 + 0.5))));
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const Grid2D& image) {
  const std::string bytes = encode_pgm(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace sgd
