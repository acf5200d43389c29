#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sgd/errors.hpp"
#include "sgd/scribble.hpp"

namespace sgd {

using nlohmann::json;

ScribbleSet parse_scribble_set(std::string_view json_text, int resolution) {
  if (resolution < 1) throw InputError("scribble resolution must be positive");
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("scribble file is not valid JSON: ") + e.what());
  }
  try {
    const int file_w = doc.at("width").get<int>();
    const int file_h = doc.at("height").get<int>();
    if (file_w < 1 || file_h < 1) throw InputError("scribble file width/height must be >= 1");
    const double sx = static_cast<double>(resolution) / file_w;
    const double sy = static_cast<double>(resolution) / file_h;

    ScribbleSet set;
    set.width = resolution;
    set.height = resolution;
    for (const json& entry : doc.at("scribbles")) {
      ScribbleGeometry geometry;
      const std::string kind = entry.value("kind", std::string("polyline"));
      if (kind == "polyline") {
        geometry.kind = StrokeKind::polyline;
      } else if (kind == "bezier") {
        geometry.kind = StrokeKind::bezier;
      } else {
        throw InputError("unknown scribble kind '" + kind + "'");
      }
      geometry.thickness = entry.value("thickness", 1);
      for (const json& p : entry.at("points")) {
        if (!p.is_array() || p.size() != 2) throw InputError("scribble points must be [x, y]");
        // Scale cell centres, not cell edges, so integer inputs stay integral
        // when the file already uses the target resolution.
        geometry.points.push_back({(p[0].get<double>() + 0.5) * sx - 0.5,
                                   (p[1].get<double>() + 0.5) * sy - 0.5});
      }
      auto tokens = entry.at("tokens").get<std::vector<std::string>>();
      set.scribbles.push_back(make_scribble(std::move(geometry), std::move(tokens), resolution,
                                            resolution));
    }
    set.validate();
    return set;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed scribble file: ") + e.what());
  }
}

ScribbleSet load_scribble_set(const std::filesystem::path& path, int resolution) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open scribble file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scribble_set(text.str(), resolution);
}

}  // namespace sgd
