#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "sgd/errors.hpp"
#include "sgd/metrics.hpp"
#include "sgd_cli/commands.hpp"

namespace sgd::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::vector<EvalReport> load_reports(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "metrics.json") {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) throw InputError("no metrics.json files under " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<EvalReport> reports;
  for (const fs::path& file : files) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    try {
      reports.push_back(eval_report_from_json(text.str()));
    } catch (const InputError& e) {
      throw InputError(file.string() + ": " + e.what());
    }
  }
  return reports;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

ordered_json stat(const std::vector<EvalReport>& reports, double EvalReport::*field) {
  std::vector<double> v;
  double sum = 0.0;
  for (const EvalReport& r : reports) {
    v.push_back(r.*field);
    sum += r.*field;
  }
  ordered_json j;
  j["mean"] = sum / static_cast<double>(v.size());
  j["median"] = median(v);
  return j;
}

const std::pair<const char*, double EvalReport::*> kFields[] = {
    {"scribble_ratio", &EvalReport::scribble_ratio},
    {"scribble_ratio_mean", &EvalReport::scribble_ratio_mean},
    {"miou", &EvalReport::miou},
    {"orientation_error_deg", &EvalReport::orientation_error_deg},
};

ordered_json aggregate(const std::vector<EvalReport>& reports) {
  ordered_json j;
  j["count"] = reports.size();
  for (const auto& [name, field] : kFields) j[name] = stat(reports, field);
  return j;
}

}  // namespace

int run_evaluate(const std::vector<fs::path>& dirs, std::ostream& out) {
  if (dirs.empty() || dirs.size() > 2) throw InputError("evaluate takes one or two directories");
  std::vector<ordered_json> sets;
  for (const fs::path& d : dirs) sets.push_back(aggregate(load_reports(d)));
  if (sets.size() == 1) {
    out << sets[0].dump(2) << "\n";
    return kOk;
  }
  ordered_json doc;
  doc["a"] = sets[0];
  doc["a"]["dir"] = dirs[0].string();
  doc["b"] = sets[1];
  doc["b"]["dir"] = dirs[1].string();
  ordered_json delta;
  for (const auto& [name, field] : kFields) {
    delta[name] = sets[1][name]["mean"].get<double>() - sets[0][name]["mean"].get<double>();
  }
  doc["delta_mean_b_minus_a"] = std::move(delta);
  out << doc.dump(2) << "\n";
  return kOk;
}

}  // namespace sgd::cli
