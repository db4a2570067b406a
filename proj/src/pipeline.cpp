#include "rbc/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "rbc/dataset.hpp"
#include "rbc/error.hpp"
#include "rbc/geometry.hpp"
#include "rbc/image.hpp"
#include "rbc/parallel.hpp"

namespace fs = std::filesystem;

namespace rbc {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::function<bool(const fs::path&)>& keep) {
  if (!fs::is_directory(dir)) throw_io("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && keep(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });
  return out;
}

}  // namespace

bool is_image_file(const fs::path& p) {
  const auto ext = lower(p.extension().string());
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".tif" || ext == ".tiff";
}

std::string cell_id(const std::string& stem, std::size_t k) { return stem + "_cell" + std::to_string(k); }

Json sidecar_json(const std::string& image_name, const std::string& stem, const SegmentResult& r) {
  Json cells = Json::array();
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const auto& c = r.cells[i];
    Json pts = Json::array();
    for (const auto& p : c.points) pts.push_back({p.x, p.y});
    const auto id = cell_id(stem, i + 1);
    cells.push_back({{"id", id},
                     {"crop", id + ".png"},
                     {"bbox", {c.bbox.x, c.bbox.y, c.bbox.width, c.bbox.height}},
                     {"area", c.area()},
                     {"is_split_from_cluster", c.is_split_from_cluster},
                     {"touches_border", c.touches_border},
                     {"points", pts}});
  }
  return Json{{"image", image_name}, {"threshold", r.threshold}, {"cells", cells}, {"diagnostics", r.diagnostics}};
}

std::string SegmentSummary::line() const {
  std::ostringstream os;
  os << "segmented " << images << " image(s): " << cells << " cell(s), " << failures << " failure(s)";
  return os.str();
}

SegmentSummary segment_directory(const fs::path& in_dir, const fs::path& out_dir, const SegmentParams& params,
                                 const LogFn& log) {
  const auto files = sorted_files(in_dir, is_image_file);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw_io("cannot create " + out_dir.string() + ": " + ec.message());

  struct Outcome {
    std::size_t cells = 0;
    std::string error;
  };
  std::vector<Outcome> outcomes(files.size());
  parallel_for(files.size(), [&](std::size_t i) {
    const auto& file = files[i];
    const auto stem = file.stem().string();
    try {
      const auto img = read_image(file);
      const auto res = segment_image(img, params);
      for (std::size_t k = 0; k < res.cells.size(); ++k)
        write_png(out_dir / (cell_id(stem, k + 1) + ".png"), res.cells[k].roi);
      write_json_file(out_dir / (stem + ".json"), sidecar_json(file.filename().string(), stem, res));
      outcomes[i].cells = res.cells.size();
    } catch (const std::exception& e) {
      outcomes[i].error = e.what();
    }
  });

  SegmentSummary s;
  s.images = files.size();
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (outcomes[i].error.empty()) {
      s.cells += outcomes[i].cells;
      if (log) log(files[i].filename().string() + ": " + std::to_string(outcomes[i].cells) + " cell(s)");
    } else {
      ++s.failures;
      s.errors.push_back(files[i].filename().string() + ": " + outcomes[i].error);
      if (log) log("error: " + s.errors.back());
    }
  }
  return s;
}

std::vector<std::pair<std::string, CellContour>> load_sidecar(const fs::path& sidecar) {
  const Json j = read_json_file(sidecar);
  std::vector<std::pair<std::string, CellContour>> out;
  try {
    for (const auto& c : j.at("cells")) {
      CellContour cell;
      const auto& b = c.at("bbox");
      cell.bbox = Rect{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
      for (const auto& p : c.at("points")) cell.points.push_back(Point{p.at(0).get<int>(), p.at(1).get<int>()});
      if (cell.points.empty() || cell.bbox.width <= 0 || cell.bbox.height <= 0)
        throw_data("empty cell in " + sidecar.string());
      cell.is_split_from_cluster = c.value("is_split_from_cluster", false);
      cell.touches_border = c.value("touches_border", false);
      cell.mask = fill_polygon(cell.points, cell.bbox);
      cell.roi = read_image(sidecar.parent_path() / c.at("crop").get<std::string>());
      if (cell.roi.width() != cell.bbox.width || cell.roi.height() != cell.bbox.height)
        throw_data("crop size does not match bbox for " + c.at("id").get<std::string>());
      out.emplace_back(c.at("id").get<std::string>(), std::move(cell));
    }
  } catch (const nlohmann::json::exception& e) {
    throw_data("malformed sidecar " + sidecar.string() + ": " + e.what());
  }
  return out;
}

std::map<std::string, std::string> read_labels(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot read " + path.string());
  std::map<std::string, std::string> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (line_no == 1 && !f.empty() && f[0] == "cell_id") continue;
    if (f.size() != 2) throw_data(path.string() + ":" + std::to_string(line_no) + ": expected cell_id,label");
    if (f[1] != "c" && f[1] != "e" && f[1] != "o")
      throw_data(path.string() + ":" + std::to_string(line_no) + ": label must be c, e or o");
    if (!labels.emplace(f[0], f[1]).second)
      throw_data(path.string() + ":" + std::to_string(line_no) + ": duplicate cell id " + f[0]);
  }
  return labels;
}

std::string ExtractSummary::line() const {
  std::ostringstream os;
  os << "extracted " << rows << " row(s) from " << cells << " cell(s); " << skipped << " unlabelled, " << failures
     << " failure(s)";
  return os.str();
}

ExtractSummary extract_directory(const fs::path& seg_dir, const fs::path& labels_path, const fs::path& out_csv,
                                 const FeatureOptions& opt, const LogFn& log) {
  const auto labels = read_labels(labels_path);
  const auto sidecars = sorted_files(seg_dir, [](const fs::path& p) { return lower(p.extension().string()) == ".json"; });

  struct Item {
    std::string image;
    std::string id;
    CellContour cell;
  };
  std::vector<Item> items;
  ExtractSummary s;
  for (const auto& sc : sidecars) {
    const auto image = read_json_file(sc).value("image", sc.stem().string());
    for (auto& [id, cell] : load_sidecar(sc)) {
      ++s.cells;
      if (!labels.contains(id)) {
        ++s.skipped;
        s.warnings.push_back("unlabelled cell " + id + " skipped");
        continue;
      }
      items.push_back(Item{image, id, std::move(cell)});
    }
  }

  std::vector<FeatureRow> rows(items.size());
  std::vector<std::string> errors(items.size());
  parallel_for(items.size(), [&](std::size_t i) {
    try {
      rows[i] = FeatureRow{items[i].image, items[i].id, labels.at(items[i].id), extract_all(items[i].cell, opt)};
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::vector<FeatureRow> kept;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (errors[i].empty()) {
      kept.push_back(std::move(rows[i]));
    } else {
      ++s.failures;
      s.warnings.push_back("cell " + items[i].id + ": " + errors[i]);
    }
  }
  s.rows = kept.size();
  if (log)
    for (const auto& w : s.warnings) log("warning: " + w);
  write_feature_csv(out_csv, kept);
  return s;
}

}  // namespace rbc
