#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rbc/features.hpp"
#include "rbc/imaging.hpp"
#include "rbc/json.hpp"

namespace rbc {

using LogFn = std::function<void(const std::string&)>;

/// Image files the segmenter picks up, by extension (case-insensitive).
bool is_image_file(const std::filesystem::path& p);

/// Cell id used for crops, sidecars and label files: "<stem>_cell<k>", k from 1.
std::string cell_id(const std::string& stem, std::size_t k);

/// Per-image record written next to the crops as "<stem>.json".
Json sidecar_json(const std::string& image_name, const std::string& stem, const SegmentResult& r);

struct SegmentSummary {
  std::size_t images = 0;
  std::size_t cells = 0;
  std::size_t failures = 0;
  std::vector<std::string> errors;  // "file: message", in file order

  std::string line() const;
};

/// Segments every image in `in_dir` (sorted by name, one worker per image)
/// and writes "<stem>_cell<k>.png" crops plus a "<stem>.json" sidecar into
/// `out_dir`. A failing image is logged and counted; the run continues.
SegmentSummary segment_directory(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir,
                                 const SegmentParams& params, const LogFn& log = {});

/// Rebuilds the cells listed in a sidecar: boundary points from the JSON,
/// the mask by filling the boundary polygon inside the bounding box, and the
/// ROI from the crop file beside the sidecar.
std::vector<std::pair<std::string, CellContour>> load_sidecar(const std::filesystem::path& sidecar);

/// Two-column CSV "cell_id,label" (header optional). Labels must be c, e or o.
std::map<std::string, std::string> read_labels(const std::filesystem::path& path);

struct ExtractSummary {
  std::size_t cells = 0;
  std::size_t rows = 0;
  std::size_t skipped = 0;
  std::size_t failures = 0;
  std::vector<std::string> warnings;

  std::string line() const;
};

/// Reads every sidecar in `seg_dir` and writes one feature row per labelled
/// cell to `out_csv`. Unlabelled cells are skipped with a warning.
ExtractSummary extract_directory(const std::filesystem::path& seg_dir, const std::filesystem::path& labels,
                                 const std::filesystem::path& out_csv, const FeatureOptions& opt = {},
                                 const LogFn& log = {});

}  // namespace rbc
