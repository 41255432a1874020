#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "scaledrift/errors.hpp"
#include "scaledrift/evaluation.hpp"
#include "scaledrift/scene_model.hpp"
#include "scaledrift/trajectory_correction.hpp"

namespace scaledrift {

/// Input that parsed but violates the dataset invariants.
class ValidationError : public Error {
 public:
  explicit ValidationError(ValidationReport report)
      : Error("dataset validation failed:\n" + report.to_string()), report_(std::move(report)) {}
  const ValidationReport& report() const noexcept { return report_; }

 private:
  ValidationReport report_;
};

/// Everything the estimator consumes for one sequence.
struct Dataset {
  CameraIntrinsics intrinsics;
  std::vector<Pose> poses;
  std::vector<LocalMapView> views;  ///< sorted by frame
  std::vector<Detection> detections;
  PriorTable priors;
  WorldConfig world;

  /// View for `frame`, or nullptr when the frame has no associated points.
  const LocalMapView* view_for(std::int64_t frame) const;
};

/// Per-frame scale estimate as written to the kappa series file.
struct KappaSample {
  std::int64_t frame = 0;
  double kappa = 1.0;
  double variance = 0.0;
};

/// Flat `key = value` document. Keys keep file order for stable output.
class KeyValueDoc {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  const std::string* find(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Shortest decimal that parses back to the same double.
std::string format_double(double value);
/// Locale-independent strict parse of a full token.
bool parse_double(std::string_view token, double& out);

KeyValueDoc parse_key_values(std::istream& in, const std::string& name);
KeyValueDoc load_key_values(const std::filesystem::path& path);
void write_key_values(std::ostream& out, const KeyValueDoc& doc);

// KITTI pose text: 12 reals per line, row-major [R|t]. Frame index = line
// number (0-based, blank lines skipped). Rotations printed with limited
// precision are projected back onto SO(3); anything further than 1e-4 from a
// rotation is rejected.
std::vector<Pose> parse_poses(std::istream& in, const std::string& name);
std::vector<Pose> load_poses(const std::filesystem::path& path);
void write_poses(std::ostream& out, std::span<const Pose> poses);

// `frame_id point_id x y z`
std::vector<LocalMapView> parse_map_points(std::istream& in, const std::string& name);
void write_map_points(std::ostream& out, std::span<const LocalMapView> views);

// `frame_id class confidence x_min y_min x_max y_max`; lines below
// `confidence_threshold` are dropped.
std::vector<Detection> parse_detections(std::istream& in, const std::string& name, double confidence_threshold);
void write_detections(std::ostream& out, std::span<const Detection> detections);

// `frame kappa variance`
std::vector<KappaSample> parse_kappa_series(std::istream& in, const std::string& name);
void write_kappa_series(std::ostream& out, std::span<const KappaSample> series);

PriorTable priors_from_key_values(const KeyValueDoc& doc);
void priors_to_key_values(const PriorTable& priors, KeyValueDoc& doc);

/// `camera.*` and `world.*` keys.
void config_from_key_values(const KeyValueDoc& doc, CameraIntrinsics& intrinsics, WorldConfig& world);
void config_to_key_values(const CameraIntrinsics& intrinsics, const WorldConfig& world, KeyValueDoc& doc);

KeyValueDoc report_to_key_values(const ErrorReport& report);
ErrorReport report_from_key_values(const KeyValueDoc& doc);

/// File names inside a dataset directory.
struct DatasetLayout {
  std::string config = "config.txt";
  std::string poses = "poses.txt";
  std::string map_points = "map_points.txt";
  std::string detections = "detections.txt";
  std::string priors = "priors.txt";
};

/// Loads a dataset from a directory using the default layout, or from a
/// manifest file whose keys (`poses = ...` etc.) name the parts relative to
/// the manifest. `confidence_override` replaces the configured threshold
/// when non-negative. Throws ParseError or ConfigError (with the validation
/// report) on bad input.
Dataset load_dataset(const std::filesystem::path& root_or_manifest, double confidence_override = -1.0);
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir, const DatasetLayout& layout = {});

/// Writes `contents` to `path` via a temporary sibling and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

struct OutputPaths {
  std::string trajectory = "trajectory.txt";
  std::string kappa = "kappa.txt";
  std::string kappa_plot = "kappa_plot.txt";
  std::string report = "report.txt";
  std::string report_plot = "rte_by_length.txt";
};

/// Corrected trajectory, kappa series, plot-ready columns and (if given)
/// the error report.
void write_outputs(const ScaledTrajectory& trajectory, std::span<const KappaSample> kappa_series,
                   const ErrorReport* report, const std::filesystem::path& dest, const OutputPaths& paths = {});

}  // namespace scaledrift
