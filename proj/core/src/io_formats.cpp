#include "scaledrift/io_formats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/SVD>

namespace scaledrift {

namespace fs = std::filesystem;

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool skip_line(std::string_view line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

double field(std::string_view token, const std::string& name, std::size_t line) {
  double v = 0.0;
  if (!parse_double(token, v)) throw ParseError(name, line, "not a finite number: '" + std::string(token) + "'");
  return v;
}

std::int64_t integer_field(std::string_view token, const std::string& name, std::size_t line) {
  std::int64_t v = 0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError(name, line, "not an integer: '" + std::string(token) + "'");
  return v;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

std::string join_doubles(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ' ';
    out += format_double(values[i]);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& value, const std::string& key) {
  std::vector<double> out;
  for (auto tok : split_ws(value)) {
    double v = 0.0;
    if (!parse_double(tok, v)) throw ConfigError("key '" + key + "': not a number list");
    out.push_back(v);
  }
  return out;
}

}  // namespace

const LocalMapView* Dataset::view_for(std::int64_t frame) const {
  auto it = std::lower_bound(views.begin(), views.end(), frame,
                             [](const LocalMapView& v, std::int64_t f) { return v.frame_index < f; });
  return (it != views.end() && it->frame_index == frame) ? &*it : nullptr;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw IoError("format_double failed");
  return std::string(buf, ptr);
}

bool parse_double(std::string_view token, double& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  if (token.empty()) return false;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out, std::chars_format::general);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

void KeyValueDoc::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void KeyValueDoc::set(const std::string& key, double value) { set(key, format_double(value)); }

const std::string* KeyValueDoc::find(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return &v;
  return nullptr;
}

double KeyValueDoc::get_double(const std::string& key, double fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  double out = 0.0;
  if (!parse_double(trim(*v), out)) throw ConfigError("key '" + key + "': not a number: '" + *v + "'");
  return out;
}

KeyValueDoc parse_key_values(std::istream& in, const std::string& name) {
  KeyValueDoc doc;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (skip_line(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(name, n, "expected 'key = value'");
    const auto key = trim(std::string_view(line).substr(0, eq));
    const auto value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ParseError(name, n, "empty key");
    doc.set(std::string(key), std::string(value));
  }
  return doc;
}

KeyValueDoc load_key_values(const fs::path& path) {
  auto in = open_input(path);
  return parse_key_values(in, path.string());
}

void write_key_values(std::ostream& out, const KeyValueDoc& doc) {
  for (const auto& [k, v] : doc.entries()) out << k << " = " << v << '\n';
}

std::vector<Pose> parse_poses(std::istream& in, const std::string& name) {
  std::vector<Pose> poses;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (skip_line(line)) continue;
    const auto tok = split_ws(line);
    if (tok.size() != 12) throw ParseError(name, n, "expected 12 values, got " + std::to_string(tok.size()));
    Pose p;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) p.rotation(r, c) = field(tok[static_cast<std::size_t>(4 * r + c)], name, n);
      p.translation(r) = field(tok[static_cast<std::size_t>(4 * r + 3)], name, n);
    }
    if (!is_rotation(p.rotation)) {
      if (!is_rotation(p.rotation, 1e-4)) throw ParseError(name, n, "rotation not orthonormal");
      p.rotation = nearest_rotation(p.rotation);
    }
    p.frame_index = static_cast<std::int64_t>(poses.size());
    poses.push_back(p);
  }
  return poses;
}

std::vector<Pose> load_poses(const fs::path& path) {
  auto in = open_input(path);
  return parse_poses(in, path.string());
}

void write_poses(std::ostream& out, std::span<const Pose> poses) {
  for (const auto& p : poses) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out << format_double(p.rotation(r, c)) << ' ';
      out << format_double(p.translation(r)) << (r == 2 ? '\n' : ' ');
    }
  }
}

std::vector<LocalMapView> parse_map_points(std::istream& in, const std::string& name) {
  std::map<std::int64_t, LocalMapView> by_frame;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (skip_line(line)) continue;
    const auto tok = split_ws(line);
    if (tok.size() != 5) throw ParseError(name, n, "expected 'frame_id point_id x y z'");
    const auto frame = integer_field(tok[0], name, n);
    MapPoint pt{integer_field(tok[1], name, n), Vec3{field(tok[2], name, n), field(tok[3], name, n), field(tok[4], name, n)}};
    auto& view = by_frame[frame];
    view.frame_index = frame;
    view.points.push_back(pt);
  }
  std::vector<LocalMapView> views;
  views.reserve(by_frame.size());
  for (auto& [frame, view] : by_frame) views.push_back(std::move(view));
  return views;
}

void write_map_points(std::ostream& out, std::span<const LocalMapView> views) {
  for (const auto& view : views) {
    for (const auto& pt : view.points) {
      out << view.frame_index << ' ' << pt.id << ' ' << format_double(pt.position_world.x()) << ' '
          << format_double(pt.position_world.y()) << ' ' << format_double(pt.position_world.z()) << '\n';
    }
  }
}

std::vector<Detection> parse_detections(std::istream& in, const std::string& name, double confidence_threshold) {
  std::vector<Detection> dets;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (skip_line(line)) continue;
    const auto tok = split_ws(line);
    if (tok.size() != 7) throw ParseError(name, n, "expected 'frame_id class confidence x_min y_min x_max y_max'");
    Detection d;
    d.frame_index = integer_field(tok[0], name, n);
    d.class_label = std::string(tok[1]);
    d.confidence = field(tok[2], name, n);
    d.rect = {field(tok[3], name, n), field(tok[4], name, n), field(tok[5], name, n), field(tok[6], name, n)};
    if (d.confidence < confidence_threshold) continue;
    dets.push_back(std::move(d));
  }
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.frame_index < b.frame_index; });
  return dets;
}

void write_detections(std::ostream& out, std::span<const Detection> detections) {
  for (const auto& d : detections) {
    out << d.frame_index << ' ' << d.class_label << ' ' << format_double(d.confidence) << ' '
        << format_double(d.rect.x_min) << ' ' << format_double(d.rect.y_min) << ' ' << format_double(d.rect.x_max)
        << ' ' << format_double(d.rect.y_max) << '\n';
  }
}

std::vector<KappaSample> parse_kappa_series(std::istream& in, const std::string& name) {
  std::vector<KappaSample> series;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (skip_line(line)) continue;
    const auto tok = split_ws(line);
    if (tok.size() != 3) throw ParseError(name, n, "expected 'frame kappa variance'");
    series.push_back({integer_field(tok[0], name, n), field(tok[1], name, n), field(tok[2], name, n)});
  }
  return series;
}

void write_kappa_series(std::ostream& out, std::span<const KappaSample> series) {
  for (const auto& s : series)
    out << s.frame << ' ' << format_double(s.kappa) << ' ' << format_double(s.variance) << '\n';
}

PriorTable priors_from_key_values(const KeyValueDoc& doc) {
  PriorTable priors;
  constexpr std::string_view kTag = ".height.";
  for (const auto& [key, value] : doc.entries()) {
    const auto pos = key.find(kTag);
    if (pos == std::string::npos || pos == 0) continue;
    const std::string label = key.substr(0, pos);
    const std::string field_name = key.substr(pos + kTag.size());
    auto& prior = priors[label];
    prior.class_label = label;
    if (field_name == "mean" || field_name == "std") {
      auto* g = std::get_if<GaussianHeight>(&prior.distribution);
      if (!g) throw ConfigError("prior '" + label + "' mixes Gaussian and histogram keys");
      (field_name == "mean" ? g->mean : g->stddev) = doc.get_double(key, 0.0);
    } else if (field_name == "edges" || field_name == "weights") {
      if (std::holds_alternative<GaussianHeight>(prior.distribution)) {
        if (doc.find(label + ".height.mean") || doc.find(label + ".height.std"))
          throw ConfigError("prior '" + label + "' mixes Gaussian and histogram keys");
        prior.distribution = HistogramHeight{};
      }
      auto& h = std::get<HistogramHeight>(prior.distribution);
      (field_name == "edges" ? h.edges : h.weights) = parse_double_list(value, key);
    } else {
      throw ConfigError("unknown prior key '" + key + "'");
    }
  }
  return priors;
}

void priors_to_key_values(const PriorTable& priors, KeyValueDoc& doc) {
  for (const auto& [label, prior] : priors) {
    if (const auto* g = std::get_if<GaussianHeight>(&prior.distribution)) {
      doc.set(label + ".height.mean", g->mean);
      doc.set(label + ".height.std", g->stddev);
    } else {
      const auto& h = std::get<HistogramHeight>(prior.distribution);
      doc.set(label + ".height.edges", join_doubles(h.edges));
      doc.set(label + ".height.weights", join_doubles(h.weights));
    }
  }
}

void config_from_key_values(const KeyValueDoc& doc, CameraIntrinsics& k, WorldConfig& w) {
  k.fx = doc.get_double("camera.fx", k.fx);
  k.fy = doc.get_double("camera.fy", k.fy);
  k.cx = doc.get_double("camera.cx", k.cx);
  k.cy = doc.get_double("camera.cy", k.cy);
  k.width = static_cast<int>(doc.get_double("camera.width", k.width));
  k.height = static_cast<int>(doc.get_double("camera.height", k.height));
  if (const auto* up = doc.find("world.up")) {
    const auto v = parse_double_list(*up, "world.up");
    if (v.size() != 3) throw ConfigError("world.up needs three components");
    w.up_world = Vec3{v[0], v[1], v[2]};
  }
  w.min_points_per_detection =
      static_cast<int>(doc.get_double("world.min_points_per_detection", w.min_points_per_detection));
  w.gamma_alpha = doc.get_double("world.gamma_alpha", w.gamma_alpha);
  w.gamma_beta = doc.get_double("world.gamma_beta", w.gamma_beta);
  w.confidence_threshold = doc.get_double("world.confidence_threshold", w.confidence_threshold);
  w.sigma_m_floor = doc.get_double("world.sigma_m_floor", w.sigma_m_floor);
  w.min_height = doc.get_double("world.min_height", w.min_height);
}

void config_to_key_values(const CameraIntrinsics& k, const WorldConfig& w, KeyValueDoc& doc) {
  doc.set("camera.fx", k.fx);
  doc.set("camera.fy", k.fy);
  doc.set("camera.cx", k.cx);
  doc.set("camera.cy", k.cy);
  doc.set("camera.width", static_cast<double>(k.width));
  doc.set("camera.height", static_cast<double>(k.height));
  const double up[3] = {w.up_world.x(), w.up_world.y(), w.up_world.z()};
  doc.set("world.up", join_doubles(up));
  doc.set("world.min_points_per_detection", static_cast<double>(w.min_points_per_detection));
  doc.set("world.gamma_alpha", w.gamma_alpha);
  doc.set("world.gamma_beta", w.gamma_beta);
  doc.set("world.confidence_threshold", w.confidence_threshold);
  doc.set("world.sigma_m_floor", w.sigma_m_floor);
  doc.set("world.min_height", w.min_height);
}

KeyValueDoc report_to_key_values(const ErrorReport& report) {
  KeyValueDoc doc;
  for (const auto& [length, err] : report.per_length) doc.set("rte." + format_double(length), err);
  doc.set("rte.overall", report.overall);
  for (const auto& [length, count] : report.counts) doc.set("count." + format_double(length), static_cast<double>(count));
  doc.set("n_subsequences", static_cast<double>(report.n_subsequences));
  return doc;
}

ErrorReport report_from_key_values(const KeyValueDoc& doc) {
  ErrorReport report;
  for (const auto& [key, value] : doc.entries()) {
    double length = 0.0;
    if (key.starts_with("rte.") && key != "rte.overall") {
      if (!parse_double(std::string_view(key).substr(4), length)) throw ConfigError("bad report key '" + key + "'");
      report.per_length[length] = doc.get_double(key, 0.0);
    } else if (key.starts_with("count.")) {
      if (!parse_double(std::string_view(key).substr(6), length)) throw ConfigError("bad report key '" + key + "'");
      report.counts[length] = static_cast<int>(doc.get_double(key, 0.0));
    }
  }
  report.overall = doc.get_double("rte.overall", 0.0);
  report.n_subsequences = static_cast<int>(doc.get_double("n_subsequences", 0.0));
  return report;
}

Dataset load_dataset(const fs::path& root_or_manifest, double confidence_override) {
  fs::path base;
  DatasetLayout layout;
  if (fs::is_directory(root_or_manifest)) {
    base = root_or_manifest;
  } else if (fs::is_regular_file(root_or_manifest)) {
    base = root_or_manifest.parent_path();
    const auto manifest = load_key_values(root_or_manifest);
    auto pick = [&manifest](const char* key, std::string& slot) {
      if (const auto* v = manifest.find(key)) slot = *v;
    };
    pick("config", layout.config);
    pick("poses", layout.poses);
    pick("map_points", layout.map_points);
    pick("detections", layout.detections);
    pick("priors", layout.priors);
  } else {
    throw IoError("dataset not found: " + root_or_manifest.string());
  }

  Dataset d;
  KeyValueDoc config;
  if (fs::exists(base / layout.config)) config = load_key_values(base / layout.config);
  config_from_key_values(config, d.intrinsics, d.world);
  if (confidence_override >= 0.0) d.world.confidence_threshold = confidence_override;

  d.poses = load_poses(base / layout.poses);
  {
    auto in = open_input(base / layout.map_points);
    d.views = parse_map_points(in, (base / layout.map_points).string());
  }
  {
    auto in = open_input(base / layout.detections);
    d.detections = parse_detections(in, (base / layout.detections).string(), d.world.confidence_threshold);
  }
  d.priors = priors_from_key_values(config);
  if (fs::exists(base / layout.priors)) {
    for (auto& [label, prior] : priors_from_key_values(load_key_values(base / layout.priors)))
      d.priors[label] = std::move(prior);
  }

  ValidationReport report = validate_dataset(d.poses, d.views, d.detections, d.intrinsics);
  auto rp = validate_priors(d.priors);
  report.issues.insert(report.issues.end(), rp.issues.begin(), rp.issues.end());
  auto rc = validate_config(d.world);
  report.issues.insert(report.issues.end(), rc.issues.begin(), rc.issues.end());
  if (!report.ok()) throw ValidationError(std::move(report));
  return d;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

namespace {

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

}  // namespace

void write_dataset(const Dataset& d, const fs::path& dir, const DatasetLayout& layout) {
  fs::create_directories(dir);
  KeyValueDoc config;
  config_to_key_values(d.intrinsics, d.world, config);
  KeyValueDoc priors;
  priors_to_key_values(d.priors, priors);
  write_file_atomic(dir / layout.config, render([&](std::ostream& os) { write_key_values(os, config); }));
  write_file_atomic(dir / layout.priors, render([&](std::ostream& os) { write_key_values(os, priors); }));
  write_file_atomic(dir / layout.poses, render([&](std::ostream& os) { write_poses(os, d.poses); }));
  write_file_atomic(dir / layout.map_points, render([&](std::ostream& os) { write_map_points(os, d.views); }));
  write_file_atomic(dir / layout.detections, render([&](std::ostream& os) { write_detections(os, d.detections); }));
}

void write_outputs(const ScaledTrajectory& trajectory, std::span<const KappaSample> kappa_series,
                   const ErrorReport* report, const fs::path& dest, const OutputPaths& paths) {
  std::error_code ec;
  fs::create_directories(dest, ec);
  if (ec) throw IoError("cannot create " + dest.string() + ": " + ec.message());

  // Render everything first so a formatting failure leaves no files behind.
  const std::string traj = render([&](std::ostream& os) { write_poses(os, trajectory.poses); });
  const std::string kappa = render([&](std::ostream& os) { write_kappa_series(os, kappa_series); });
  const std::string kappa_plot = render([&](std::ostream& os) {
    for (const auto& s : kappa_series) os << s.frame << ' ' << format_double(s.kappa) << '\n';
  });
  write_file_atomic(dest / paths.trajectory, traj);
  write_file_atomic(dest / paths.kappa, kappa);
  write_file_atomic(dest / paths.kappa_plot, kappa_plot);
  if (report) {
    write_file_atomic(dest / paths.report,
                      render([&](std::ostream& os) { write_key_values(os, report_to_key_values(*report)); }));
    write_file_atomic(dest / paths.report_plot, render([&](std::ostream& os) {
                        for (const auto& [length, err] : report->per_length)
                          os << format_double(length) << ' ' << format_double(err) << '\n';
                      }));
  }
}

}  // namespace scaledrift
