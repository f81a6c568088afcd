// File formats: versioned JSON for configs, frames, calibration data,
// fixes, incidence points, and reports; flat binary + JSON sidecar for
// beamspace tensors; CSV for CDFs. All writes are atomic
// (write-temp-then-rename). Field-level schemas are documented in
// docs/schemas.md.

#pragma once

#include <mmpos/calibration.hpp>
#include <mmpos/channel_estimator.hpp>
#include <mmpos/evaluation.hpp>
#include <mmpos/geometry.hpp>
#include <mmpos/mapping.hpp>
#include <mmpos/measurement.hpp>
#include <mmpos/positioning.hpp>
#include <mmpos/scenario.hpp>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmpos::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

inline void atomic_write_text(const std::filesystem::path& path,
                              const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json load_json(const std::filesystem::path& path) {
  return json::parse(read_text(path));
}

inline void check_schema(const json& j, const std::string& what) {
  if (!j.contains("schema_version") || j["schema_version"] != kSchemaVersion)
    throw std::runtime_error(what + ": unsupported schema_version");
}

inline void write_json(const std::filesystem::path& path, json j) {
  j["schema_version"] = kSchemaVersion;
  atomic_write_text(path, j.dump(2) + "\n");
}

// ---- small building blocks -------------------------------------------------

inline json vec3_to_json(const Vec3& v) { return json{v.x(), v.y(), v.z()}; }

inline Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3)
    throw std::runtime_error("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json euler_deg_to_json(const EulerAngles& a) {
  return json{rad_to_deg(a.roll), rad_to_deg(a.pitch), rad_to_deg(a.yaw)};
}

inline EulerAngles euler_from_json_deg(const json& j) {
  if (!j.is_array() || j.size() != 3)
    throw std::runtime_error("expected a 3-element array");
  return {deg_to_rad(j[0].get<double>()), deg_to_rad(j[1].get<double>()),
          deg_to_rad(j[2].get<double>())};
}

template <class Mat>
json matrix_to_json(const Mat& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

template <class Mat>
Mat matrix_from_json(const json& j) {
  Mat m;
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) m(r, c) = j.at(r).at(c).get<double>();
  return m;
}

// ---- scenario config --------------------------------------------------------

inline json bs_state_to_json(const BSState& bs) {
  return {{"position_m", vec3_to_json(bs.position)},
          {"orientation_deg", euler_deg_to_json(bs.orientation)}};
}

inline BSState bs_state_from_json(const json& j) {
  BSState bs;
  bs.position = vec3_from_json(j.at("position_m"));
  bs.orientation = euler_from_json_deg(j.at("orientation_deg"));
  return bs;
}

inline json ue_state_to_json(const UEState& ue) {
  return {{"position_m", vec3_to_json(ue.position)},
          {"orientation_deg", euler_deg_to_json(ue.orientation)},
          {"clock_bias_s", ue.clock_bias}};
}

inline UEState ue_state_from_json(const json& j) {
  UEState ue;
  ue.position = vec3_from_json(j.at("position_m"));
  ue.orientation = euler_from_json_deg(j.at("orientation_deg"));
  ue.clock_bias = j.value("clock_bias_s", 0.0);
  return ue;
}

inline json scenario_to_json(const ScenarioConfig& cfg) {
  json j;
  j["bs"] = bs_state_to_json(cfg.bs);
  j["trajectory"] = json::array();
  for (const auto& p : cfg.trajectory)
    j["trajectory"].push_back(
        {{"t_s", p.timestamp}, {"ue", ue_state_to_json(p.ue)}});
  j["surfaces"] = json::array();
  for (const auto& s : cfg.surfaces)
    j["surfaces"].push_back({{"anchor_m", vec3_to_json(s.anchor)},
                             {"normal", vec3_to_json(s.normal)},
                             {"extent_m", json{s.extent_u, s.extent_v}}});
  j["measurement_noise"] = {
      {"toa_std_s", cfg.measurement_noise.toa_std},
      {"aoa_az_std_deg", rad_to_deg(cfg.measurement_noise.aoa_az_std)},
      {"aoa_el_std_deg", rad_to_deg(cfg.measurement_noise.aoa_el_std)},
      {"aod_az_std_deg", rad_to_deg(cfg.measurement_noise.aod_az_std)},
      {"aod_el_std_deg", rad_to_deg(cfg.measurement_noise.aod_el_std)}};
  j["clock_bias"] = {{"mean_s", cfg.clock_bias.mean_s},
                     {"jitter_std_s", cfg.clock_bias.jitter_std_s}};
  j["signal"] = {{"carrier_hz", cfg.signal.carrier_hz},
                 {"subcarrier_spacing_hz", cfg.signal.subcarrier_spacing_hz},
                 {"active_subcarriers", cfg.signal.active_subcarriers},
                 {"n_ue_beams", cfg.signal.n_ue_beams},
                 {"n_bs_el_beams", cfg.signal.n_bs_el_beams},
                 {"n_bs_az_beams", cfg.signal.n_bs_az_beams},
                 {"noise_power", cfg.signal.noise_power}};
  j["codebook"] = {{"ue_az_deg", json::array()},
                   {"bs_az_deg", json::array()},
                   {"bs_el_deg", json::array()},
                   {"bs_width_az_deg", rad_to_deg(cfg.codebook.bs_width_az)},
                   {"bs_width_el_deg", rad_to_deg(cfg.codebook.bs_width_el)},
                   {"ue_width_az_deg", rad_to_deg(cfg.codebook.ue_width_az)}};
  for (double a : cfg.codebook.ue_az)
    j["codebook"]["ue_az_deg"].push_back(rad_to_deg(a));
  for (double a : cfg.codebook.bs_az)
    j["codebook"]["bs_az_deg"].push_back(rad_to_deg(a));
  for (double a : cfg.codebook.bs_el)
    j["codebook"]["bs_el_deg"].push_back(rad_to_deg(a));
  j["rng_seed"] = cfg.rng_seed;
  return j;
}

inline ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig cfg;
  cfg.bs = bs_state_from_json(j.at("bs"));
  for (const auto& p : j.at("trajectory"))
    cfg.trajectory.push_back(
        {p.at("t_s").get<double>(), ue_state_from_json(p.at("ue"))});
  for (const auto& s : j.value("surfaces", json::array())) {
    Surface surf;
    surf.anchor = vec3_from_json(s.at("anchor_m"));
    surf.normal = vec3_from_json(s.at("normal"));
    surf.extent_u = s.at("extent_m").at(0).get<double>();
    surf.extent_v = s.at("extent_m").at(1).get<double>();
    cfg.surfaces.push_back(surf);
  }
  if (j.contains("measurement_noise")) {
    const auto& n = j["measurement_noise"];
    cfg.measurement_noise.toa_std = n.value("toa_std_s", 0.0);
    cfg.measurement_noise.aoa_az_std =
        deg_to_rad(n.value("aoa_az_std_deg", 0.0));
    cfg.measurement_noise.aoa_el_std =
        deg_to_rad(n.value("aoa_el_std_deg", 0.0));
    cfg.measurement_noise.aod_az_std =
        deg_to_rad(n.value("aod_az_std_deg", 0.0));
    cfg.measurement_noise.aod_el_std =
        deg_to_rad(n.value("aod_el_std_deg", 0.0));
  }
  if (j.contains("clock_bias")) {
    cfg.clock_bias.mean_s = j["clock_bias"].value("mean_s", 0.0);
    cfg.clock_bias.jitter_std_s = j["clock_bias"].value("jitter_std_s", 0.0);
  }
  if (j.contains("signal")) {
    const auto& s = j["signal"];
    cfg.signal.carrier_hz = s.value("carrier_hz", cfg.signal.carrier_hz);
    cfg.signal.subcarrier_spacing_hz =
        s.value("subcarrier_spacing_hz", cfg.signal.subcarrier_spacing_hz);
    if (s.contains("active_subcarriers"))
      cfg.signal.active_subcarriers =
          s["active_subcarriers"].get<std::vector<int>>();
    cfg.signal.n_ue_beams = s.value("n_ue_beams", cfg.signal.n_ue_beams);
    cfg.signal.n_bs_el_beams =
        s.value("n_bs_el_beams", cfg.signal.n_bs_el_beams);
    cfg.signal.n_bs_az_beams =
        s.value("n_bs_az_beams", cfg.signal.n_bs_az_beams);
    cfg.signal.noise_power = s.value("noise_power", cfg.signal.noise_power);
  }
  if (j.contains("codebook")) {
    const auto& c = j["codebook"];
    auto grid = [](const json& arr) {
      std::vector<double> g;
      for (const auto& v : arr) g.push_back(deg_to_rad(v.get<double>()));
      return g;
    };
    if (c.contains("ue_az_deg") && !c["ue_az_deg"].empty())
      cfg.codebook.ue_az = grid(c["ue_az_deg"]);
    if (c.contains("bs_az_deg") && !c["bs_az_deg"].empty())
      cfg.codebook.bs_az = grid(c["bs_az_deg"]);
    if (c.contains("bs_el_deg") && !c["bs_el_deg"].empty())
      cfg.codebook.bs_el = grid(c["bs_el_deg"]);
    if (c.contains("bs_width_az_deg"))
      cfg.codebook.bs_width_az = deg_to_rad(c["bs_width_az_deg"].get<double>());
    if (c.contains("bs_width_el_deg"))
      cfg.codebook.bs_width_el = deg_to_rad(c["bs_width_el_deg"].get<double>());
    if (c.contains("ue_width_az_deg"))
      cfg.codebook.ue_width_az = deg_to_rad(c["ue_width_az_deg"].get<double>());
  }
  cfg.rng_seed = j.value("rng_seed", std::uint64_t(0));
  cfg.validate();
  return cfg;
}

// ---- measurement frames ------------------------------------------------------

inline json frame_to_json(const MeasurementFrame& f) {
  json j;
  j["t_s"] = f.timestamp;
  j["paths"] = json::array();
  for (const auto& p : f.paths)
    j["paths"].push_back({{"toa_s", p.z.toa},
                          {"aoa_az_rad", p.z.aoa_az},
                          {"aoa_el_rad", p.z.aoa_el},
                          {"aod_az_rad", p.z.aod_az},
                          {"aod_el_rad", p.z.aod_el},
                          {"strength", p.strength},
                          {"covariance", matrix_to_json(p.covariance)}});
  if (f.truth) {
    json t;
    t["ue"] = ue_state_to_json(f.truth->ue);
    t["paths"] = json::array();
    for (const auto& pt : f.truth->paths) {
      json p = {{"is_los", pt.is_los},
                {"surface_index", pt.surface_index},
                {"toa_s", pt.true_z.toa},
                {"aoa_az_rad", pt.true_z.aoa_az},
                {"aoa_el_rad", pt.true_z.aoa_el},
                {"aod_az_rad", pt.true_z.aod_az},
                {"aod_el_rad", pt.true_z.aod_el}};
      if (pt.ip) p["ip_m"] = vec3_to_json(*pt.ip);
      t["paths"].push_back(p);
    }
    j["truth"] = t;
  }
  return j;
}

inline MeasurementFrame frame_from_json(const json& j) {
  MeasurementFrame f;
  f.timestamp = j.at("t_s").get<double>();
  for (const auto& p : j.at("paths")) {
    PathMeasurement m;
    m.z.toa = p.at("toa_s").get<double>();
    m.z.aoa_az = p.at("aoa_az_rad").get<double>();
    m.z.aoa_el = p.at("aoa_el_rad").get<double>();
    m.z.aod_az = p.at("aod_az_rad").get<double>();
    m.z.aod_el = p.at("aod_el_rad").get<double>();
    m.strength = p.at("strength").get<double>();
    m.covariance = matrix_from_json<Mat5>(p.at("covariance"));
    f.paths.push_back(m);
  }
  if (j.contains("truth")) {
    f.truth.emplace();
    f.truth->ue = ue_state_from_json(j["truth"].at("ue"));
    for (const auto& p : j["truth"].value("paths", json::array())) {
      PathTruth pt;
      pt.is_los = p.at("is_los").get<bool>();
      pt.surface_index = p.value("surface_index", -1);
      pt.true_z.toa = p.at("toa_s").get<double>();
      pt.true_z.aoa_az = p.at("aoa_az_rad").get<double>();
      pt.true_z.aoa_el = p.at("aoa_el_rad").get<double>();
      pt.true_z.aod_az = p.at("aod_az_rad").get<double>();
      pt.true_z.aod_el = p.at("aod_el_rad").get<double>();
      if (p.contains("ip_m")) pt.ip = vec3_from_json(p["ip_m"]);
      f.truth->paths.push_back(pt);
    }
  }
  return f;
}

inline void write_frames(const std::filesystem::path& path,
                         const std::vector<MeasurementFrame>& frames) {
  json j;
  j["frames"] = json::array();
  for (const auto& f : frames) j["frames"].push_back(frame_to_json(f));
  write_json(path, j);
}

inline std::vector<MeasurementFrame> load_frames(
    const std::filesystem::path& path) {
  const json j = load_json(path);
  check_schema(j, path.string());
  std::vector<MeasurementFrame> frames;
  for (const auto& f : j.at("frames")) frames.push_back(frame_from_json(f));
  return frames;
}

// ---- beamspace tensors --------------------------------------------------------

/// Binary layout: complex128 row-major over (ue, bs_el, bs_az, subcarrier),
/// received symbols block followed by the pilot block of equal size.
inline void write_tensor(const std::filesystem::path& sidecar_path,
                         const RawBeamspace& raw) {
  std::filesystem::path bin_path = sidecar_path;
  bin_path.replace_extension(".bin");

  std::string blob(sizeof(double) * 4 * raw.symbols.size(), '\0');
  double* out = reinterpret_cast<double*>(blob.data());
  for (const cd& y : raw.symbols) {
    *out++ = y.real();
    *out++ = y.imag();
  }
  for (const cd& p : raw.pilots) {
    *out++ = p.real();
    *out++ = p.imag();
  }
  atomic_write_text(bin_path, blob);

  json j;
  j["kind"] = "beamspace_tensor";
  j["dims"] = {{"n_ue", raw.dims.n_ue},
               {"n_bs_el", raw.dims.n_bs_el},
               {"n_bs_az", raw.dims.n_bs_az},
               {"n_subc", raw.dims.n_subc}};
  j["subcarrier_spacing_hz"] = raw.subcarrier_spacing_hz;
  j["active_subcarriers"] = raw.active_subcarriers;
  j["data_file"] = bin_path.filename().string();
  j["layout"] =
      "complex128 row-major (ue, bs_el, bs_az, subcarrier); symbols then "
      "pilots";
  write_json(sidecar_path, j);
}

inline RawBeamspace load_tensor(const std::filesystem::path& sidecar_path) {
  const json j = load_json(sidecar_path);
  check_schema(j, sidecar_path.string());
  if (j.value("kind", "") != "beamspace_tensor")
    throw std::runtime_error(sidecar_path.string() +
                             ": not a beamspace tensor sidecar");
  RawBeamspace raw;
  raw.dims.n_ue = j.at("dims").at("n_ue").get<int>();
  raw.dims.n_bs_el = j.at("dims").at("n_bs_el").get<int>();
  raw.dims.n_bs_az = j.at("dims").at("n_bs_az").get<int>();
  raw.dims.n_subc = j.at("dims").at("n_subc").get<int>();
  raw.subcarrier_spacing_hz = j.at("subcarrier_spacing_hz").get<double>();
  raw.active_subcarriers = j.at("active_subcarriers").get<std::vector<int>>();

  const std::filesystem::path bin_path =
      sidecar_path.parent_path() / j.at("data_file").get<std::string>();
  const std::string blob = read_text(bin_path);
  const std::size_t n = raw.dims.size();
  if (blob.size() != sizeof(double) * 4 * n)
    throw std::runtime_error(bin_path.string() + ": size mismatch");
  const double* in = reinterpret_cast<const double*>(blob.data());
  raw.symbols.resize(n);
  raw.pilots.resize(n);
  for (std::size_t i = 0; i < n; ++i, in += 2) raw.symbols[i] = {in[0], in[1]};
  for (std::size_t i = 0; i < n; ++i, in += 2) raw.pilots[i] = {in[0], in[1]};
  return raw;
}

// ---- calibration ----------------------------------------------------------------

inline void write_calibration_samples(
    const std::filesystem::path& path,
    const std::vector<CalibrationSample>& samples) {
  json j;
  j["samples"] = json::array();
  for (const auto& s : samples) {
    j["samples"].push_back(
        {{"ue", ue_state_to_json(s.ue)},
         {"position_std_m", vec3_to_json(s.position_std)},
         {"orientation_std_deg",
          json{rad_to_deg(s.orientation_std[0]),
               rad_to_deg(s.orientation_std[1]),
               rad_to_deg(s.orientation_std[2])}},
         {"los_angles_rad",
          json{s.los_angles[0], s.los_angles[1], s.los_angles[2],
               s.los_angles[3]}},
         {"covariance", matrix_to_json(s.covariance)}});
  }
  write_json(path, j);
}

inline std::vector<CalibrationSample> load_calibration_samples(
    const std::filesystem::path& path) {
  const json j = load_json(path);
  check_schema(j, path.string());
  std::vector<CalibrationSample> samples;
  for (const auto& sj : j.at("samples")) {
    CalibrationSample s;
    s.ue = ue_state_from_json(sj.at("ue"));
    if (sj.contains("position_std_m"))
      s.position_std = vec3_from_json(sj["position_std_m"]);
    if (sj.contains("orientation_std_deg")) {
      const auto& o = sj["orientation_std_deg"];
      s.orientation_std = {deg_to_rad(o.at(0).get<double>()),
                           deg_to_rad(o.at(1).get<double>()),
                           deg_to_rad(o.at(2).get<double>())};
    }
    const auto& a = sj.at("los_angles_rad");
    s.los_angles << a.at(0).get<double>(), a.at(1).get<double>(),
        a.at(2).get<double>(), a.at(3).get<double>();
    s.covariance = matrix_from_json<Mat4>(sj.at("covariance"));
    samples.push_back(s);
  }
  return samples;
}

inline void write_calibration_result(const std::filesystem::path& path,
                                     const CalibrationResult& r) {
  write_json(path, json{{"bs", bs_state_to_json(r.bs_estimate)},
                        {"final_cost", r.final_cost},
                        {"iterations", r.iterations},
                        {"converged", r.converged}});
}

inline CalibrationResult load_calibration_result(
    const std::filesystem::path& path) {
  const json j = load_json(path);
  check_schema(j, path.string());
  CalibrationResult r;
  r.bs_estimate = bs_state_from_json(j.at("bs"));
  r.final_cost = j.value("final_cost", 0.0);
  r.iterations = j.value("iterations", 0);
  r.converged = j.value("converged", false);
  return r;
}

// ---- position fixes and incidence points ------------------------------------------

struct TimedFix {
  double timestamp = 0.0;
  PositionFix fix;
};

inline void write_fixes(const std::filesystem::path& path,
                        const std::vector<TimedFix>& fixes) {
  json j;
  j["fixes"] = json::array();
  for (const auto& tf : fixes) {
    json f = {{"t_s", tf.timestamp},
              {"mode", to_string(tf.fix.mode)},
              {"position_m", vec3_to_json(tf.fix.position)},
              {"residual_cost", tf.fix.residual_cost},
              {"n_paths_used", tf.fix.n_paths_used},
              {"converged", tf.fix.converged}};
    if (tf.fix.clock_bias) f["clock_bias_s"] = *tf.fix.clock_bias;
    j["fixes"].push_back(f);
  }
  write_json(path, j);
}

inline std::vector<TimedFix> load_fixes(const std::filesystem::path& path) {
  const json j = load_json(path);
  check_schema(j, path.string());
  std::vector<TimedFix> fixes;
  for (const auto& f : j.at("fixes")) {
    TimedFix tf;
    tf.timestamp = f.at("t_s").get<double>();
    tf.fix.mode = positioning_mode_from_string(f.at("mode").get<std::string>());
    tf.fix.position = vec3_from_json(f.at("position_m"));
    tf.fix.residual_cost = f.value("residual_cost", 0.0);
    tf.fix.n_paths_used = f.value("n_paths_used", 0);
    tf.fix.converged = f.value("converged", true);
    if (f.contains("clock_bias_s"))
      tf.fix.clock_bias = f["clock_bias_s"].get<double>();
    fixes.push_back(tf);
  }
  return fixes;
}

inline void write_ip_estimates(const std::filesystem::path& path,
                               const std::vector<IPEstimate>& ips) {
  json j;
  j["incidence_points"] = json::array();
  for (const auto& ip : ips)
    j["incidence_points"].push_back(
        {{"position_m", vec3_to_json(ip.position)},
         {"residual_cost", ip.residual_cost},
         {"frame_index", ip.frame_index},
         {"path_index", ip.path_index},
         {"converged", ip.converged},
         {"n_sigma_converged", ip.n_sigma_converged}});
  write_json(path, j);
}

inline std::vector<IPEstimate> load_ip_estimates(
    const std::filesystem::path& path) {
  const json j = load_json(path);
  check_schema(j, path.string());
  std::vector<IPEstimate> ips;
  for (const auto& e : j.at("incidence_points")) {
    IPEstimate ip;
    ip.position = vec3_from_json(e.at("position_m"));
    ip.residual_cost = e.value("residual_cost", 0.0);
    ip.frame_index = e.value("frame_index", -1);
    ip.path_index = e.value("path_index", -1);
    ip.converged = e.value("converged", true);
    ip.n_sigma_converged = e.value("n_sigma_converged", 0);
    ips.push_back(ip);
  }
  return ips;
}

// ---- reports ------------------------------------------------------------------------

inline void write_report(const std::filesystem::path& path,
                         const ErrorReport& r) {
  write_json(path,
             json{{"n", r.errors_xy.size()},
                  {"mae_m", r.mae},
                  {"p50_m", r.quantile(0.50)},
                  {"p90_m", r.quantile(0.90)},
                  {"p95_m", r.quantile(0.95)},
                  {"fraction_below_5m", r.fraction_below(5.0)},
                  {"fraction_below_10m", r.fraction_below(10.0)}});
}

/// Two-column CSV (error_m, fraction), one row per sample.
inline void write_cdf_csv(const std::filesystem::path& path,
                          const ErrorReport& r) {
  std::ostringstream ss;
  ss << "error_m,fraction\n";
  ss.precision(17);
  for (const auto& [e, f] : r.cdf) ss << e << "," << f << "\n";
  atomic_write_text(path, ss.str());
}

}  // namespace mmpos::io
