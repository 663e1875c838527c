#pragma once

// Text formats used by the emi command line tool.
//
//   device JSON   {"spacings": [...], "heights": [...], "frequencies": [...],
//                  "orientations": ["vertical", "horizontal"]}
//   model CSV     "# emi-model v1", then "top_depth,sigma" rows
//   survey text   "# emi-survey v1", "key: value" header lines, then a CSV
//                 table "position[,elevation],re_0,im_0,..." in layout order
//   result JSON   see write_result()

#include "emi/inversion.hpp"
#include "emi/model.hpp"

#include <json.hpp>

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace emi::io {

inline constexpr const char* kVersion = "1.0.0";

/// 17 significant digits, enough for an exact double round trip.
std::string format_double(double v);
/// Strict decimal parse of a whole field; throws ParseError(line).
double parse_double(const std::string& field, std::size_t line = 0);

nlohmann::json device_to_json(const DeviceConfig& config);
DeviceConfig device_from_json(const nlohmann::json& j);
DeviceConfig read_device(const std::string& path);
void write_device(const std::string& path, const DeviceConfig& config);

void write_model(std::ostream& os, const LayeredEarthModel& model);
LayeredEarthModel read_model(std::istream& is);
LayeredEarthModel read_model(const std::string& path);

struct SurveyRecord {
  std::string position;
  std::optional<double> elevation;  // carried through, unused by the inversion
  DataVector readings;
};

struct Survey {
  DeviceConfig config;
  std::map<std::string, std::string> metadata;  // extra header keys (delta, seed, ...)
  std::vector<SurveyRecord> records;
};

void write_survey(std::ostream& os, const Survey& survey);
Survey read_survey(std::istream& is);
Survey read_survey(const std::string& path);
void write_survey(const std::string& path, const Survey& survey);

struct SoundingResult {
  std::string position;
  std::optional<double> elevation;
  std::optional<InversionResult> result;
  std::string error;
  std::optional<double> doi;  // nullopt: beyond the model or failed
};

struct ResultMeta {
  std::string config_hash;
  std::optional<std::uint64_t> seed;
  std::string timestamp;
  nlohmann::json options;
  std::string mode;
  std::size_t readings = 0;     // m
  Eigen::Index active_rows = 0;  // m or 2m
  double eta = 0.0;
};

nlohmann::json result_to_json(const ResultMeta& meta, const DeviceConfig& config,
                              const std::vector<SoundingResult>& soundings);

struct LoadedSounding {
  std::string position;
  std::optional<double> elevation;
  bool ok = false;
  std::vector<double> depths;
  std::vector<double> sigma;
  std::vector<double> sensitivity;
  std::string error;
};

/// Soundings of a result file. Throws ParseError when the file is malformed
/// or a successful sounding carries no sensitivity profile.
std::vector<LoadedSounding> load_result_soundings(const nlohmann::json& j);

/// FNV-1a 64-bit, hex encoded.
std::string fnv1a_hex(const std::string& text);

std::string utc_timestamp();

/// In-phase or quadrature part in parts per thousand.
double to_ppt(double v);
/// Low-induction-number apparent conductivity 4 Im(M) / (mu0 omega rho^2).
double lin_apparent_conductivity(Complex reading, double omega, double spacing);

/// Per-reading display table of one sounding:
/// index,orientation,height,spacing,frequency,re,im,inphase_ppt,quadrature_ppt,sigma_a
void write_readings_table(std::ostream& os, const DeviceConfig& config, const DataVector& b);

}  // namespace emi::io
