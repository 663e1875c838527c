#include "io.hpp"

#include "emi/errors.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

namespace emi::io {

using nlohmann::json;

namespace {

constexpr const char* kModelMagic = "# emi-model v1";
constexpr const char* kSurveyMagic = "# emi-survey v1";
constexpr const char* kLayout = "orientation,height,spacing,frequency";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(s);
  while (std::getline(is, field, sep)) out.push_back(trim(field));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string join_doubles(std::span<const double> v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

std::vector<double> parse_list(const std::string& s, std::size_t line) {
  std::vector<double> out;
  for (const auto& f : split(s, ',')) out.push_back(parse_double(f, line));
  return out;
}

const char* orientation_name(Orientation o) {
  return o == Orientation::Vertical ? "vertical" : "horizontal";
}

Orientation parse_orientation(const std::string& s, std::size_t line) {
  if (s == "vertical" || s == "v") return Orientation::Vertical;
  if (s == "horizontal" || s == "h") return Orientation::Horizontal;
  throw ParseError("unknown orientation '" + s + "'", line);
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open " + path);
  return is;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  return os;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& field, std::size_t line) {
  const std::string f = trim(field);
  double v = 0.0;
  const char* first = f.data();
  const char* last = f.data() + f.size();
  if (!f.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (f.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
    throw ParseError("not a finite number: '" + f + "'", line);
  return v;
}

json device_to_json(const DeviceConfig& config) {
  json j;
  j["spacings"] = std::vector<double>(config.spacings().begin(), config.spacings().end());
  j["heights"] = std::vector<double>(config.heights().begin(), config.heights().end());
  j["frequencies"] =
      std::vector<double>(config.frequencies().begin(), config.frequencies().end());
  json o = json::array();
  for (Orientation x : config.orientations()) o.push_back(orientation_name(x));
  j["orientations"] = o;
  return j;
}

DeviceConfig device_from_json(const json& j) {
  try {
    std::vector<Orientation> orientations;
    for (const auto& o : j.at("orientations")) orientations.push_back(parse_orientation(o, 0));
    return DeviceConfig(j.at("spacings").get<std::vector<double>>(),
                        j.at("heights").get<std::vector<double>>(),
                        j.at("frequencies").get<std::vector<double>>(), std::move(orientations));
  } catch (const json::exception& e) {
    throw ParseError(std::string("device config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("device config: ") + e.what());
  }
}

DeviceConfig read_device(const std::string& path) {
  auto is = open_in(path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return device_from_json(j);
}

void write_device(const std::string& path, const DeviceConfig& config) {
  auto os = open_out(path);
  os << device_to_json(config).dump(2) << '\n';
}

void write_model(std::ostream& os, const LayeredEarthModel& model) {
  os << kModelMagic << "\ntop_depth,sigma\n";
  for (std::size_t k = 0; k < model.size(); ++k)
    os << format_double(model.depths()[k]) << ',' << format_double(model.sigma(k)) << '\n';
}

LayeredEarthModel read_model(std::istream& is) {
  std::string line;
  std::size_t no = 0;
  if (!std::getline(is, line) || trim(line) != kModelMagic)
    throw ParseError("missing '" + std::string(kModelMagic) + "' header", 1);
  ++no;
  std::vector<double> depths, sigma;
  bool header = false;
  while (std::getline(is, line)) {
    ++no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!header) {
      if (t != "top_depth,sigma") throw ParseError("expected 'top_depth,sigma'", no);
      header = true;
      continue;
    }
    const auto f = split(t, ',');
    if (f.size() != 2) throw ParseError("expected 2 fields, got " + std::to_string(f.size()), no);
    depths.push_back(parse_double(f[0], no));
    sigma.push_back(parse_double(f[1], no));
  }
  try {
    return LayeredEarthModel(std::move(depths), std::move(sigma));
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("invalid model: ") + e.what());
  }
}

LayeredEarthModel read_model(const std::string& path) {
  auto is = open_in(path);
  return read_model(is);
}

void write_survey(std::ostream& os, const Survey& survey) {
  const auto& c = survey.config;
  os << kSurveyMagic << '\n';
  os << "orientations: ";
  for (std::size_t i = 0; i < c.orientations().size(); ++i)
    os << (i ? "," : "") << orientation_name(c.orientations()[i]);
  os << "\nheights: " << join_doubles(c.heights()) << '\n';
  os << "spacings: " << join_doubles(c.spacings()) << '\n';
  os << "frequencies: " << join_doubles(c.frequencies()) << '\n';
  os << "layout: " << kLayout << '\n';
  for (const auto& [k, v] : survey.metadata) os << k << ": " << v << '\n';

  const bool elevation = std::any_of(survey.records.begin(), survey.records.end(),
                                     [](const SurveyRecord& r) { return r.elevation.has_value(); });
  os << "position";
  if (elevation) os << ",elevation";
  for (std::size_t i = 0; i < c.size(); ++i) os << ",re_" << i << ",im_" << i;
  os << '\n';
  for (const auto& r : survey.records) {
    if (r.readings.size() != static_cast<Eigen::Index>(c.size()))
      throw std::invalid_argument("record '" + r.position + "' has the wrong reading count");
    if (r.position.find(',') != std::string::npos)
      throw std::invalid_argument("positions must not contain commas");
    os << r.position;
    if (elevation) os << ',' << (r.elevation ? format_double(*r.elevation) : std::string("nan"));
    for (Eigen::Index i = 0; i < r.readings.size(); ++i)
      os << ',' << format_double(r.readings(i).real()) << ','
         << format_double(r.readings(i).imag());
    os << '\n';
  }
}

Survey read_survey(std::istream& is) {
  std::string line;
  std::size_t no = 1;
  if (!std::getline(is, line) || trim(line) != kSurveyMagic)
    throw ParseError("missing '" + std::string(kSurveyMagic) + "' header", 1);

  std::map<std::string, std::string> keys;
  std::map<std::string, std::size_t> key_line;
  std::vector<std::string> columns;
  while (std::getline(is, line)) {
    ++no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.rfind("position", 0) == 0 && t.find(':') == std::string::npos) {
      columns = split(t, ',');
      break;
    }
    const auto colon = t.find(':');
    if (colon == std::string::npos) throw ParseError("expected 'key: value'", no);
    const std::string key = trim(t.substr(0, colon));
    if (keys.count(key)) throw ParseError("duplicate header key '" + key + "'", no);
    keys[key] = trim(t.substr(colon + 1));
    key_line[key] = no;
  }
  if (columns.empty()) throw ParseError("missing table header line 'position,...'", no);

  auto need = [&](const std::string& k) -> const std::string& {
    auto it = keys.find(k);
    if (it == keys.end()) throw ParseError("missing header key '" + k + "'");
    return it->second;
  };
  if (need("layout") != kLayout)
    throw ParseError("unsupported layout '" + need("layout") + "'", key_line["layout"]);
  std::vector<Orientation> orientations;
  for (const auto& o : split(need("orientations"), ','))
    orientations.push_back(parse_orientation(o, key_line["orientations"]));
  std::optional<DeviceConfig> config;
  try {
    config.emplace(parse_list(need("spacings"), key_line["spacings"]),
                   parse_list(need("heights"), key_line["heights"]),
                   parse_list(need("frequencies"), key_line["frequencies"]),
                   std::move(orientations));
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("invalid device header: ") + e.what());
  }

  Survey survey{*config, {}, {}};
  for (const auto& [k, v] : keys)
    if (k != "layout" && k != "orientations" && k != "spacings" && k != "heights" &&
        k != "frequencies")
      survey.metadata[k] = v;

  const std::size_t m = config->size();
  const bool elevation = columns.size() > 1 && columns[1] == "elevation";
  const std::size_t lead = elevation ? 2 : 1;
  if (columns.size() != lead + 2 * m)
    throw ParseError("table header has " + std::to_string(columns.size()) + " columns, expected " +
                         std::to_string(lead + 2 * m),
                     no);
  while (std::getline(is, line)) {
    ++no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto f = split(t, ',');
    if (f.size() != lead + 2 * m)
      throw ParseError("expected " + std::to_string(lead + 2 * m) + " fields, got " +
                           std::to_string(f.size()),
                       no);
    SurveyRecord r;
    r.position = f[0];
    if (elevation && f[1] != "nan") r.elevation = parse_double(f[1], no);
    r.readings.resize(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i)
      r.readings(static_cast<Eigen::Index>(i)) =
          Complex(parse_double(f[lead + 2 * i], no), parse_double(f[lead + 2 * i + 1], no));
    survey.records.push_back(std::move(r));
  }
  return survey;
}

Survey read_survey(const std::string& path) {
  auto is = open_in(path);
  return read_survey(is);
}

void write_survey(const std::string& path, const Survey& survey) {
  auto os = open_out(path);
  write_survey(os, survey);
}

json result_to_json(const ResultMeta& meta, const DeviceConfig& config,
                    const std::vector<SoundingResult>& soundings) {
  json j;
  j["format"] = "emi-result v1";
  j["version"] = kVersion;
  j["timestamp"] = meta.timestamp;
  j["config_hash"] = meta.config_hash;
  j["seed"] = meta.seed ? json(*meta.seed) : json(nullptr);
  j["options"] = meta.options;
  j["mode"] = meta.mode;
  j["readings"] = meta.readings;
  j["active_rows"] = meta.active_rows;
  j["eta"] = meta.eta;
  j["device"] = device_to_json(config);
  json list = json::array();
  for (const auto& s : soundings) {
    json e;
    e["position"] = s.position;
    e["elevation"] = s.elevation ? json(*s.elevation) : json(nullptr);
    e["ok"] = s.result.has_value();
    if (!s.result) {
      e["error"] = s.error;
      list.push_back(std::move(e));
      continue;
    }
    const auto& r = *s.result;
    e["depths"] = r.depths;
    e["sigma"] = std::vector<double>(r.sigma.data(), r.sigma.data() + r.sigma.size());
    e["sensitivity"] =
        std::vector<double>(r.sensitivity.data(), r.sensitivity.data() + r.sensitivity.size());
    e["doi"] = s.doi ? json(*s.doi) : json(nullptr);
    e["residual"] = r.residual;
    e["initial_residual"] = r.initial_residual;
    e["relative_misfit"] = r.relative_misfit;
    e["converged"] = r.converged;
    e["termination"] = to_string(r.termination);
    e["start_sigma"] = r.start_sigma;
    e["ell"] = r.ell >= 0 ? json(r.ell) : json(nullptr);
    e["lcurve_degenerate"] = r.lcurve_degenerate;
    json sweep = json::array();
    for (const auto& p : r.sweep)
      sweep.push_back({{"ell", p.ell},
                       {"residual", p.residual},
                       {"seminorm", p.seminorm},
                       {"termination", to_string(p.termination)}});
    e["sweep"] = sweep;
    json its = json::array();
    for (const auto& it : r.iterations)
      its.push_back({{"ell", it.ell},
                     {"alpha", it.alpha},
                     {"residual", it.residual},
                     {"step_norm", it.step_norm},
                     {"lcurve_degenerate", it.lcurve_degenerate}});
    e["iterations"] = its;
    json starts = json::array();
    for (const auto& d : r.starts) {
      json sd{{"start_sigma", d.start_sigma}, {"ok", d.ok}};
      if (d.ok) {
        sd["residual"] = d.residual;
        sd["termination"] = to_string(d.termination);
      } else {
        sd["error"] = d.error;
      }
      starts.push_back(std::move(sd));
    }
    e["starts"] = starts;
    list.push_back(std::move(e));
  }
  j["soundings"] = list;
  return j;
}

std::vector<LoadedSounding> load_result_soundings(const json& j) {
  if (!j.is_object() || j.value("format", "") != "emi-result v1")
    throw ParseError("not an emi result file");
  std::vector<LoadedSounding> out;
  try {
    for (const auto& e : j.at("soundings")) {
      LoadedSounding s;
      s.position = e.at("position").get<std::string>();
      if (!e.at("elevation").is_null()) s.elevation = e.at("elevation").get<double>();
      s.ok = e.at("ok").get<bool>();
      if (!s.ok) {
        s.error = e.value("error", "");
        out.push_back(std::move(s));
        continue;
      }
      s.depths = e.at("depths").get<std::vector<double>>();
      s.sigma = e.at("sigma").get<std::vector<double>>();
      if (!e.contains("sensitivity"))
        throw ParseError("sounding '" + s.position + "' carries no sensitivity data");
      s.sensitivity = e.at("sensitivity").get<std::vector<double>>();
      if (s.sensitivity.size() != s.depths.size() || s.sigma.size() != s.depths.size())
        throw ParseError("sounding '" + s.position + "' has inconsistent array lengths");
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("result file: ") + e.what());
  }
  return out;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double to_ppt(double v) { return 1e3 * v; }

double lin_apparent_conductivity(Complex reading, double omega, double spacing) {
  return 4.0 * reading.imag() / (kMu0 * omega * spacing * spacing);
}

void write_readings_table(std::ostream& os, const DeviceConfig& config, const DataVector& b) {
  os << "index,orientation,height,spacing,frequency,re,im,inphase_ppt,quadrature_ppt,sigma_a\n";
  for (std::size_t i = 0; i < config.size(); ++i) {
    const Reading rd = config.reading(i);
    const Complex v = b(static_cast<Eigen::Index>(i));
    os << i << ',' << orientation_name(rd.orientation) << ',' << format_double(rd.height) << ','
       << format_double(rd.spacing) << ',' << format_double(rd.frequency) << ','
       << format_double(v.real()) << ',' << format_double(v.imag()) << ','
       << format_double(to_ppt(v.real())) << ',' << format_double(to_ppt(v.imag())) << ','
       << format_double(lin_apparent_conductivity(v, rd.omega(), rd.spacing)) << '\n';
  }
}

}  // namespace emi::io
