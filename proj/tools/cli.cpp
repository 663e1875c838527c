#include "cli.hpp"

#include "io.hpp"

#include "emi/doi.hpp"
#include "emi/errors.hpp"
#include "emi/forward.hpp"
#include "emi/inversion.hpp"
#include "emi/synthdata.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

namespace emi::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Problems with user input (bad flag values, inconsistent files).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
  return p;
}

int thread_count() {
  const char* env = std::getenv("EMI_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw UsageError("EMI_THREADS must be a positive integer");
  return static_cast<int>(std::min<long>(v, 256));
}

// ---- forward ---------------------------------------------------------------

struct ForwardArgs {
  std::string config;
  std::string model;
  std::string out_dir = ".";
};

int cmd_forward(const ForwardArgs& a, std::ostream& out) {
  const DeviceConfig device = io::read_device(a.config);
  const LayeredEarthModel model = io::read_model(a.model);
  const DataVector b = ForwardModel(device).response(model);
  const fs::path dir = prepare_dir(a.out_dir);

  io::Survey survey{device, {{"source", "forward"}}, {{"0", std::nullopt, b}}};
  io::write_survey((dir / "readings.survey").string(), survey);
  auto table = open_out(dir / "readings.csv");
  io::write_readings_table(table, device, b);
  io::write_readings_table(out, device, b);
  return kSuccess;
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  std::string experiment;
  double delta = 1e-3;
  std::uint64_t seed = 1;
  std::string orientations = "both";
  std::string config;
  std::string scaling = "printed";
  std::size_t layers = 60;
  double depth = 3.5;
  std::string out_dir = ".";
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  std::vector<Orientation> orientations;
  if (a.orientations == "both")
    orientations = {Orientation::Vertical, Orientation::Horizontal};
  else if (a.orientations == "vertical")
    orientations = {Orientation::Vertical};
  else
    orientations = {Orientation::Horizontal};
  const DeviceConfig device =
      a.config.empty() ? cmd_explorer(orientations) : io::read_device(a.config);
  const NoiseScaling scaling =
      a.scaling == "printed" ? NoiseScaling::Printed : NoiseScaling::PerEntry;

  std::vector<std::string> positions;
  std::vector<LayeredEarthModel> truth;
  if (a.experiment == "gaussian") {
    positions = {"0"};
    truth = {discretize_profile(profile_gaussian, a.layers, a.depth)};
  } else if (a.experiment == "step") {
    positions = {"0"};
    truth = {discretize_profile(profile_step, a.layers, a.depth)};
  } else {
    const Pseudo2dModel p = make_pseudo2d_model(50, a.layers, a.depth);
    for (double x : p.positions) positions.push_back(io::format_double(x));
    truth = p.columns;
  }

  const ForwardModel forward(device);
  io::Survey survey{device, {}, {}};
  survey.metadata["experiment"] = a.experiment;
  survey.metadata["delta"] = io::format_double(a.delta);
  survey.metadata["seed"] = std::to_string(a.seed);
  survey.metadata["noise_scaling"] = a.scaling;
  for (std::size_t c = 0; c < truth.size(); ++c) {
    // one independent stream per sounding, derived from the run seed
    const DataVector clean = forward.response(truth[c]);
    survey.records.push_back(
        {positions[c], std::nullopt, add_noise(clean, a.delta, a.seed + c, scaling)});
  }

  const fs::path dir = prepare_dir(a.out_dir);
  io::write_survey((dir / "survey.txt").string(), survey);
  io::write_device((dir / "device.json").string(), device);
  auto t = open_out(dir / "truth.csv");
  t << "position,top_depth,sigma\n";
  for (std::size_t c = 0; c < truth.size(); ++c)
    for (std::size_t k = 0; k < truth[c].size(); ++k)
      t << positions[c] << ',' << io::format_double(truth[c].depths()[k]) << ','
        << io::format_double(truth[c].sigma(k)) << '\n';
  out << "wrote " << survey.records.size() << " sounding(s), " << device.size()
      << " readings each, to " << dir.string() << '\n';
  return kSuccess;
}

// ---- invert ----------------------------------------------------------------

struct InvertArgs {
  std::string survey;
  std::string config;
  std::string reg = "d1";
  double tau = 1e-2;
  std::string param = "lcurve";
  long ell = 0;
  std::optional<double> delta;
  double safety = 1.0;
  std::optional<std::uint64_t> seed;
  std::string mode = "complex";
  std::vector<double> starts = {0.5};
  double eta = kDefaultEta;
  std::size_t layers = 60;
  double depth = 3.5;
  int max_iter = 50;
  std::string out_dir = ".";
};

// Keys of an --config file for `invert`; explicit flags take precedence.
void apply_config_file(InvertArgs& a, const CLI::App& sub) {
  if (a.config.empty()) return;
  std::ifstream is(a.config);
  if (!is) throw ParseError("cannot open " + a.config);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ParseError(a.config + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError(a.config + ": expected a JSON object");
  auto given = [&](const char* flag) { return sub.count(flag) > 0; };
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "reg" && !given("--reg")) a.reg = value.get<std::string>();
      else if (key == "tau" && !given("--tau")) a.tau = value.get<double>();
      else if (key == "param" && !given("--param")) a.param = value.get<std::string>();
      else if (key == "ell" && !given("--ell")) a.ell = value.get<long>();
      else if (key == "delta" && !given("--delta")) a.delta = value.get<double>();
      else if (key == "safety" && !given("--safety")) a.safety = value.get<double>();
      else if (key == "seed" && !given("--seed")) a.seed = value.get<std::uint64_t>();
      else if (key == "mode" && !given("--mode")) a.mode = value.get<std::string>();
      else if (key == "starts" && !given("--starts")) a.starts = value.get<std::vector<double>>();
      else if (key == "eta" && !given("--eta")) a.eta = value.get<double>();
      else if (key == "layers" && !given("--layers")) a.layers = value.get<std::size_t>();
      else if (key == "depth" && !given("--depth")) a.depth = value.get<double>();
      else if (key == "max_iter" && !given("--max-iter")) a.max_iter = value.get<int>();
      else if (key != "reg" && key != "tau" && key != "param" && key != "ell" &&
               key != "delta" && key != "safety" && key != "seed" && key != "mode" &&
               key != "starts" && key != "eta" && key != "layers" && key != "depth" &&
               key != "max_iter")
        throw ParseError(a.config + ": unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ParseError(a.config + ": " + e.what());
  }
}

InversionConfig make_inversion_config(const InvertArgs& a) {
  InversionConfig c;
  if (a.reg == "i") c.stabilizer = Stabilizer::Identity;
  else if (a.reg == "d1") c.stabilizer = Stabilizer::D1;
  else if (a.reg == "d2") c.stabilizer = Stabilizer::D2;
  else if (a.reg == "mgs") c.stabilizer = Stabilizer::Mgs;
  else throw UsageError("--reg must be one of i, d1, d2, mgs");
  c.tau = a.tau;
  if (a.param == "disc") {
    if (!a.delta) throw UsageError("--param disc needs --delta (or a 'delta' survey header)");
    c.rule = ParameterRule::discrepancy(*a.delta, a.safety);
  } else if (a.param == "lcurve") {
    c.rule = ParameterRule::lcurve();
  } else if (a.param == "fixed") {
    if (a.ell < 0) throw UsageError("--ell must be non-negative");
    c.rule = ParameterRule::fixed(a.ell);
  } else {
    throw UsageError("--param must be one of disc, lcurve, fixed");
  }
  if (a.mode == "complex") c.mode = DataMode::Complex;
  else if (a.mode == "quadrature") c.mode = DataMode::QuadratureOnly;
  else throw UsageError("--mode must be complex or quadrature");
  if (a.layers < 1 || !(a.depth > 0.0)) throw UsageError("--layers and --depth must be positive");
  c.layer_tops = uniform_layer_tops(a.layers, a.depth);
  c.starts = a.starts;
  c.max_iterations = a.max_iter;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

json options_json(const InvertArgs& a) {
  json o{{"reg", a.reg},     {"tau", a.tau},       {"param", a.param},   {"ell", a.ell},
         {"safety", a.safety}, {"mode", a.mode},   {"starts", a.starts}, {"eta", a.eta},
         {"layers", a.layers}, {"depth", a.depth}, {"max_iter", a.max_iter}};
  o["delta"] = a.delta ? json(*a.delta) : json(nullptr);
  return o;
}

double max_vertical_gradient(const InversionResult& r) {
  double g = 0.0;
  for (Eigen::Index k = 0; k + 1 < r.sigma.size(); ++k) {
    const double dz = r.depths[static_cast<std::size_t>(k + 1)] - r.depths[static_cast<std::size_t>(k)];
    g = std::max(g, std::abs(r.sigma(k + 1) - r.sigma(k)) / dz);
  }
  return g;
}

void write_section_csvs(const fs::path& dir, const std::vector<io::SoundingResult>& results) {
  auto sigma = open_out(dir / "sigma.csv");
  auto doi = open_out(dir / "doi.csv");
  auto res = open_out(dir / "residuals.csv");
  sigma << "position,top_depth,sigma\n";
  doi << "position,doi,status\n";
  res << "position,iteration,ell,alpha,residual,step_norm\n";
  for (const auto& s : results) {
    if (!s.result) {
      doi << s.position << ",,failed\n";
      continue;
    }
    const auto& r = *s.result;
    for (Eigen::Index k = 0; k < r.sigma.size(); ++k)
      sigma << s.position << ',' << io::format_double(r.depths[static_cast<std::size_t>(k)]) << ','
            << io::format_double(r.sigma(k)) << '\n';
    if (s.doi)
      doi << s.position << ',' << io::format_double(*s.doi) << ",finite\n";
    else
      doi << s.position << ",,beyond-model\n";
    res << s.position << ",0,,," << io::format_double(r.initial_residual) << ",\n";
    for (std::size_t k = 0; k < r.iterations.size(); ++k) {
      const auto& it = r.iterations[k];
      res << s.position << ',' << k + 1 << ',' << it.ell << ',' << io::format_double(it.alpha)
          << ',' << io::format_double(it.residual) << ',' << io::format_double(it.step_norm)
          << '\n';
    }
  }
}

int cmd_invert(InvertArgs a, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  apply_config_file(a, sub);
  const io::Survey survey = io::read_survey(a.survey);
  if (!a.delta && a.param == "disc") {
    if (auto it = survey.metadata.find("delta"); it != survey.metadata.end()) {
      a.delta = io::parse_double(it->second);
      // the header delta is the generator's; the threshold needs the expected noise norm
      const auto sc = survey.metadata.find("noise_scaling");
      const bool per_entry = sc != survey.metadata.end() && sc->second == "per-entry";
      *a.delta *= noise_norm_factor(per_entry ? NoiseScaling::PerEntry : NoiseScaling::Printed);
    }
  }
  if (!a.seed) {
    if (auto it = survey.metadata.find("seed"); it != survey.metadata.end())
      a.seed = std::stoull(it->second);
  }
  if (!(a.eta > 0.0 && a.eta <= 1.0)) throw UsageError("--eta must lie in (0, 1]");
  const InversionConfig config = make_inversion_config(a);
  if (survey.records.empty()) throw ParseError(a.survey + ": no soundings");

  const ForwardModel forward(survey.config);
  std::vector<DataVector> data;
  for (const auto& r : survey.records) data.push_back(r.readings);
  const auto outcomes = invert_section(forward, data, config, thread_count());

  std::vector<io::SoundingResult> results;
  bool failed = false, unconverged = false;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    io::SoundingResult s{survey.records[i].position, survey.records[i].elevation,
                         outcomes[i].result, outcomes[i].error, std::nullopt};
    if (s.result) {
      try {
        s.doi = doi_depth(s.result->sensitivity, s.result->depths, a.eta);
      } catch (const UndefinedSensitivityError&) {
        s.doi.reset();
      }
      if (!s.result->converged) {
        unconverged = true;
        err << "sounding " << s.position << ": not converged ("
            << to_string(s.result->termination) << ")\n";
      }
    } else {
      failed = true;
      err << "sounding " << s.position << ": " << s.error << '\n';
    }
    results.push_back(std::move(s));
  }

  io::ResultMeta meta;
  meta.options = options_json(a);
  meta.config_hash =
      io::fnv1a_hex(meta.options.dump() + io::device_to_json(survey.config).dump());
  meta.seed = a.seed;
  meta.timestamp = io::utc_timestamp();
  meta.mode = a.mode;
  meta.readings = survey.config.size();
  meta.active_rows = active_rows(config.mode, static_cast<Eigen::Index>(meta.readings));
  meta.eta = a.eta;

  const fs::path dir = prepare_dir(a.out_dir);
  {
    auto os = open_out(dir / "result.json");
    os << io::result_to_json(meta, survey.config, results).dump(2) << '\n';
  }
  write_section_csvs(dir, results);

  auto summary = open_out(dir / "summary.txt");
  std::size_t converged = 0;
  double sharpness = 0.0, misfit = 0.0;
  std::size_t ok = 0;
  for (const auto& s : results) {
    if (!s.result) continue;
    ++ok;
    converged += s.result->converged ? 1 : 0;
    sharpness += max_vertical_gradient(*s.result);
    misfit += s.result->relative_misfit;
  }
  summary << "soundings " << results.size() << "\nconverged " << converged << "\nfailed "
          << results.size() - ok << "\nactive_rows " << meta.active_rows << "\n";
  if (ok > 0)
    summary << "mean_relative_misfit " << io::format_double(misfit / static_cast<double>(ok))
            << "\nmean_max_vertical_gradient "
            << io::format_double(sharpness / static_cast<double>(ok)) << '\n';
  out << "inverted " << results.size() << " sounding(s): " << converged << " converged, "
      << results.size() - ok << " failed; results in " << dir.string() << '\n';

  if (failed) return kNumericalFailure;
  if (unconverged) return kConvergenceFailure;
  return kSuccess;
}

// ---- doi -------------------------------------------------------------------

struct DoiArgs {
  std::string result;
  double eta = kDefaultEta;
  std::string out_dir;
};

int cmd_doi(const DoiArgs& a, std::ostream& out) {
  if (!(a.eta > 0.0 && a.eta <= 1.0)) throw UsageError("--eta must lie in (0, 1]");
  std::ifstream is(a.result);
  if (!is) throw ParseError("cannot open " + a.result);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ParseError(a.result + ": " + e.what());
  }
  const auto soundings = io::load_result_soundings(j);

  std::ostringstream table;
  table << "position,doi,status\n";
  for (const auto& s : soundings) {
    if (!s.ok) {
      table << s.position << ",,failed\n";
      continue;
    }
    const Eigen::VectorXd sens =
        Eigen::Map<const Eigen::VectorXd>(s.sensitivity.data(),
                                          static_cast<Eigen::Index>(s.sensitivity.size()));
    std::optional<double> z;
    try {
      z = doi_depth(sens, s.depths, a.eta);
    } catch (const UndefinedSensitivityError&) {
      table << s.position << ",,undefined\n";
      continue;
    }
    if (z)
      table << s.position << ',' << io::format_double(*z) << ",finite\n";
    else
      table << s.position << ",,beyond-model\n";
  }
  out << table.str();
  if (!a.out_dir.empty()) {
    auto os = open_out(prepare_dir(a.out_dir) / "doi.csv");
    os << table.str();
  }
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Layered-earth EMI forward modelling and regularized inversion", "emi"};
  app.require_subcommand(1);
  app.set_version_flag("--version", io::kVersion);

  ForwardArgs fa;
  auto* forward = app.add_subcommand("forward", "Readings of a layered model");
  forward->add_option("--config", fa.config, "Device configuration (JSON)")->required();
  forward->add_option("--model", fa.model, "Layered model (CSV)")->required();
  forward->add_option("--out-dir", fa.out_dir, "Output directory");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Synthetic survey for a test profile");
  synth->add_option("experiment", sa.experiment, "gaussian, step or pseudo2d")
      ->required()
      ->check(CLI::IsMember({"gaussian", "step", "pseudo2d"}));
  synth->add_option("--delta", sa.delta, "Relative noise level")->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", sa.seed, "Noise seed");
  synth->add_option("--orientations", sa.orientations, "both, vertical or horizontal")
      ->check(CLI::IsMember({"both", "vertical", "horizontal"}));
  synth->add_option("--config", sa.config, "Device configuration (JSON), default CMD Explorer");
  synth->add_option("--noise-scaling", sa.scaling, "printed or per-entry")
      ->check(CLI::IsMember({"printed", "per-entry"}));
  synth->add_option("--layers", sa.layers, "Layers of the true model")->check(CLI::PositiveNumber);
  synth->add_option("--depth", sa.depth, "Depth of the layer grid, m")->check(CLI::PositiveNumber);
  synth->add_option("--out-dir", sa.out_dir, "Output directory");

  InvertArgs ia;
  auto* invert = app.add_subcommand("invert", "Invert every sounding of a survey");
  invert->add_option("survey", ia.survey, "Survey file")->required();
  invert->add_option("--config", ia.config, "Inversion options (JSON); flags take precedence");
  invert->add_option("--reg", ia.reg, "i, d1, d2 or mgs")
      ->check(CLI::IsMember({"i", "d1", "d2", "mgs"}));
  invert->add_option("--tau", ia.tau, "MGS focusing parameter")->check(CLI::PositiveNumber);
  invert->add_option("--param", ia.param, "disc, lcurve or fixed")
      ->check(CLI::IsMember({"disc", "lcurve", "fixed"}));
  invert->add_option("--ell", ia.ell, "Truncation parameter for --param fixed");
  invert->add_option("--delta", ia.delta, "Noise level for --param disc")
      ->check(CLI::NonNegativeNumber);
  invert->add_option("--safety", ia.safety, "Discrepancy safety factor")
      ->check(CLI::PositiveNumber);
  invert->add_option("--seed", ia.seed, "Seed recorded in the result metadata");
  invert->add_option("--mode", ia.mode, "complex or quadrature")
      ->check(CLI::IsMember({"complex", "quadrature"}));
  invert->add_option("--starts", ia.starts, "Constant starting conductivities, S/m")
      ->delimiter(',');
  invert->add_option("--eta", ia.eta, "DOI threshold");
  invert->add_option("--layers", ia.layers, "Layers of the inversion grid");
  invert->add_option("--depth", ia.depth, "Depth of the inversion grid, m");
  invert->add_option("--max-iter", ia.max_iter, "Gauss-Newton iteration limit");
  invert->add_option("--out-dir", ia.out_dir, "Output directory");

  DoiArgs da;
  auto* doi = app.add_subcommand("doi", "Depth of investigation from a result file");
  doi->add_option("result", da.result, "result.json written by invert")->required();
  doi->add_option("--eta", da.eta, "DOI threshold");
  doi->add_option("--out-dir", da.out_dir, "Also write doi.csv here");

  std::vector<std::string> argv_store{"emi"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kParseError;
  }

  try {
    if (*forward) return cmd_forward(fa, out);
    if (*synth) return cmd_synth(sa, out);
    if (*invert) return cmd_invert(ia, *invert, out, err);
    if (*doi) return cmd_doi(da, out);
  } catch (const ParseError& e) {
    err << "emi: " << e.what() << '\n';
    return kParseError;
  } catch (const UsageError& e) {
    err << "emi: " << e.what() << '\n';
    return kParseError;
  } catch (const std::invalid_argument& e) {
    err << "emi: " << e.what() << '\n';
    return kParseError;
  } catch (const std::exception& e) {
    err << "emi: " << e.what() << '\n';
    return kNumericalFailure;
  }
  return kParseError;
}

}  // namespace emi::cli
