#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rfodmr/error.hpp"
#include "rfodmr/fit.hpp"
#include "rfodmr/io.hpp"
#include "rfodmr/link.hpp"
#include "rfodmr/spectrum.hpp"
#include "rfodmr/spin.hpp"

namespace rfodmr::cli {

namespace fs = std::filesystem;

namespace {

// Saturation constants shared by both presets: one calibration of the
// antenna/sample coupling reproduces ~2% at 0 dBm and >11% at 25 dBm.
const FlatConfig kSaturationPreset = {
    {"p_sat_mw", "5"}, {"c_inf", "0.12"}, {"fwhm0_mhz", "8"}};

FlatConfig preset(const std::string& name) {
  FlatConfig c = kSaturationPreset;
  if (name == "coax-power") {
    c["field_g"] = "11.2";
    c["field_dir"] = "0,0,1";
    c["powers_dbm"] = "0,3,9,15,21,25";
  } else if (name == "rfof-field") {
    c["field_dir"] = "1,1,1";
    c["p_rf_dbm"] = "-5.5";
    c["field_range_g"] = "8:36";
    c["field_step_g"] = "4";
  } else {
    throw InvalidInput("unknown preset '" + name + "' (known: coax-power, rfof-field)");
  }
  return c;
}

const std::vector<std::string> kSpectrumKeys = {
    "d_mhz",    "e_mhz",     "gamma_mhz_per_g", "field_g",    "field_dir",   "p_rf_dbm",
    "p_sat_mw", "c_inf",     "fwhm0_mhz",       "f_start_mhz", "f_stop_mhz", "points",
    "noise_sigma"};
const std::vector<std::string> kFitKeys = {"n_lines", "max_iterations", "convergence_tol",
                                           "peak_threshold"};
const std::vector<std::string> kLinkKeys = {
    "p_opt_pd_mw", "p_opt_pd_dbm", "p_rf_ant_dbm",         "p_rf_ant_mw",        "p_laser_mw",
    "p_laser_dbm", "insertion_loss", "v_pi_v",             "bias_phase_rad",     "v_rf_v",
    "modulation_index", "responsivity_a_per_w", "load_impedance_ohm", "cable_loss_db"};

FlatConfig spectrum_defaults() {
  return {{"d_mhz", "2870"},      {"e_mhz", "0"},          {"gamma_mhz_per_g", "2.8"},
          {"field_g", "11.2"},    {"field_dir", "0,0,1"},  {"p_rf_dbm", "0"},
          {"p_sat_mw", "5"},      {"c_inf", "0.12"},       {"fwhm0_mhz", "8"},
          {"f_start_mhz", "2750"}, {"f_stop_mhz", "2990"}, {"points", "1201"},
          {"noise_sigma", "0"}};
}

struct CommandSpec {
  std::vector<std::string> keys;
  FlatConfig defaults;
};

CommandSpec command_spec(const std::string& command) {
  CommandSpec spec;
  auto append = [&](const std::vector<std::string>& k) {
    spec.keys.insert(spec.keys.end(), k.begin(), k.end());
  };
  if (command == "simulate") {
    append(kSpectrumKeys);
    spec.defaults = spectrum_defaults();
  } else if (command == "fit") {
    append(kFitKeys);
    spec.defaults = {{"n_lines", "auto"}, {"max_iterations", "200"}, {"convergence_tol", "1e-9"}};
  } else if (command == "link") {
    append(kLinkKeys);
  } else if (command == "sweep-field") {
    append(kSpectrumKeys);
    append(kFitKeys);
    append({"field_range_g", "field_step_g"});
    spec.defaults = spectrum_defaults();
    for (const auto& [k, v] : preset("rfof-field")) spec.defaults[k] = v;
    spec.defaults["n_lines"] = "auto";
    spec.defaults["max_iterations"] = "200";
    spec.defaults["convergence_tol"] = "1e-9";
  } else if (command == "sweep-power") {
    append(kSpectrumKeys);
    append(kFitKeys);
    append({"powers_dbm", "power_range_dbm", "power_step_db"});
    spec.defaults = spectrum_defaults();
    for (const auto& [k, v] : preset("coax-power")) spec.defaults[k] = v;
    spec.defaults["n_lines"] = "auto";
    spec.defaults["max_iterations"] = "200";
    spec.defaults["convergence_tol"] = "1e-9";
  }
  spec.keys.push_back("seed");
  return spec;
}

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

void merge(FlatConfig& into, const FlatConfig& from, const CommandSpec& spec,
           const std::string& source) {
  for (const auto& [k, v] : from) {
    if (std::find(spec.keys.begin(), spec.keys.end(), k) == spec.keys.end())
      throw InvalidInput("unknown key '" + k + "' in " + source);
    into[k] = v;
  }
}

fs::path resolve_config(const std::string& path) {
  fs::path p(path);
  if (fs::exists(p)) return p;
  if (const char* dir = std::getenv(kConfigDirEnv); dir && p.is_relative()) {
    const fs::path alt = fs::path(dir) / p;
    if (fs::exists(alt)) return alt;
  }
  throw InvalidInput("config file not found: '" + path + "'");
}

// Typed access to the merged configuration; errors name the key.
class Settings {
 public:
  explicit Settings(FlatConfig values) : values_(std::move(values)) {}

  [[nodiscard]] bool has(const std::string& key) const { return values_.contains(key); }
  [[nodiscard]] const std::string& text(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw InvalidInput("missing required key '" + key + "'");
    return it->second;
  }
  [[nodiscard]] double number(const std::string& key) const { return parse_number(text(key), key); }
  [[nodiscard]] std::size_t count(const std::string& key) const {
    const double v = number(key);
    if (v < 0.0 || v != std::floor(v) || v > 1e9)
      throw InvalidInput("key '" + key + "' must be a non-negative integer");
    return static_cast<std::size_t>(v);
  }
  [[nodiscard]] std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(text(key));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(item, key));
    return out;
  }
  [[nodiscard]] const FlatConfig& values() const { return values_; }

 private:
  FlatConfig values_;
};

// Wraps InvalidInput from a domain constructor so the message names the key.
template <class F>
auto keyed(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const InvalidInput& e) {
    throw InvalidInput("invalid value for key '" + key + "': " + e.what());
  }
}

NVParameters nv_params(const Settings& s) {
  NVParameters p;
  p.zero_field_mhz = s.number("d_mhz");
  p.strain_mhz = s.number("e_mhz");
  p.gamma_mhz_per_gauss = s.number("gamma_mhz_per_g");
  keyed("d_mhz/e_mhz/gamma_mhz_per_g", [&] { p.validate(); return 0; });
  return p;
}

FieldVector field(const Settings& s, double magnitude) {
  const auto dir = s.list("field_dir");
  if (dir.size() != 3) throw InvalidInput("invalid value for key 'field_dir': expected 'x,y,z'");
  return keyed("field_dir", [&] {
    return FieldVector::along(Eigen::Vector3d{dir[0], dir[1], dir[2]}, magnitude);
  });
}

DriveParameters drive(const Settings& s, double p_rf_dbm) {
  DriveParameters d;
  d.p_rf_dbm = p_rf_dbm;
  d.p_sat_mw = s.number("p_sat_mw");
  d.c_inf = s.number("c_inf");
  d.fwhm0_mhz = s.number("fwhm0_mhz");
  keyed("p_rf_dbm/p_sat_mw/c_inf/fwhm0_mhz", [&] { d.validate(); return 0; });
  return d;
}

FrequencyGrid grid(const Settings& s) {
  FrequencyGrid g;
  g.start_mhz = s.number("f_start_mhz");
  g.stop_mhz = s.number("f_stop_mhz");
  g.points = s.count("points");
  keyed("points", [&] { g.validate(); return 0; });
  return g;
}

double noise_sigma(const Settings& s) {
  const double v = s.number("noise_sigma");
  if (v < 0.0) throw InvalidInput("invalid value for key 'noise_sigma': must be >= 0");
  return v;
}

FitConfig fit_config(const Settings& s) {
  FitConfig c;
  if (s.has("n_lines") && s.text("n_lines") != "auto") {
    c.n_lines = s.count("n_lines");
    if (*c.n_lines < 1) throw InvalidInput("invalid value for key 'n_lines': must be >= 1");
  }
  if (s.has("max_iterations")) c.max_iterations = static_cast<int>(s.count("max_iterations"));
  if (s.has("convergence_tol")) c.convergence_tol = s.number("convergence_tol");
  if (s.has("peak_threshold")) c.peak_threshold = s.number("peak_threshold");
  keyed("max_iterations/convergence_tol/peak_threshold", [&] { c.validate(); return 0; });
  return c;
}

std::vector<double> range(const Settings& s, const std::string& range_key,
                          const std::string& step_key) {
  const std::string& text = s.text(range_key);
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw InvalidInput("invalid value for key '" + range_key + "': expected 'start:stop'");
  const double a = parse_number(text.substr(0, colon), range_key);
  const double b = parse_number(text.substr(colon + 1), range_key);
  if (!(b > a))
    throw InvalidInput("invalid value for key '" + range_key +
                       "': range must be ascending with at least 2 points");
  const double step = s.number(step_key);
  if (!(step > 0.0)) throw InvalidInput("invalid value for key '" + step_key + "': must be > 0");
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    const double v = a + step * static_cast<double>(i);
    if (v > b + 1e-9 * std::max(1.0, std::abs(b))) break;
    out.push_back(v);
  }
  if (out.size() < 2)
    throw InvalidInput("invalid value for key '" + step_key + "': sweep needs at least 2 points");
  return out;
}

void emit(const std::string& content, const std::string& out_path, std::ostream& out,
          const std::string& what) {
  if (out_path.empty() || out_path == "-") {
    out << content;
  } else {
    write_text_file_atomic(out_path, content);
    out << "wrote " << what << " to " << out_path << "\n";
  }
}

std::string point_name(const char* stem, std::size_t i, const char* ext) {
  std::ostringstream os;
  os << stem << '_' << std::setw(3) << std::setfill('0') << i << ext;
  return os.str();
}

struct Context {
  Settings settings;
  std::uint64_t seed;
  std::string out_path;
  std::string in_path;
};

int cmd_simulate(const Context& ctx, std::ostream& out) {
  const auto& s = ctx.settings;
  const Spectrum spec =
      synthesize_spectrum(nv_params(s), field(s, s.number("field_g")), drive(s, s.number("p_rf_dbm")),
                          grid(s), noise_sigma(s), ctx.seed);
  emit(spectrum_to_csv(spec), ctx.out_path, out, "spectrum");
  return kExitOk;
}

int cmd_fit(const Context& ctx, std::ostream& out) {
  if (ctx.in_path.empty()) throw InvalidInput("fit requires an input CSV (--in <path>)");
  const Spectrum spec = spectrum_from_csv(read_text_file(ctx.in_path));
  const FitResult fit = fit_spectrum(spec, fit_config(ctx.settings));
  emit(fit_result_to_json(fit), ctx.out_path, out, "fit result");
  return kExitOk;
}

int cmd_link(const Context& ctx, std::ostream& out) {
  const LinkResult r = evaluate_link_input(link_input_from_config(ctx.settings.values()));
  emit(link_result_to_json(r), ctx.out_path, out, "link result");
  return kExitOk;
}

// Lines expected from the geometry: two per distinct orientation group.
std::size_t expected_lines(const FieldVector& f) { return 2 * group_orientations(f).size(); }

struct SweepPointSpec {
  double control;
  FieldVector field;
  DriveParameters drive;
};

int run_sweep(const Context& ctx, std::ostream& out, const std::vector<SweepPointSpec>& points,
              SweepKind kind) {
  if (ctx.out_path.empty()) throw InvalidInput("sweeps require an output directory (--out <dir>)");
  const fs::path dir(ctx.out_path);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw InvalidInput("cannot create output directory '" + ctx.out_path + "'");

  const auto& s = ctx.settings;
  const NVParameters params = nv_params(s);
  const FrequencyGrid g = grid(s);
  const double sigma = noise_sigma(s);
  const FitConfig base_cfg = fit_config(s);

  std::vector<std::pair<double, FitResult>> fits;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& pt = points[i];
    const Spectrum spec = synthesize_spectrum(params, pt.field, pt.drive, g, sigma, ctx.seed + i);
    write_text_file_atomic(dir / point_name("spectrum", i, ".csv"), spectrum_to_csv(spec));

    FitConfig cfg = base_cfg;
    if (!cfg.n_lines) cfg.n_lines = expected_lines(pt.field);
    FitResult fit;
    try {
      fit = fit_spectrum(spec, cfg);
    } catch (const InvalidInput&) {
      fit = FitResult{};  // no dips: recorded as an excluded point
    } catch (const DegenerateFit&) {
      fit = FitResult{};
    }
    write_text_file_atomic(dir / point_name("fit", i, ".json"), fit_result_to_json(fit));
    fits.emplace_back(pt.control, fit);
  }

  SweepResult sweep;
  if (kind == SweepKind::field) {
    FieldSweepOptions opt;
    opt.gamma_mhz_per_gauss = params.gamma_mhz_per_gauss;
    opt.alpha_rad = group_orientations(points.front().field).front().projection.alpha_rad;
    sweep = analyze_field_sweep(fits, opt);
  } else {
    sweep = analyze_power_sweep(fits);
  }
  write_text_file_atomic(dir / "sweep.json", sweep_result_to_json(sweep));

  out << "wrote " << points.size() << " spectra and sweep.json to " << ctx.out_path << "\n";
  if (sweep.regression) {
    out << "splitting slope " << format_number(sweep.regression->slope) << " MHz/G";
    if (sweep.expected_slope) out << " (expected " << format_number(*sweep.expected_slope) << ")";
    out << ", strictly increasing: " << (sweep.splitting_strictly_increasing ? "yes" : "no") << "\n";
  }
  if (kind == SweepKind::power) {
    out << "contrast non-decreasing: " << (sweep.contrast_non_decreasing ? "yes" : "no")
        << ", FWHM non-decreasing: " << (sweep.fwhm_non_decreasing ? "yes" : "no") << "\n";
  }
  return kExitOk;
}

int cmd_sweep_field(const Context& ctx, std::ostream& out) {
  const auto& s = ctx.settings;
  const DriveParameters d = drive(s, s.number("p_rf_dbm"));
  std::vector<SweepPointSpec> pts;
  for (double b : range(s, "field_range_g", "field_step_g")) {
    if (b < 0.0) throw InvalidInput("invalid value for key 'field_range_g': fields must be >= 0");
    pts.push_back({b, field(s, b), d});
  }
  return run_sweep(ctx, out, pts, SweepKind::field);
}

int cmd_sweep_power(const Context& ctx, std::ostream& out) {
  const auto& s = ctx.settings;
  std::vector<double> powers;
  if (s.has("power_range_dbm")) {
    powers = range(s, "power_range_dbm", "power_step_db");
  } else {
    powers = s.list("powers_dbm");
    if (powers.size() < 2)
      throw InvalidInput("invalid value for key 'powers_dbm': sweep needs at least 2 points");
    if (!std::is_sorted(powers.begin(), powers.end()))
      throw InvalidInput("invalid value for key 'powers_dbm': powers must be ascending");
  }
  const FieldVector f = field(s, s.number("field_g"));
  std::vector<SweepPointSpec> pts;
  for (double p : powers) pts.push_back({p, f, drive(s, p)});
  return run_sweep(ctx, out, pts, SweepKind::power);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"RF-over-fiber ODMR simulation, link budgeting and spectral fitting", "rfodmr"};
  app.require_subcommand(1);

  const std::vector<std::string> commands = {"simulate", "fit", "link", "sweep-field",
                                             "sweep-power"};
  const std::map<std::string, std::string> descriptions = {
      {"simulate", "synthesize an ODMR spectrum CSV"},
      {"fit", "fit a spectrum CSV with Lorentzian dips"},
      {"link", "RF-over-fiber link budget and conversion efficiency"},
      {"sweep-field", "field sweep: spectra, fits and splitting regression"},
      {"sweep-power", "drive-power sweep: spectra, fits and trend verdicts"}};

  struct Parsed {
    std::string config;
    std::string preset;
    std::string out;
    std::string in;
    std::uint64_t seed = 1;
    std::map<std::string, std::string> overrides;
  };
  std::map<std::string, Parsed> parsed;
  std::map<std::string, std::map<std::string, CLI::Option*>> key_opts;
  std::map<std::string, CLI::Option*> seed_opts;

  for (const auto& name : commands) {
    auto* sub = app.add_subcommand(name, descriptions.at(name));
    auto& p = parsed[name];
    sub->add_option("--config", p.config, "JSON file of key/value parameters");
    if (name != "fit" && name != "link")
      sub->add_option("--preset", p.preset, "parameter preset: coax-power or rfof-field");
    sub->add_option("--out", p.out,
                    name.starts_with("sweep") ? "output directory" : "output file (default stdout)");
    seed_opts[name] = sub->add_option("--seed", p.seed, "random seed");
    if (name == "fit") sub->add_option("--in,input", p.in, "spectrum CSV to fit");
    for (const auto& key : command_spec(name).keys) {
      if (key == "seed") continue;
      key_opts[name][key] = sub->add_option(dashed(key), p.overrides[key], "override '" + key + "'");
    }
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    for (auto* sub : app.get_subcommands()) out << sub->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return kExitOk;
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const Parsed& p = parsed.at(command);
  try {
    const CommandSpec spec = command_spec(command);
    FlatConfig merged = spec.defaults;
    if (const char* dir = std::getenv(kConfigDirEnv)) {
      const fs::path def = fs::path(dir) / (command + ".json");
      if (fs::exists(def)) merge(merged, read_flat_json(read_text_file(def)), spec, def.string());
    }
    if (!p.preset.empty()) merge(merged, preset(p.preset), spec, "preset '" + p.preset + "'");
    if (!p.config.empty()) {
      const fs::path cfg = resolve_config(p.config);
      merge(merged, read_flat_json(read_text_file(cfg)), spec, cfg.string());
    }
    for (const auto& [key, opt] : key_opts.at(command))
      if (opt->count() > 0) merged[key] = p.overrides.at(key);

    std::uint64_t seed = p.seed;
    if (seed_opts.at(command)->count() == 0 && merged.contains("seed")) {
      const double v = parse_number(merged.at("seed"), "seed");
      if (v < 0 || v != std::floor(v)) throw InvalidInput("invalid value for key 'seed'");
      seed = static_cast<std::uint64_t>(v);
    }
    merged.erase("seed");

    const Context ctx{Settings(std::move(merged)), seed, p.out, p.in};
    if (command == "simulate") return cmd_simulate(ctx, out);
    if (command == "fit") return cmd_fit(ctx, out);
    if (command == "link") return cmd_link(ctx, out);
    if (command == "sweep-field") return cmd_sweep_field(ctx, out);
    return cmd_sweep_power(ctx, out);
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DegenerateFit& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace rfodmr::cli
