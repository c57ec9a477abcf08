#include "rfodmr/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <system_error>

#include <json.hpp>

#include "rfodmr/error.hpp"
#include "rfodmr/units.hpp"

namespace rfodmr {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what(), 0);
  }
}

template <class T>
T get_field(const json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'", 0);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("field '") + key + "' has the wrong type", 0);
  }
}

double get_number_or_nan(const json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'", 0);
  if (j.at(key).is_null()) return std::numeric_limits<double>::quiet_NaN();
  return get_field<double>(j, key);
}

void check_schema(const json& j, std::string_view expected) {
  if (!j.is_object() || !j.contains("schema") || j.at("schema") != expected)
    throw ParseError("document is not a " + std::string(expected) + " object", 0);
}

json regression_to_json(const LinearRegression& r) {
  return {{"slope", r.slope}, {"intercept", r.intercept}, {"residuals", r.residuals}};
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double parse_number(std::string_view text, std::string_view what) {
  const auto t = trim(text);
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* begin = t.data();
  if (!t.empty() && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size() || !std::isfinite(v))
    throw InvalidInput("invalid number for " + std::string(what) + ": '" + std::string(text) + "'");
  return v;
}

std::string spectrum_to_csv(const Spectrum& spectrum) {
  spectrum.validate();
  std::string out;
  for (const auto& [k, v] : spectrum.meta) {
    if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos ||
        v.find('\n') != std::string::npos)
      throw InvalidInput("metadata key/value not representable in CSV: '" + k + "'");
    out += "# " + k + "=" + v + "\n";
  }
  out += kSpectrumHeader;
  out += '\n';
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    out += format_number(spectrum.frequencies_mhz[i]);
    out += ',';
    out += format_number(spectrum.pl_normalized[i]);
    out += '\n';
  }
  return out;
}

Spectrum spectrum_from_csv(std::string_view text) {
  if (trim(text).empty()) throw ParseError("empty file", 0);
  Spectrum s;
  bool header_seen = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;

    if (line.front() == '#') {
      if (header_seen) throw ParseError("metadata line after header", line_no);
      auto body = line.substr(1);
      if (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      const auto eq = body.find('=');
      if (eq == std::string_view::npos || eq == 0)
        throw ParseError("metadata line must be '# key=value'", line_no);
      s.meta[std::string(body.substr(0, eq))] = std::string(body.substr(eq + 1));
      continue;
    }
    if (!header_seen) {
      if (trim(line) != kSpectrumHeader)
        throw ParseError("expected header '" + std::string(kSpectrumHeader) + "'", line_no);
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos)
      throw ParseError("expected two comma-separated values", line_no);
    try {
      s.frequencies_mhz.push_back(parse_number(line.substr(0, comma), "frequency_mhz"));
      s.pl_normalized.push_back(parse_number(line.substr(comma + 1), "pl_normalized"));
    } catch (const InvalidInput& e) {
      throw ParseError(e.what(), line_no);
    }
    if (s.frequencies_mhz.size() > 1 &&
        !(s.frequencies_mhz.back() > s.frequencies_mhz[s.frequencies_mhz.size() - 2]))
      throw ParseError("frequencies must be strictly ascending", line_no);
  }
  if (!header_seen) throw ParseError("missing header '" + std::string(kSpectrumHeader) + "'", 0);
  if (s.frequencies_mhz.empty()) throw ParseError("no data rows", 0);
  if (s.frequencies_mhz.size() < 2) throw ParseError("spectrum requires >= 2 data rows", 0);
  return s;
}

std::string fit_result_to_json(const FitResult& fit) {
  json lines = json::array();
  for (const auto& l : fit.lines) {
    lines.push_back({{"center_mhz", l.shape.center_mhz},
                     {"center_se_mhz", l.center_se},
                     {"fwhm_mhz", l.shape.fwhm_mhz},
                     {"fwhm_se_mhz", l.fwhm_se},
                     {"contrast", l.shape.contrast},
                     {"contrast_se", l.contrast_se}});
  }
  const json j = {{"schema", kFitSchema},
                  {"converged", fit.converged},
                  {"iterations", fit.iterations},
                  {"baseline", fit.baseline},
                  {"baseline_se", fit.baseline_se},
                  {"residual_norm", fit.residual_norm},
                  {"lines", lines}};
  return j.dump(2) + "\n";
}

namespace {

FitResult fit_from_json(const json& j) {
  check_schema(j, kFitSchema);
  FitResult fit;
  fit.converged = get_field<bool>(j, "converged");
  fit.iterations = get_field<int>(j, "iterations");
  fit.baseline = get_field<double>(j, "baseline");
  fit.baseline_se = get_field<double>(j, "baseline_se");
  fit.residual_norm = get_field<double>(j, "residual_norm");
  for (const auto& l : get_field<json>(j, "lines")) {
    FittedLine line;
    line.shape.center_mhz = get_field<double>(l, "center_mhz");
    line.center_se = get_field<double>(l, "center_se_mhz");
    line.shape.fwhm_mhz = get_field<double>(l, "fwhm_mhz");
    line.fwhm_se = get_field<double>(l, "fwhm_se_mhz");
    line.shape.contrast = get_field<double>(l, "contrast");
    line.contrast_se = get_field<double>(l, "contrast_se");
    fit.lines.push_back(line);
  }
  return fit;
}

}  // namespace

FitResult fit_result_from_json(std::string_view text) {
  return fit_from_json(parse_json(text, "fit result"));
}

std::string sweep_result_to_json(const SweepResult& sweep) {
  json points = json::array();
  for (const auto& p : sweep.points) {
    points.push_back({{"control", p.control},
                      {"excluded", p.excluded},
                      {"note", p.note},
                      {"splitting_mhz", p.splitting_mhz ? json(*p.splitting_mhz) : json(nullptr)},
                      {"max_contrast", p.max_contrast},
                      {"max_contrast_se", p.max_contrast_se},
                      {"fwhm_mhz", p.fwhm_mhz},
                      {"fwhm_se_mhz", p.fwhm_se}});
  }
  json j = {{"schema", kSweepSchema},
            {"kind", sweep.kind == SweepKind::field ? "field" : "power"},
            {"points", points},
            {"regression", sweep.regression ? regression_to_json(*sweep.regression) : json(nullptr)},
            {"expected_slope_mhz_per_g",
             sweep.expected_slope ? json(*sweep.expected_slope) : json(nullptr)},
            {"splitting_strictly_increasing", sweep.splitting_strictly_increasing},
            {"contrast_non_decreasing", sweep.contrast_non_decreasing},
            {"fwhm_non_decreasing", sweep.fwhm_non_decreasing}};
  return j.dump(2) + "\n";
}

SweepResult sweep_result_from_json(std::string_view text) {
  const json j = parse_json(text, "sweep result");
  check_schema(j, kSweepSchema);
  SweepResult s;
  const auto kind = get_field<std::string>(j, "kind");
  if (kind == "field") s.kind = SweepKind::field;
  else if (kind == "power") s.kind = SweepKind::power;
  else throw ParseError("unknown sweep kind '" + kind + "'", 0);

  for (const auto& p : get_field<json>(j, "points")) {
    SweepPoint pt;
    pt.control = get_field<double>(p, "control");
    pt.excluded = get_field<bool>(p, "excluded");
    pt.note = get_field<std::string>(p, "note");
    if (!p.contains("splitting_mhz")) throw ParseError("missing field 'splitting_mhz'", 0);
    if (!p.at("splitting_mhz").is_null()) pt.splitting_mhz = get_field<double>(p, "splitting_mhz");
    pt.max_contrast = get_field<double>(p, "max_contrast");
    pt.max_contrast_se = get_field<double>(p, "max_contrast_se");
    pt.fwhm_mhz = get_field<double>(p, "fwhm_mhz");
    pt.fwhm_se = get_field<double>(p, "fwhm_se_mhz");
    s.points.push_back(pt);
  }
  const json& reg = get_field<json>(j, "regression");
  if (!reg.is_null()) {
    LinearRegression r;
    r.slope = get_field<double>(reg, "slope");
    r.intercept = get_field<double>(reg, "intercept");
    r.residuals = get_field<std::vector<double>>(reg, "residuals");
    s.regression = r;
  }
  const double expected = get_number_or_nan(j, "expected_slope_mhz_per_g");
  if (!std::isnan(expected)) s.expected_slope = expected;
  s.splitting_strictly_increasing = get_field<bool>(j, "splitting_strictly_increasing");
  s.contrast_non_decreasing = get_field<bool>(j, "contrast_non_decreasing");
  s.fwhm_non_decreasing = get_field<bool>(j, "fwhm_non_decreasing");
  return s;
}

std::string link_result_to_json(const LinkResult& link) {
  const bool no_power = std::isinf(link.p_rf_ant_dbm) && link.p_rf_ant_dbm < 0.0;
  const json j = {
      {"schema", kLinkSchema},
      {"mode", link.modulation_index ? "forward" : "endpoints"},
      {"p_opt_pd_mw", link.p_opt_pd_mw},
      {"modulation_index", link.modulation_index ? json(*link.modulation_index) : json(nullptr)},
      {"p_rf_ant_dbm", no_power ? json("-inf") : number_or_null(link.p_rf_ant_dbm)},
      {"p_rf_ant_mw", link.p_rf_ant_mw()},
      {"efficiency", link.efficiency},
      {"efficiency_percent", 100.0 * link.efficiency}};
  return j.dump(2) + "\n";
}

LinkResult link_result_from_json(std::string_view text) {
  const json j = parse_json(text, "link result");
  check_schema(j, kLinkSchema);
  LinkResult r;
  r.p_opt_pd_mw = get_field<double>(j, "p_opt_pd_mw");
  const double m = get_number_or_nan(j, "modulation_index");
  if (!std::isnan(m)) r.modulation_index = m;
  if (!j.contains("p_rf_ant_dbm")) throw ParseError("missing field 'p_rf_ant_dbm'", 0);
  const json& p = j.at("p_rf_ant_dbm");
  if (p.is_string()) r.p_rf_ant_dbm = parse_number(p.get<std::string>(), "p_rf_ant_dbm");
  else r.p_rf_ant_dbm = get_field<double>(j, "p_rf_ant_dbm");
  r.efficiency = get_field<double>(j, "efficiency");
  return r;
}

FlatConfig read_flat_json(std::string_view text) {
  const json j = parse_json(text, "config");
  if (!j.is_object()) throw ParseError("config must be a JSON object", 0);
  FlatConfig out;
  for (const auto& [key, value] : j.items()) {
    if (value.is_string()) out[key] = value.get<std::string>();
    else if (value.is_number() || value.is_boolean()) out[key] = value.dump();
    else throw InvalidInput("config key '" + key + "' must hold a scalar value");
  }
  return out;
}

namespace {

// Reads one of key_mw / key_dbm; both present is an error.
std::optional<double> power_mw(const FlatConfig& c, const std::string& stem,
                               std::set<std::string>& used) {
  const auto mw = c.find(stem + "_mw");
  const auto dbm = c.find(stem + "_dbm");
  if (mw != c.end() && dbm != c.end())
    throw InvalidInput("give only one of " + stem + "_mw and " + stem + "_dbm");
  if (mw != c.end()) {
    used.insert(mw->first);
    return parse_number(mw->second, mw->first);
  }
  if (dbm != c.end()) {
    used.insert(dbm->first);
    return dbm_to_mw(parse_number(dbm->second, dbm->first));
  }
  return std::nullopt;
}

bool has_power(const FlatConfig& c, const std::string& stem) {
  return c.contains(stem + "_mw") || c.contains(stem + "_dbm");
}

}  // namespace

LinkInput link_input_from_config(const FlatConfig& config) {
  std::set<std::string> used;
  auto number = [&](const char* key, double& target) {
    if (const auto it = config.find(key); it != config.end()) {
      used.insert(key);
      target = parse_number(it->second, key);
    }
  };

  LinkInput input;
  if (has_power(config, "p_opt_pd") || has_power(config, "p_rf_ant")) {
    std::vector<std::string> missing;
    if (!has_power(config, "p_opt_pd")) missing.push_back("p_opt_pd_mw (or p_opt_pd_dbm)");
    if (!has_power(config, "p_rf_ant")) missing.push_back("p_rf_ant_dbm (or p_rf_ant_mw)");
    if (!missing.empty()) {
      std::string msg = "missing required link keys:";
      for (const auto& m : missing) msg += " " + m;
      throw InvalidInput(msg);
    }
    const double opt = *power_mw(config, "p_opt_pd", used);
    const auto rf_dbm_it = config.find("p_rf_ant_dbm");
    double rf_dbm;
    if (rf_dbm_it != config.end()) {
      if (config.contains("p_rf_ant_mw"))
        throw InvalidInput("give only one of p_rf_ant_mw and p_rf_ant_dbm");
      used.insert(rf_dbm_it->first);
      rf_dbm = parse_number(rf_dbm_it->second, rf_dbm_it->first);
    } else {
      used.insert("p_rf_ant_mw");
      const double mw = parse_number(config.at("p_rf_ant_mw"), "p_rf_ant_mw");
      rf_dbm = mw == 0.0 ? -std::numeric_limits<double>::infinity() : mw_to_dbm(mw);
    }
    if (!(opt > 0.0)) throw InvalidInput("p_opt_pd must be > 0");
    input = EndpointPowers{opt, rf_dbm};
  } else {
    LinkParameters link;
    if (const auto p = power_mw(config, "p_laser", used)) link.p_laser_mw = *p;
    number("insertion_loss", link.insertion_loss);
    number("v_pi_v", link.v_pi);
    number("bias_phase_rad", link.bias_phase_rad);
    number("responsivity_a_per_w", link.responsivity_a_per_w);
    number("load_impedance_ohm", link.load_impedance_ohm);
    number("cable_loss_db", link.cable_loss_db);
    if (config.contains("v_rf_v") && config.contains("modulation_index"))
      throw InvalidInput("give only one of v_rf_v and modulation_index");
    number("v_rf_v", link.v_rf);
    if (const auto it = config.find("modulation_index"); it != config.end()) {
      used.insert(it->first);
      link.v_rf = parse_number(it->second, it->first) * link.v_pi / std::numbers::pi;
    }
    link.validate();
    input = link;
  }

  for (const auto& [key, value] : config)
    if (!used.contains(key)) throw InvalidInput("unknown link key '" + key + "'");
  return input;
}

LinkResult evaluate_link_input(const LinkInput& input) {
  if (const auto* e = std::get_if<EndpointPowers>(&input))
    return link_from_endpoints(e->p_opt_pd_mw, e->p_rf_ant_dbm);
  return evaluate_link(std::get<LinkParameters>(input));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write file '" + path.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw InvalidInput("write failed for '" + path.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw InvalidInput("cannot replace file '" + path.string() + "'");
  }
}

}  // namespace rfodmr
