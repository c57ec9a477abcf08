#pragma once

// File formats.
//
// Spectrum CSV:
//   # key=value            (zero or more metadata lines)
//   frequency_mhz,pl_normalized
//   <f>,<pl>               (one or more rows)
//
// FitResult, SweepResult and LinkResult are JSON objects carrying a
// "schema" tag; see README.md for the field list. Numbers are written in
// shortest round-trip form so every document re-parses losslessly.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rfodmr/fit.hpp"
#include "rfodmr/link.hpp"
#include "rfodmr/spectrum.hpp"

namespace rfodmr {

inline constexpr std::string_view kSpectrumHeader = "frequency_mhz,pl_normalized";
inline constexpr std::string_view kFitSchema = "rfodmr.fit_result/1";
inline constexpr std::string_view kSweepSchema = "rfodmr.sweep_result/1";
inline constexpr std::string_view kLinkSchema = "rfodmr.link_result/1";

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

/// Strict full-string parse; throws InvalidInput naming `what` on failure.
double parse_number(std::string_view text, std::string_view what = "value");

std::string spectrum_to_csv(const Spectrum& spectrum);
/// Throws ParseError with the offending line number.
Spectrum spectrum_from_csv(std::string_view text);

std::string fit_result_to_json(const FitResult& fit);
FitResult fit_result_from_json(std::string_view text);

std::string sweep_result_to_json(const SweepResult& sweep);
SweepResult sweep_result_from_json(std::string_view text);

std::string link_result_to_json(const LinkResult& link);
LinkResult link_result_from_json(std::string_view text);

using FlatConfig = std::map<std::string, std::string>;

/// A JSON object whose values are scalars (number, string, bool). Numbers
/// keep their textual form; nested values are rejected.
FlatConfig read_flat_json(std::string_view text);

struct EndpointPowers {
  double p_opt_pd_mw = 0.0;
  double p_rf_ant_dbm = 0.0;
};

using LinkInput = std::variant<EndpointPowers, LinkParameters>;

/// Interprets link keys. Any p_opt_pd_* or p_rf_ant_* key selects end-point
/// mode, which requires both powers; otherwise the forward model is used with
/// defaults for absent keys. Powers accept _mw or _dbm suffixes. Unknown keys,
/// duplicate units and missing end-point keys throw InvalidInput naming them.
LinkInput link_input_from_config(const FlatConfig& config);

LinkResult evaluate_link_input(const LinkInput& input);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary sibling file and renames it into place.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace rfodmr
