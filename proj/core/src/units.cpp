#include "rfodmr/units.hpp"

#include <cmath>

#include "rfodmr/error.hpp"

namespace rfodmr {

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

double mw_to_dbm(double mw) {
  if (!std::isfinite(mw) || mw <= 0.0)
    throw InvalidInput("power in mW must be finite and > 0 to express in dBm");
  return 10.0 * std::log10(mw);
}

}  // namespace rfodmr
