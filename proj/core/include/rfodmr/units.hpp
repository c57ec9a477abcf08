#pragma once

namespace rfodmr {

/// P[mW] = 10^(P[dBm] / 10).
double dbm_to_mw(double dbm);

/// Inverse of dbm_to_mw. Throws InvalidInput for non-positive or non-finite mW.
double mw_to_dbm(double mw);

}  // namespace rfodmr
