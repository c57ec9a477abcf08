#include "rfodmr/link.hpp"

#include <cmath>
#include <limits>

#include "rfodmr/error.hpp"
#include "rfodmr/units.hpp"

namespace rfodmr {

namespace {

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

double bessel_j(int k, double m) { return std::cyl_bessel_j(static_cast<double>(k), m); }

}  // namespace

void LinkParameters::validate() const {
  if (!positive(p_laser_mw)) throw InvalidInput("p_laser_mw must be > 0");
  if (!positive(insertion_loss) || insertion_loss > 1.0)
    throw InvalidInput("insertion_loss must lie in (0, 1]");
  if (!positive(v_pi)) throw InvalidInput("v_pi must be > 0");
  if (!std::isfinite(bias_phase_rad)) throw InvalidInput("bias_phase_rad must be finite");
  if (!std::isfinite(v_rf) || v_rf < 0.0) throw InvalidInput("v_rf must be >= 0");
  if (!positive(responsivity_a_per_w)) throw InvalidInput("responsivity must be > 0");
  if (!positive(load_impedance_ohm)) throw InvalidInput("load_impedance must be > 0");
  if (!std::isfinite(cable_loss_db) || cable_loss_db < 0.0)
    throw InvalidInput("cable_loss_db must be >= 0");
}

double LinkResult::p_rf_ant_mw() const {
  return std::isinf(p_rf_ant_dbm) && p_rf_ant_dbm < 0.0 ? 0.0 : dbm_to_mw(p_rf_ant_dbm);
}

// P(t) = P0/2 [1 + cos(bias + m sin wt)]
//      = P0/2 [1 + cos(bias) (J0 + 2 sum J2k cos 2kwt) - sin(bias) 2 sum J(2k+1) sin((2k+1)wt)]
double mzm_harmonic_amplitude_mw(const LinkParameters& link, int k) {
  link.validate();
  if (k < 0) throw InvalidInput("harmonic order must be >= 0");
  const double p0 = link.p_laser_mw * link.insertion_loss;
  const double m = link.modulation_index();
  if (k == 0) return 0.5 * p0 * (1.0 + std::cos(link.bias_phase_rad) * bessel_j(0, m));
  const double trig = (k % 2 == 0) ? std::cos(link.bias_phase_rad) : std::sin(link.bias_phase_rad);
  return p0 * std::abs(trig * bessel_j(k, m));
}

ModulatorOutput mzm_average_and_fundamental(const LinkParameters& link) {
  ModulatorOutput out;
  out.p_avg_mw = mzm_harmonic_amplitude_mw(link, 0);
  out.fundamental_fraction =
      out.p_avg_mw > 0.0 ? mzm_harmonic_amplitude_mw(link, 1) / out.p_avg_mw : 0.0;
  return out;
}

double recovered_rf_power_dbm(const LinkParameters& link) {
  const auto mzm = mzm_average_and_fundamental(link);
  const double i1_a = link.responsivity_a_per_w * mzm.p_avg_mw * 1e-3 * mzm.fundamental_fraction;
  const double p_w = 0.5 * i1_a * i1_a * link.load_impedance_ohm;
  if (p_w <= 0.0) return -std::numeric_limits<double>::infinity();
  return mw_to_dbm(p_w * 1e3) - link.cable_loss_db;
}

double efficiency(double p_rf_ant_dbm, double p_opt_pd_mw) {
  if (!positive(p_opt_pd_mw)) throw InvalidInput("p_opt_pd_mw must be > 0");
  if (std::isnan(p_rf_ant_dbm) || p_rf_ant_dbm == std::numeric_limits<double>::infinity())
    throw InvalidInput("p_rf_ant_dbm must be finite or -inf");
  if (std::isinf(p_rf_ant_dbm)) return 0.0;
  return dbm_to_mw(p_rf_ant_dbm) / p_opt_pd_mw;
}

LinkResult evaluate_link(const LinkParameters& link) {
  LinkResult r;
  r.p_opt_pd_mw = mzm_average_and_fundamental(link).p_avg_mw;
  r.modulation_index = link.modulation_index();
  r.p_rf_ant_dbm = recovered_rf_power_dbm(link);
  r.efficiency = r.p_opt_pd_mw > 0.0 ? efficiency(r.p_rf_ant_dbm, r.p_opt_pd_mw) : 0.0;
  return r;
}

LinkResult link_from_endpoints(double p_opt_pd_mw, double p_rf_ant_dbm) {
  LinkResult r;
  r.p_opt_pd_mw = p_opt_pd_mw;
  r.p_rf_ant_dbm = p_rf_ant_dbm;
  r.efficiency = efficiency(p_rf_ant_dbm, p_opt_pd_mw);
  return r;
}

}  // namespace rfodmr
