#pragma once

// RF-over-fiber delivery chain: Mach-Zehnder intensity modulator, optical
// losses, photodiode recovery into a resistive load, and the optical-to-RF
// conversion efficiency at the antenna feedpoint.
//
// Optical powers are in mW, RF powers in dBm unless a name says otherwise.

#include <numbers>
#include <optional>

namespace rfodmr {

/// Representative defaults: 47 mW average optical power at the photodiode at
/// quadrature bias and modulation index 0.2. None of these internal values is
/// a measured quantity.
struct LinkParameters {
  double p_laser_mw = 100.0;
  double insertion_loss = 0.94;  // optical transmission factor in (0, 1]
  double v_pi = 5.0;             // V
  double bias_phase_rad = -std::numbers::pi / 2.0;
  double v_rf = 1.0 / std::numbers::pi;  // V peak
  double responsivity_a_per_w = 0.9;
  double load_impedance_ohm = 50.0;
  double cable_loss_db = 0.0;  // photodiode to antenna, >= 0 dB

  void validate() const;
  [[nodiscard]] double modulation_index() const { return std::numbers::pi * v_rf / v_pi; }
};

struct ModulatorOutput {
  double p_avg_mw = 0.0;              // average optical power at the photodiode
  double fundamental_fraction = 0.0;  // fundamental optical amplitude / p_avg
};

struct LinkResult {
  double p_opt_pd_mw = 0.0;
  std::optional<double> modulation_index;  // absent for end-point results
  double p_rf_ant_dbm = 0.0;  // -inf when no RF power is recovered
  double efficiency = 0.0;

  [[nodiscard]] double p_rf_ant_mw() const;
};

/// Raised-cosine transfer T(V) = (1 + cos(pi V / v_pi + bias)) / 2 under a
/// sinusoidal drive, expanded with Jacobi-Anger. At quadrature
/// p_avg = p_laser * loss / 2 and the fundamental fraction is 2 J1(m).
ModulatorOutput mzm_average_and_fundamental(const LinkParameters& link);

/// Optical amplitude (mW) of the k-th harmonic of the modulated intensity;
/// k = 0 gives the average power.
double mzm_harmonic_amplitude_mw(const LinkParameters& link, int k);

/// Fundamental RF power delivered to the antenna: I1 = R p_avg f1,
/// P = I1^2 R_L / 2, less cable loss.
double recovered_rf_power_dbm(const LinkParameters& link);

/// eta = P_RF,ant[mW] / P_opt,PD[mW]. A -inf dBm RF power gives 0.
double efficiency(double p_rf_ant_dbm, double p_opt_pd_mw);

/// Full forward model.
LinkResult evaluate_link(const LinkParameters& link);

/// Efficiency from measured end points only.
LinkResult link_from_endpoints(double p_opt_pd_mw, double p_rf_ant_dbm);

}  // namespace rfodmr
