#pragma once

// NV ground-state spin physics: the spin-1 Hamiltonian, its exact level
// structure, the first-order Zeeman approximation and the four <111>
// orientations of a <100>-cut diamond plate.
//
// Units throughout: frequencies and Hamiltonian entries in MHz, fields in
// gauss, gyromagnetic ratio in MHz/G. Spin basis ordering is
// {|+1>, |0>, |-1>}.

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace rfodmr {

struct NVParameters {
  double zero_field_mhz = 2870.0;  // D
  double strain_mhz = 0.0;         // E
  double gamma_mhz_per_gauss = 2.8;

  /// Throws InvalidInput unless D > 0, E >= 0 and gamma > 0 (all finite).
  void validate() const;
};

/// Magnetic field in gauss. Depending on context it is expressed either in
/// the lab frame (z along the <100> surface normal) or in an NV frame
/// (z along the NV axis).
struct FieldVector {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  [[nodiscard]] double magnitude() const;
  [[nodiscard]] bool is_finite() const;
  [[nodiscard]] Eigen::Vector3d vec() const { return {x, y, z}; }
  static FieldVector from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
  /// Field of the given magnitude along `direction` (need not be normalized).
  static FieldVector along(const Eigen::Vector3d& direction, double magnitude_gauss);
};

/// Field magnitude plus the angle between the field and an NV axis.
struct FieldProjection {
  double magnitude_gauss = 0.0;
  double alpha_rad = 0.0;  // in [0, pi]

  [[nodiscard]] double parallel_gauss() const;
  void validate() const;
};

using SpinMatrix = Eigen::Matrix3cd;

struct SpinMatrices {
  SpinMatrix sx;
  SpinMatrix sy;
  SpinMatrix sz;
};

/// Standard spin-1 operators in the {|+1>, |0>, |-1>} basis.
const SpinMatrices& spin_matrices();

struct SpinHamiltonian {
  SpinMatrix matrix;  // MHz, Hermitian
};

/// Transition pair (|0> to the two upper levels), MHz.
struct TransitionPair {
  double minus_mhz = 0.0;
  double plus_mhz = 0.0;

  [[nodiscard]] double splitting() const { return plus_mhz - minus_mhz; }
  [[nodiscard]] double center() const { return 0.5 * (plus_mhz + minus_mhz); }
};

/// H = D Sz^2 + E (Sx^2 - Sy^2) + gamma (Bx Sx + By Sy + Bz Sz), field in
/// the NV frame.
SpinHamiltonian build_hamiltonian(const NVParameters& params, const FieldVector& nv_field);

/// Eigenvalues of H in ascending order, from a Hermitian eigen-solver.
std::array<double, 3> energy_levels(const SpinHamiltonian& h);

/// Level differences (l1 - l0, l2 - l0) of the exact Hamiltonian.
TransitionPair transition_frequencies_exact(const NVParameters& params,
                                            const FieldVector& nv_field);

/// f(+/-) = D +/- gamma * B * cos(alpha). Ignores strain and transverse field.
TransitionPair transition_frequencies_approx(const NVParameters& params,
                                             const FieldProjection& proj);

/// Unit vectors of the four <111> NV axes in the lab frame of a <100> plate.
using OrientationSet = std::array<Eigen::Vector3d, 4>;
const OrientationSet& nv_axes();

/// Rotates a lab-frame field into the frame of NV axis `axis` (0..3). The NV
/// x axis is the lab z direction projected perpendicular to the NV axis.
FieldVector to_nv_frame(const FieldVector& lab_field, std::size_t axis);

/// Projection of a lab-frame field on each of the four axes. NV axes are
/// unsigned, so each axis is taken with the sign giving cos(alpha) >= 0.
/// A zero field reports alpha = 0.
std::array<FieldProjection, 4> orientation_projections(const FieldVector& lab_field);

struct OrientationGroup {
  FieldProjection projection;
  std::vector<std::size_t> axes;
};

/// Axes grouped by equal cos(alpha) within `cos_tolerance`; groups ordered
/// by descending cos(alpha).
std::vector<OrientationGroup> group_orientations(const FieldVector& lab_field,
                                                 double cos_tolerance = 1e-9);

struct FieldEstimate {
  double zero_field_mhz = 0.0;
  double parallel_gauss = 0.0;  // B cos(alpha)
};

/// Inverts the first-order Zeeman relation for a measured line pair.
FieldEstimate estimate_field_projection(double f_minus_mhz, double f_plus_mhz,
                                        const NVParameters& params);

}  // namespace rfodmr
