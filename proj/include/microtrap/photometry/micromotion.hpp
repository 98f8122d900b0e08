#pragma once

#include "microtrap/fields/pseudopotential.hpp"

#include <Eigen/Core>

namespace microtrap::photometry
{
/// Measured sideband ratio at the mirror centre and the modulation index
/// quoted with it. Reference data only.
struct QuotedValue
{
    double value;
    double sigma;
};
inline constexpr QuotedValue reference_sideband_ratio{0.06, 0.02};
inline constexpr QuotedValue reference_modulation_index{0.3, 0.1};

/// J1(beta)^2 / J0(beta)^2, the first-sideband to carrier ratio in the
/// low-saturation limit.
[[nodiscard]] double sideband_ratio(double beta);

/// Inverts sideband_ratio by bisection on [0, first zero of J0). Throws
/// DomainError for R < 0 or R >= 1.
[[nodiscard]] double modulation_index(double ratio);

/// Amplitude (m) of rf-driven motion along the beam: q |E_rf . k| / (m Omega^2).
/// e_rf in V/m is the rf field amplitude at the ion.
[[nodiscard]] double micromotion_projection(const fields::DriveParams& drive,
                                            const Eigen::Vector3d& e_rf,
                                            const Eigen::Vector3d& beam);

/// Beam in the x-z plane at `angle` (rad) to the trap axis.
[[nodiscard]] Eigen::Vector3d beam_direction(double angle);

/// Modulation index of a displacement amplitude (m) for light of the given
/// wavelength (m).
[[nodiscard]] double modulation_index_from_amplitude(double amplitude, double wavelength = 397e-9);

} // namespace microtrap::photometry
