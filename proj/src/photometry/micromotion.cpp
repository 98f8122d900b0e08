#include "microtrap/photometry/micromotion.hpp"

#include "microtrap/errors.hpp"
#include "microtrap/units.hpp"

#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>
#include <fmt/format.h>

namespace microtrap::photometry
{
namespace
{
constexpr double j0_first_zero = 2.404825557695772768622;
}

double sideband_ratio(double beta)
{
    const double j0 = std::cyl_bessel_j(0.0, beta);
    const double j1 = std::cyl_bessel_j(1.0, beta);
    return j1 * j1 / (j0 * j0);
}

double modulation_index(double ratio)
{
    if (!(ratio >= 0.0) || !(ratio < 1.0))
        throw DomainError(fmt::format("sideband ratio {} outside [0, 1)", ratio));
    if (ratio == 0.0)
        return 0.0;
    const auto [lo, hi] = boost::math::tools::bisect(
        [ratio](double beta) { return sideband_ratio(beta) - ratio; }, 0.0, j0_first_zero,
        boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits));
    return 0.5 * (lo + hi);
}

double micromotion_projection(const fields::DriveParams& drive, const Eigen::Vector3d& e_rf,
                              const Eigen::Vector3d& beam)
{
    const double norm = beam.norm();
    if (!(norm > 0.0))
        throw DomainError("beam direction must be nonzero");
    const double omega = drive.rf_frequency;
    return drive.ion_charge * std::abs(e_rf.dot(beam) / norm) / (drive.ion_mass * omega * omega);
}

Eigen::Vector3d beam_direction(double angle)
{
    return {std::sin(angle), 0.0, std::cos(angle)};
}

double modulation_index_from_amplitude(double amplitude, double wavelength)
{
    if (!(wavelength > 0.0))
        throw DomainError("wavelength must be positive");
    return 2.0 * constants::pi * amplitude / wavelength;
}

} // namespace microtrap::photometry
