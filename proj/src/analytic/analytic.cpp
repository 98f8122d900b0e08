#include "microtrap/analytic.hpp"

#include "microtrap/errors.hpp"
#include "microtrap/units.hpp"

#include <cmath>
#include <fmt/format.h>

namespace microtrap
{
MirrorSpec MirrorSpec::from_rim(double roc, double aperture_radius, double rim_x, double rim_z,
                                double rim_height)
{
    MirrorSpec m;
    m.roc = roc;
    m.aperture_radius = aperture_radius;
    m.sag = analytic::mirror_sag(roc, aperture_radius);
    m.vertex = Eigen::Vector3d(rim_x, rim_height - m.sag, rim_z);
    return m;
}

double MirrorSpec::axial_distance(const Eigen::Vector3d& p) const
{
    return std::hypot(p.x() - vertex.x(), p.z() - vertex.z());
}

void MirrorSpec::validate() const
{
    if (!(roc > 0.0) || !(aperture_radius > 0.0))
        throw DomainError(fmt::format("mirror: roc ({}) and aperture radius ({}) must be positive",
                                      roc, aperture_radius));
    if (aperture_radius > roc)
        throw DomainError(
            fmt::format("mirror: aperture radius {} exceeds roc {}", aperture_radius, roc));
    if (sag < 0.0 || sag > roc)
        throw DomainError(fmt::format("mirror: sag {} outside [0, roc]", sag));
}

} // namespace microtrap

namespace microtrap::analytic
{
using constants::pi;

double ring_rail_inner_radius(const RingDesign& d)
{
    if (!(d.ion_height > 0.0))
        throw DomainError("ring design: ion height must be positive");
    if (!(d.rail_angle >= 0.0 && d.rail_angle <= pi / 6.0))
        throw DomainError(fmt::format("ring design: rail angle {} rad outside [0, pi/6)", d.rail_angle));
    const double s = std::sin(pi / 6.0 + d.rail_angle);
    // Clamp the rounding residue at the pi/6 endpoint, where the bracket vanishes.
    const double bracket = std::max(0.0, 0.75 / (s * s) - 1.0);
    return d.ion_height * std::sqrt(bracket);
}

double linear_rail_radius(const LinearDesign& d)
{
    if (!(d.ion_height > 0.0))
        throw DomainError("linear design: ion height must be positive");
    if (!(d.rail_angle >= 0.0 && d.rail_angle <= pi / 4.0))
        throw DomainError(
            fmt::format("linear design: rail angle {} rad outside [0, pi/4)", d.rail_angle));
    return d.ion_height * std::max(0.0, std::tan(pi / 4.0 - d.rail_angle));
}

CollectionMetrics collection_metrics(double radius, double height)
{
    if (!(height > 0.0))
        throw DomainError("collection metrics: height must be positive");
    if (!(radius >= 0.0))
        throw DomainError("collection metrics: radius must be non-negative");
    CollectionMetrics m;
    m.half_angle = std::atan2(radius, height);
    m.numerical_aperture = std::sin(m.half_angle);
    // (1 - cos)/2 written as sin^2(phi/2) to stay accurate for small angles.
    const double s = std::sin(0.5 * m.half_angle);
    m.geometric_efficiency = s * s;
    return m;
}

double mirror_sag(double roc, double aperture_radius)
{
    if (!(roc > 0.0) || !(aperture_radius >= 0.0))
        throw DomainError("mirror sag: roc must be positive and radius non-negative");
    if (aperture_radius > roc)
        throw DomainError(
            fmt::format("mirror sag: aperture radius {} exceeds roc {}", aperture_radius, roc));
    // roc - sqrt(roc^2 - r^2), rationalised to avoid cancellation.
    return aperture_radius * aperture_radius /
           (roc + std::sqrt((roc - aperture_radius) * (roc + aperture_radius)));
}

double mirror_na(const MirrorSpec& mirror, const Eigen::Vector3d& ion)
{
    mirror.validate();
    const double off_axis = mirror.axial_distance(ion);
    if (off_axis > 1e-9 * std::max(1.0, mirror.roc))
        throw DomainError(fmt::format("mirror NA: ion is {} um off the mirror axis", off_axis));
    const double above_rim = ion.y() - mirror.rim_height();
    if (!(above_rim > 0.0))
        throw DomainError("mirror NA: ion must be above the mirror rim");
    return collection_metrics(mirror.aperture_radius, above_rim).numerical_aperture;
}

double efficiency_from_na(double numerical_aperture)
{
    if (!(numerical_aperture >= 0.0 && numerical_aperture <= 1.0))
        throw DomainError("numerical aperture must lie in [0, 1]");
    return 0.5 * (1.0 - std::sqrt(1.0 - numerical_aperture * numerical_aperture));
}

} // namespace microtrap::analytic
