#pragma once

#include "microtrap/mirror.hpp"
#include "microtrap/optics/prescription.hpp"

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace microtrap::optics
{
enum class Provenance
{
    direct,
    reflected
};

struct Ray
{
    Eigen::Vector3d origin = Eigen::Vector3d::Zero();
    Eigen::Vector3d direction = Eigen::Vector3d::UnitY(); // unit
    double weight = 1.0;
    Provenance tag = Provenance::direct;
};

struct RayBundle
{
    std::vector<Ray> rays;
    // Fraction of the full sphere the directions were drawn from; each ray
    // stands for solid_fraction / rays.size() of the emission.
    double solid_fraction = 1.0;
};

struct EmissionCone
{
    Eigen::Vector3d axis = Eigen::Vector3d::UnitY();
    double half_angle = 3.141592653589793; // rad; pi is the full sphere
};

/// Directions uniform over the cone, stratified in cos(theta) with one ray
/// per stratum and a counter-based draw per ray; unit weights.
[[nodiscard]] RayBundle sample_emission(const Eigen::Vector3d& ion, std::size_t n,
                                        std::uint64_t seed, const EmissionCone& cone = {});

/// Mirror in mm from one specified in um.
[[nodiscard]] MirrorSpec mirror_in_mm(const MirrorSpec& um);

/// Rays that meet the concave cap reflect specularly from the hit point with
/// weight times reflectivity and become `reflected`; others are unchanged.
[[nodiscard]] RayBundle reflect_mirror(const RayBundle& bundle, const MirrorSpec& mirror_mm,
                                       double reflectivity);

/// Downward rays reflect off the plane y = height with weight times reflectivity.
[[nodiscard]] RayBundle reflect_plane(const RayBundle& bundle, double height, double reflectivity);

enum class RayStatus
{
    detected,
    vignetted, // outside a clear aperture or stop
    lost       // missed a surface or totally internally reflected
};

struct Hit
{
    Eigen::Vector2d position = Eigen::Vector2d::Zero(); // (x, z) on the detector plane
    Eigen::Vector3d direction = Eigen::Vector3d::Zero();
    double weight = 0.0;
    Provenance tag = Provenance::direct;
    RayStatus status = RayStatus::lost;
};

struct TraceOptions
{
    // Records n1 sin(theta1) - n2 sin(theta2) of every refraction.
    bool check_snell = false;
};

struct TraceResult
{
    std::vector<Hit> hits; // one per input ray, in order
    double max_snell_error = 0.0;
};

/// Sequential exact trace through every surface in order.
[[nodiscard]] TraceResult trace(const OpticalPrescription& p, const RayBundle& bundle,
                                const TraceOptions& opts = {});

} // namespace microtrap::optics
