#pragma once

#include "microtrap/mirror.hpp"

#include <Eigen/Core>

namespace microtrap::analytic
{
// Ring trap: mirror enclosed by a narrow rf ring. Valid for 0 <= rail_angle < pi/6.
struct RingDesign
{
    double ion_height = 0.0; // um
    double rail_angle = 0.0; // rad
};

// Mirror tangent to linear rf rails. Valid for 0 <= rail_angle < pi/4.
struct LinearDesign
{
    double ion_height = 0.0; // um
    double rail_angle = 0.0; // rad
};

struct CollectionMetrics
{
    double half_angle = 0.0;            // rad
    double numerical_aperture = 0.0;
    double geometric_efficiency = 0.0;  // fraction of the full 4 pi sphere
};

/// Inner radius of the rf ring in the gapless-plane approximation:
/// r = h * sqrt(3/4 * sin^-2(pi/6 + theta) - 1).
[[nodiscard]] double ring_rail_inner_radius(const RingDesign& design);

/// Mirror radius tangent to linear rails: r = h * tan(pi/4 - theta).
[[nodiscard]] double linear_rail_radius(const LinearDesign& design);

/// Edge half-angle phi = atan(r/h), NA = sin(phi), efficiency (1 - cos phi)/2.
[[nodiscard]] CollectionMetrics collection_metrics(double radius, double height);

/// Depth of a spherical cap of radius-of-curvature `roc` over aperture radius `r`.
[[nodiscard]] double mirror_sag(double roc, double aperture_radius);

/// NA seen from an on-axis ion: sin(atan(r / (y_ion - y_rim))).
[[nodiscard]] double mirror_na(const MirrorSpec& mirror, const Eigen::Vector3d& ion);

/// Geometric efficiency corresponding to a numerical aperture.
[[nodiscard]] double efficiency_from_na(double numerical_aperture);

} // namespace microtrap::analytic
