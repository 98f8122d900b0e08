#pragma once

#include "microtrap/mirror.hpp"
#include "microtrap/spline.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>
#include <vector>

namespace microtrap::fields
{
struct TrapLayout;

/// Transverse offset of the inner rf edge at axial distance s from the wrap centre.
struct EdgePoint
{
    double s = 0.0;      // um, 0 <= s < span
    double offset = 0.0; // um, positive widens the gap

    bool operator==(const EdgePoint&) const = default;
};

/// Parametric wrapped-rail trap: two rf rails of constant width whose inner
/// edges wrap around a mirror recessed into the central dc electrode, with
/// segmented dc control electrodes outside the rails.
///
/// Inner edge of the +x rail, symmetric in z:
///   |z| <= z_w:         e = sqrt(R^2 - z^2), an arc about the mirror axis with
///                       z_w = R sin(wrap_angle)
///   z_w < |z| < z_w+T:  cubic Hermite taper from the arc end (matching value and
///                       slope) to the linear half-gap a with zero slope
///   beyond:             e = a
/// plus delta(z), a clamped spline through the mirrored edge points that
/// vanishes for |z| >= span.
struct RailDesign
{
    double linear_half_gap = 57.0; // a
    double wrap_half_gap = 70.0;   // R, radius of the wrap arc
    double wrap_angle = 0.7522369076095561; // rad (43.1 deg), arc half-angle seen from the mirror axis
    double taper_length = 60.0;    // T
    double rail_width = 17.0;
    double rail_extent = 3000.0; // rails and centre electrode span |z| <= extent
    double mirror_roc = 150.0;
    double mirror_aperture = 60.0;
    double keepout_margin = 10.0; // shelf plus isolation gap around the aperture
    double edge_span = 600.0;     // perturbations vanish beyond this |z|
    // Default points pin the wrap and trim the far-field overshoot of the null.
    std::vector<EdgePoint> edge_points{{0.0, 0.0}, {100.0, 0.0}, {200.0, -0.25}, {350.0, -0.1}};

    int dc_per_side = 21;
    double dc_pitch = 80.0;
    double dc_outer_x = 1000.0;

    double fine_step = 1.0;    // edge sampling over the wrap and taper
    double spline_step = 10.0; // sampling where only the perturbation varies
    double coarse_step = 50.0; // sampling along the straight sections

    void validate() const;
};

struct RailEdges
{
    std::vector<Eigen::Vector2d> inner; // (x, z) of the +x rail, z ascending
    std::vector<Eigen::Vector2d> outer;
};

/// delta(z): clamped spline through the points mirrored about z = 0, zero
/// with zero slope at |z| = span. Empty for no points.
[[nodiscard]] ClampedSpline edge_perturbation(const std::vector<EdgePoint>& points, double span);

/// Inner edge offset e(z) and its derivative, including the perturbation.
[[nodiscard]] double inner_edge(const RailDesign& d, double z, double* slope = nullptr);

/// Sampled edges of the +x rail. Throws SelfIntersectionError when the
/// outer edge folds back (z not strictly increasing).
[[nodiscard]] RailEdges rail_edges(const RailDesign& d);

/// Largest |distance(outer vertex, inner polyline) - width| over the rail.
[[nodiscard]] double width_deviation(const RailEdges& edges, double width);

/// Polygons for rf rails ("rf"), centre electrode ("center", mirror host),
/// dc01..dc42 and the implicit "gnd" fill.
[[nodiscard]] TrapLayout build_layout(const RailDesign& d);

void to_json(nlohmann::json& j, const RailDesign& d);
void from_json(const nlohmann::json& j, RailDesign& d);

} // namespace microtrap::fields
