#pragma once

#include "microtrap/optics/analysis.hpp"
#include "microtrap/optics/prescription.hpp"

#include <vector>

namespace microtrap::optics
{
/// Symmetric 1:1 relay: two plano-convex lenses per side, plane faces
/// outward, with an aperture stop midway that sets the object-side NA.
struct RelayDesign
{
    double glass_index = 1.4701;   // fused silica near 397 nm
    double lens_radius = 56.412;   // convex surface radius, mm
    double thickness = 8.0;        // centre thickness, mm
    double lens_gap = 3.0;         // between the two lenses of a side, mm
    double aperture = 25.4;        // clear radius, mm
    double object_distance = 51.0; // trap surface to the first lens, mm
    double separation = 48.0;      // between the two halves, mm
    double detector_shift = 0.5;   // detector beyond object_distance behind the last lens, mm
    double na = 0.14;

    void validate() const;
};

[[nodiscard]] OpticalPrescription build_relay(const RelayDesign& d);

struct RelayFitOptions
{
    std::vector<double> field_heights{0.0, 4.0, 8.0}; // mm
    SpotOptions spot{.rays = 4000};
    int max_evaluations = 200;
};

struct RelayFit
{
    RelayDesign design;
    double rms = 0.0; // mean direct-light RMS radius over the field heights, mm
    int evaluations = 0;
};

/// Nelder-Mead over lens radius, object distance and detector shift,
/// minimizing the mean RMS radius of the directly imaged ion about the
/// detector centre; the mirror beam footprint is set by the mirror aperture,
/// so the direct image carries the relay's aberrations. Designs that vignette
/// mirror light are rejected.
[[nodiscard]] RelayFit optimize_relay(const RelayDesign& start, const MirrorSpec& mirror_mm,
                                      const RelayFitOptions& opts = {});

} // namespace microtrap::optics
