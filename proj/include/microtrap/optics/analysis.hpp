#pragma once

#include "microtrap/optics/raytrace.hpp"

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace microtrap::optics
{
struct SpotOptions
{
    std::size_t rays = 100000;   // per emission bundle
    std::uint64_t seed = 1;
    double reflectivity = 0.85;
    double direct_half_angle = 0.5235987755982988; // rad, direct cone about +y
    double mirror_margin = 0.05;                    // rad beyond the rim as seen from the ion
    bool full_sphere = false;                       // one 4 pi bundle instead of two cones
};

/// Weight fractions are of the full 4 pi emission.
struct SpotReport
{
    double field_height = 0.0;     // mm
    double rms_radius = 0.0;       // reflected rays about the detector centre, mm
    double max_radius = 0.0;       // radius enclosing every reflected ray, mm
    double rms_direct = 0.0;       // direct rays about the detector centre, mm
    double enclosed = 0.0;         // inside the detector
    double outside = 0.0;          // on the detector plane outside the detector
    double vignetted = 0.0;        // stopped, lost, or outside the sampled cones
    double absorbed = 0.0;         // mirror loss
    double reflected_vignetted = 0.0; // fraction of reflected weight that is vignetted

    /// Share of the light reaching the detector plane that misses the detector.
    [[nodiscard]] double crosstalk() const
    {
        const double c = enclosed + outside;
        return c > 0.0 ? outside / c : 0.0;
    }
    [[nodiscard]] double enclosed_fraction() const { return 1.0 - crosstalk(); }
};

/// Emission from `ion` (mm) over the mirror, traced through the relay to a
/// detector of the prescription's first radius centred at `detector`.
[[nodiscard]] SpotReport analyze_spot(const OpticalPrescription& p, const MirrorSpec& mirror_mm,
                                      const Eigen::Vector3d& ion, const Eigen::Vector2d& detector,
                                      const SpotOptions& opts = {});

/// Mirror (ion at its focus) displaced by +h along x and the detector by -h.
[[nodiscard]] std::vector<SpotReport> spot_vs_field_height(const OpticalPrescription& p,
                                                           const MirrorSpec& mirror_mm,
                                                           const std::vector<double>& heights,
                                                           const SpotOptions& opts = {});

[[nodiscard]] double crosstalk_ratio(const OpticalPrescription& p, const MirrorSpec& mirror_mm,
                                     double field_height, const SpotOptions& opts = {});

struct MisalignmentPoint
{
    double field_height = 0.0; // mm
    double axial_offset = 0.0; // ion shift along the trap axis z, um
    double vertical_offset = 0.0; // ion shift along y, um
    SpotReport spot;
};

/// Ion displaced from the focus along z, then along y, with mirror and
/// detector held at their aligned positions.
[[nodiscard]] std::vector<MisalignmentPoint>
misalignment_scan(const OpticalPrescription& p, const MirrorSpec& mirror_mm,
                  const std::vector<double>& field_heights, const std::vector<double>& axial_um,
                  const std::vector<double>& vertical_um, const SpotOptions& opts = {});

struct EfficiencyOptions
{
    double relay_na = 0.14;
    double reflectivity = 0.85;
    std::size_t rays = 1000000;
    std::uint64_t seed = 1;
    double quantum_efficiency = 0.205; // detector QE for the reported count rate factor
};

struct EfficiencyReport
{
    double efficiency = 0.0;     // fraction of 4 pi reaching the relay
    double standard_error = 0.0;
    double direct = 0.0;
    double reflected = 0.0;
    double closed_form = 0.0;    // solid-angle sum, reflected light fully accepted
    double detected = 0.0;       // efficiency times quantum efficiency
};

/// Monte-Carlo collection over the mirror: direct rays within the relay NA
/// plus mirror reflections whose direction falls within it.
[[nodiscard]] EfficiencyReport collection_efficiency(const MirrorSpec& mirror_mm,
                                                     const EfficiencyOptions& opts = {});

/// The same above a reflective plane at y = 0, the ion at `height` mm.
[[nodiscard]] EfficiencyReport planar_collection_efficiency(double height,
                                                            const EfficiencyOptions& opts = {});

} // namespace microtrap::optics
