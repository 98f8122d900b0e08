#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace microtrap::optics
{
// Optics work in mm. The optical axis is +y, normal to the trap surface, with
// the trap surface at y = 0; transverse coordinates are (x, z).

enum class SurfaceKind
{
    spherical_mirror,
    spherical_refractor,
    plane_refractor,
    aperture_stop,
    detector_plane
};

struct OpticalSurface
{
    SurfaceKind kind = SurfaceKind::plane_refractor;
    double radius = 0.0;       // signed; centre of curvature at position + radius; 0 is flat
    double aperture = 25.4;    // clear radius
    double position = 0.0;     // vertex height on the axis
    double index_after = 1.0;  // refractors only
};

struct Detector
{
    Eigen::Vector2d center = Eigen::Vector2d::Zero(); // (x, z) in the detector plane
    double radius = 0.25;
};

struct OpticalPrescription
{
    std::vector<OpticalSurface> surfaces;   // in propagation order
    Eigen::Vector3d object = Eigen::Vector3d::Zero();
    std::vector<Detector> detectors{Detector{}};

    /// Throws DomainError unless apertures are positive, positions advance
    /// along the propagation direction (reversed by each mirror), and the
    /// last surface is the only detector plane.
    void validate() const;
    [[nodiscard]] const OpticalSurface& detector_plane() const { return surfaces.back(); }
};

[[nodiscard]] std::string to_string(SurfaceKind k);
[[nodiscard]] SurfaceKind surface_kind_from_string(const std::string& s);

/// JSON with `object_distance` to the first surface and per-surface
/// {kind, radius, aperture, thickness, index}; thickness is the gap to the
/// next surface.
[[nodiscard]] nlohmann::json prescription_to_json(const OpticalPrescription& p);
[[nodiscard]] OpticalPrescription prescription_from_json(const nlohmann::json& j);
[[nodiscard]] OpticalPrescription load_prescription(const std::filesystem::path& path);
void save_prescription(const OpticalPrescription& p, const std::filesystem::path& path);

/// Paraxial (height, angle) transfer matrix from the plane y = from to the
/// detector plane, unfolded at mirrors.
[[nodiscard]] Eigen::Matrix2d paraxial_matrix(const OpticalPrescription& p, double from = 0.0);

} // namespace microtrap::optics
