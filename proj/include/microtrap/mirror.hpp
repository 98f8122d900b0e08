#pragma once

#include <Eigen/Core>

namespace microtrap
{
/// Concave spherical micromirror recessed into the electrode plane.
///
/// Frame: x transverse, y vertical (up, away from the chip), z along the trap
/// axis. The mirror axis is parallel to +y through `vertex`. Lengths in um.
struct MirrorSpec
{
    double roc = 0.0;
    double aperture_radius = 0.0;
    double sag = 0.0;
    Eigen::Vector3d vertex = Eigen::Vector3d::Zero();

    /// Builds a mirror whose rim lies in the plane y = rim_height, centred at
    /// (x, z) = (rim_x, rim_z), with sag derived from roc and aperture.
    static MirrorSpec from_rim(double roc, double aperture_radius, double rim_x = 0.0,
                               double rim_z = 0.0, double rim_height = 0.0);

    [[nodiscard]] double rim_height() const { return vertex.y() + sag; }
    [[nodiscard]] Eigen::Vector3d paraxial_focus() const
    {
        return vertex + Eigen::Vector3d(0.0, 0.5 * roc, 0.0);
    }
    [[nodiscard]] Eigen::Vector3d center_of_curvature() const
    {
        return vertex + Eigen::Vector3d(0.0, roc, 0.0);
    }
    // Radial distance of p from the mirror axis.
    [[nodiscard]] double axial_distance(const Eigen::Vector3d& p) const;

    // Throws DomainError when the fields are inconsistent.
    void validate() const;
};

} // namespace microtrap
