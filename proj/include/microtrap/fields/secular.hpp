#pragma once

#include "microtrap/fields/pseudopotential.hpp"

#include <Eigen/Core>

namespace microtrap::fields
{
/// Pseudopotential plus the ion's energy in the dc potential, both in eV.
class EffectivePotential
{
public:
    /// `dc_voltages` covers every label of the field; rf labels normally carry 0.
    EffectivePotential(const RfField& rf, const Eigen::VectorXd& dc_voltages);

    [[nodiscard]] const RfField& rf() const { return rf_; }
    [[nodiscard]] const BoundPotential& dc() const { return dc_; }

    [[nodiscard]] double value(const Eigen::Vector3d& p) const;       // eV
    [[nodiscard]] Eigen::Vector3d gradient(const Eigen::Vector3d& p) const; // eV/um
    /// Pseudopotential part by central differences of its analytic gradient,
    /// dc part analytic. eV/um^2, symmetrized.
    [[nodiscard]] Eigen::Matrix3d hessian(const Eigen::Vector3d& p, double step = 1e-2) const;

private:
    RfField rf_;
    BoundPotential dc_;
    double charge_number_ = 1.0;
};

struct SecularModes
{
    Eigen::Vector3d frequencies; // rad/s, ascending
    Eigen::Matrix3d modes;       // unit eigenvectors as columns
};

/// Frequencies sqrt(lambda / m) from a Hessian of the ion's energy in eV/um^2.
/// Throws SaddlePointError for a negative eigenvalue.
[[nodiscard]] SecularModes secular_from_hessian(const Eigen::Matrix3d& hessian, double ion_mass);

[[nodiscard]] SecularModes secular_frequencies(const EffectivePotential& u,
                                               const Eigen::Vector3d& well_center);

/// Index of the mode whose eigenvector is most closely aligned with z.
[[nodiscard]] int axial_mode(const SecularModes& modes);

struct MinimumOptions
{
    double tolerance = 1e-9; // gradient norm, eV/um
    int max_iterations = 100;
    double max_step = 2.0;   // um per Newton step
};

/// Newton iteration on the effective potential. Throws NoMinimumError when it
/// does not converge and SaddlePointError when it converges to a saddle.
[[nodiscard]] Eigen::Vector3d locate_minimum(const EffectivePotential& u,
                                             const Eigen::Vector3d& guess,
                                             const MinimumOptions& opts = {});

} // namespace microtrap::fields
