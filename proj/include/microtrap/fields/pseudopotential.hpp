#pragma once

#include "microtrap/fields/trap_field.hpp"
#include "microtrap/units.hpp"

#include <Eigen/Core>

namespace microtrap::fields
{
struct DriveParams
{
    double rf_amplitude = 200.0;                      // V
    double rf_frequency = mhz_to_angular(62.3);       // rad/s
    double ion_mass = constants::calcium40_ion_mass;  // kg
    double ion_charge = constants::elementary_charge; // C

    void validate() const;
    /// q^2 / (4 m Omega^2), expressed in eV per (V/m)^2.
    [[nodiscard]] double pseudo_coefficient() const;
    /// Ion charge in units of e.
    [[nodiscard]] double charge_number() const
    {
        return ion_charge / constants::elementary_charge;
    }
};

/// q^2 |E|^2 / (4 m Omega^2) in eV for an rf field amplitude in V/m.
[[nodiscard]] double pseudopotential(const DriveParams& drive, const Eigen::Vector3d& e_rf);

struct RfSample
{
    Eigen::Vector3d e_field;   // V/m
    Eigen::Matrix3d jacobian;  // dE_i/dp_j, V/m per um
    double pseudo = 0.0;       // eV
    Eigen::Vector3d gradient;  // eV/um
};

/// rf field of a layout driven at the given amplitude on every rf electrode.
class RfField
{
public:
    RfField(const TrapField& field, const DriveParams& drive);

    [[nodiscard]] const DriveParams& drive() const { return drive_; }
    [[nodiscard]] const TrapField& field() const { return field_; }
    [[nodiscard]] Eigen::Vector3d e_field(const Eigen::Vector3d& p) const;
    [[nodiscard]] double pseudopotential(const Eigen::Vector3d& p) const;
    [[nodiscard]] RfSample sample(const Eigen::Vector3d& p) const;

private:
    TrapField field_;
    DriveParams drive_;
    BoundPotential potential_;
    double coefficient_ = 0.0;
};

} // namespace microtrap::fields
