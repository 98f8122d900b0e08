#include "microtrap/fields/pseudopotential.hpp"

#include "microtrap/errors.hpp"

namespace microtrap::fields
{
void DriveParams::validate() const
{
    if (!(rf_amplitude > 0.0 && rf_frequency > 0.0 && ion_mass > 0.0 && ion_charge > 0.0))
        throw DomainError("drive parameters must all be positive");
}

double DriveParams::pseudo_coefficient() const
{
    validate();
    return ion_charge * ion_charge /
           (4.0 * ion_mass * rf_frequency * rf_frequency * constants::elementary_charge);
}

double pseudopotential(const DriveParams& drive, const Eigen::Vector3d& e_rf)
{
    return drive.pseudo_coefficient() * e_rf.squaredNorm();
}

RfField::RfField(const TrapField& field, const DriveParams& drive)
    : field_(field), drive_(drive),
      potential_(field.bind(field.rf_voltages(drive.rf_amplitude))),
      coefficient_(drive.pseudo_coefficient())
{
}

Eigen::Vector3d RfField::e_field(const Eigen::Vector3d& p) const
{
    return potential_.e_field(p);
}

double RfField::pseudopotential(const Eigen::Vector3d& p) const
{
    return coefficient_ * e_field(p).squaredNorm();
}

RfSample RfField::sample(const Eigen::Vector3d& p) const
{
    const FieldValue v = potential_.evaluate(p, Derivatives::hessian);
    RfSample s;
    s.e_field = -constants::um_per_m * v.gradient;
    s.jacobian = -constants::um_per_m * v.hessian;
    s.pseudo = coefficient_ * s.e_field.squaredNorm();
    s.gradient = 2.0 * coefficient_ * s.jacobian.transpose() * s.e_field;
    return s;
}

} // namespace microtrap::fields
