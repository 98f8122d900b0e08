#include "microtrap/fields/secular.hpp"

#include "microtrap/errors.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fmt/format.h>

namespace microtrap::fields
{
EffectivePotential::EffectivePotential(const RfField& rf, const Eigen::VectorXd& dc_voltages)
    : rf_(rf), dc_(rf.field().bind(dc_voltages)), charge_number_(rf.drive().charge_number())
{
}

double EffectivePotential::value(const Eigen::Vector3d& p) const
{
    return rf_.pseudopotential(p) + charge_number_ * dc_.potential(p);
}

Eigen::Vector3d EffectivePotential::gradient(const Eigen::Vector3d& p) const
{
    return rf_.sample(p).gradient +
           charge_number_ * dc_.evaluate(p, Derivatives::gradient).gradient;
}

Eigen::Matrix3d EffectivePotential::hessian(const Eigen::Vector3d& p, double step) const
{
    Eigen::Matrix3d h;
    for (int k = 0; k < 3; ++k)
    {
        Eigen::Vector3d d = Eigen::Vector3d::Zero();
        d(k) = step;
        h.col(k) = (rf_.sample(p + d).gradient - rf_.sample(p - d).gradient) / (2.0 * step);
    }
    h = 0.5 * (h + h.transpose()).eval();
    return h + charge_number_ * dc_.evaluate(p, Derivatives::hessian).hessian;
}

SecularModes secular_from_hessian(const Eigen::Matrix3d& hessian, double ion_mass)
{
    if (!(ion_mass > 0.0))
        throw DomainError("ion mass must be positive");
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(0.5 * (hessian + hessian.transpose()));
    const Eigen::Vector3d lambda = es.eigenvalues();
    const double scale = lambda.cwiseAbs().maxCoeff();
    if (lambda(0) < -1e-9 * scale)
        throw SaddlePointError(
            fmt::format("effective potential is not a minimum: curvature {:.4g} eV/um^2", lambda(0)));
    // eV/um^2 -> J/m^2
    const double to_si = constants::elementary_charge * 1e12;
    SecularModes out;
    for (int i = 0; i < 3; ++i)
        out.frequencies(i) = std::sqrt(std::max(lambda(i), 0.0) * to_si / ion_mass);
    out.modes = es.eigenvectors();
    return out;
}

SecularModes secular_frequencies(const EffectivePotential& u, const Eigen::Vector3d& well_center)
{
    return secular_from_hessian(u.hessian(well_center), u.rf().drive().ion_mass);
}

int axial_mode(const SecularModes& modes)
{
    int best = 0;
    for (int i = 1; i < 3; ++i)
        if (std::abs(modes.modes(2, i)) > std::abs(modes.modes(2, best)))
            best = i;
    return best;
}

Eigen::Vector3d locate_minimum(const EffectivePotential& u, const Eigen::Vector3d& guess,
                               const MinimumOptions& opts)
{
    Eigen::Vector3d p = guess;
    for (int it = 0; it < opts.max_iterations; ++it)
    {
        const Eigen::Vector3d g = u.gradient(p);
        if (g.norm() < opts.tolerance)
        {
            const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(u.hessian(p));
            if (es.eigenvalues()(0) <= 0.0)
                throw SaddlePointError(fmt::format(
                    "stationary point at ({:.3f}, {:.3f}, {:.3f}) um is not a minimum", p.x(),
                    p.y(), p.z()));
            return p;
        }
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(u.hessian(p));
        // Newton step in the eigenbasis with curvatures floored positive.
        const Eigen::Vector3d lam = es.eigenvalues().cwiseAbs().cwiseMax(1e-12);
        Eigen::Vector3d step =
            -es.eigenvectors() * (es.eigenvectors().transpose() * g).cwiseQuotient(lam);
        if (step.norm() > opts.max_step)
            step *= opts.max_step / step.norm();
        p += step;
    }
    throw NoMinimumError(fmt::format("no effective-potential minimum near ({:.3f}, {:.3f}, {:.3f}) um",
                                     guess.x(), guess.y(), guess.z()));
}

} // namespace microtrap::fields
