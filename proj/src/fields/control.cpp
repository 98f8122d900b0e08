#include "microtrap/fields/control.hpp"

#include "microtrap/errors.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace microtrap::fields
{
namespace
{
// Minimizes 0.5 v'Qv - c'v over the box |v_i| <= bound with the primal
// active-set method: iterates stay feasible, steps toward the optimum over the
// free variables stop at the first blocking bound, and a held variable is
// released when its multiplier has the wrong sign.
Eigen::VectorXd box_quadratic(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c, double bound,
                              const Eigen::VectorXd& start)
{
    const Eigen::Index n = c.size();
    Eigen::VectorXd v = start.cwiseMax(-bound).cwiseMin(bound);
    // 0 free, +1 or -1 held at that bound
    std::vector<int> state(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(v(i)) == bound)
            state[static_cast<std::size_t>(i)] = v(i) > 0.0 ? 1 : -1;
    for (int it = 0; it < 50 * static_cast<int>(n) + 50; ++it)
    {
        std::vector<Eigen::Index> free;
        Eigen::VectorXd target = v;
        for (Eigen::Index i = 0; i < n; ++i)
        {
            const int st = state[static_cast<std::size_t>(i)];
            if (st == 0)
                free.push_back(i);
            else
                target(i) = st * bound;
        }
        if (!free.empty())
        {
            const auto m = static_cast<Eigen::Index>(free.size());
            Eigen::MatrixXd Qf(m, m);
            Eigen::VectorXd cf(m);
            for (Eigen::Index a = 0; a < m; ++a)
                target(free[a]) = 0.0;
            for (Eigen::Index a = 0; a < m; ++a)
            {
                cf(a) = c(free[a]) - Q.row(free[a]).dot(target);
                for (Eigen::Index b = 0; b < m; ++b)
                    Qf(a, b) = Q(free[a], free[b]);
            }
            const Eigen::VectorXd vf = Qf.ldlt().solve(cf);
            for (Eigen::Index a = 0; a < m; ++a)
                target(free[a]) = vf(a);
        }
        double alpha = 1.0;
        Eigen::Index blocking = -1;
        for (const Eigen::Index i : free)
        {
            const double d = target(i) - v(i);
            if (std::abs(target(i)) <= bound || d == 0.0)
                continue;
            const double a = ((d > 0.0 ? bound : -bound) - v(i)) / d;
            if (a < alpha)
            {
                alpha = a;
                blocking = i;
            }
        }
        v += alpha * (target - v);
        if (blocking >= 0)
        {
            v(blocking) = v(blocking) > 0.0 ? bound : -bound;
            state[static_cast<std::size_t>(blocking)] = v(blocking) > 0.0 ? 1 : -1;
            continue;
        }
        const Eigen::VectorXd g = Q * v - c;
        double wrong = 0.0;
        Eigen::Index release = -1;
        for (Eigen::Index i = 0; i < n; ++i)
        {
            const int st = state[static_cast<std::size_t>(i)];
            // Held at +bound needs g <= 0, at -bound needs g >= 0.
            if (st != 0 && st * g(i) > wrong)
            {
                wrong = st * g(i);
                release = i;
            }
        }
        if (release < 0)
            return v;
        state[static_cast<std::size_t>(release)] = 0;
    }
    throw NonConvergenceError("bounded least squares did not settle its active set");
}

} // namespace

ControlSolution solve_control_voltages(const RfField& rf, const NullContour& contour, double z,
                                       const ControlOptions& opts, const Eigen::VectorXd* warm_start)
{
    if (!(opts.bound > 0.0 && opts.axial_frequency > 0.0 && opts.stencil_points > 0 &&
          opts.stencil_step > 0.0 && opts.regularization >= 0.0))
        throw DomainError("control options must be positive");
    const TrapField& field = rf.field();
    std::vector<Eigen::Index> controls;
    for (std::size_t i = 0; i < field.size(); ++i)
        if (field.labels()[i].starts_with(opts.control_prefix))
            controls.push_back(static_cast<Eigen::Index>(i));
    if (controls.empty())
        throw DomainError(fmt::format("no electrodes with prefix '{}'", opts.control_prefix));
    const auto n = static_cast<Eigen::Index>(controls.size());
    const int P = opts.stencil_points;
    const double h = opts.stencil_step;
    const double charge = rf.drive().charge_number();
    // m w^2 in eV/um^2
    const double k = rf.drive().ion_mass * opts.axial_frequency * opts.axial_frequency /
                     (constants::elementary_charge * 1e12);

    const Eigen::Vector3d well = contour.position_at(z);
    Eigen::VectorXd b0;
    Eigen::Matrix3Xd g0;
    field.basis_all(well, &b0, &g0);
    const double psi0 = rf.pseudopotential(well);

    const Eigen::Index rows = 2 * P + 3;
    Eigen::MatrixXd A(rows, n);
    Eigen::VectorXd rhs(rows);
    Eigen::Index r = 0;
    Eigen::VectorXd bj;
    for (int j = -P; j <= P; ++j)
    {
        if (j == 0)
            continue;
        const double dz = j * h;
        const Eigen::Vector3d p = contour.position_at(z + dz);
        field.basis_all(p, &bj, nullptr);
        for (Eigen::Index c = 0; c < n; ++c)
            A(r, c) = charge * (bj(controls[c]) - b0(controls[c]));
        rhs(r) = 0.5 * k * dz * dz - (rf.pseudopotential(p) - psi0);
        ++r;
    }
    const double length = P * h;
    const Eigen::Vector3d psi_grad = rf.sample(well).gradient;
    for (int axis = 0; axis < 3; ++axis)
    {
        const double w = opts.gradient_weight * length;
        for (Eigen::Index c = 0; c < n; ++c)
            A(r, c) = w * charge * g0(axis, controls[c]);
        rhs(r) = -w * psi_grad(axis);
        ++r;
    }

    Eigen::MatrixXd Q = A.transpose() * A;
    const double lambda = opts.regularization * Q.diagonal().mean();
    Q.diagonal().array() += lambda;
    const Eigen::VectorXd c = A.transpose() * rhs;
    Eigen::VectorXd start = Eigen::VectorXd::Zero(n);
    if (warm_start && warm_start->size() == static_cast<Eigen::Index>(field.size()))
        for (Eigen::Index i = 0; i < n; ++i)
            start(i) = (*warm_start)(controls[i]);
    const Eigen::VectorXd v = box_quadratic(Q, c, opts.bound, start);

    ControlSolution out;
    out.voltages = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(field.size()));
    for (Eigen::Index i = 0; i < n; ++i)
        out.voltages(controls[i]) = v(i);
    const Eigen::VectorXd misfit = (A * v - rhs).head(2 * P) / charge;
    out.residual = std::sqrt(misfit.squaredNorm() / static_cast<double>(misfit.size()));

    const EffectivePotential u(rf, out.voltages);
    const SecularModes modes = secular_frequencies(u, well);
    out.axial_frequency = modes.frequencies(axial_mode(modes));
    const double miss = std::abs(out.axial_frequency / opts.axial_frequency - 1.0);
    if (miss > opts.frequency_tolerance)
        throw InfeasibleBoundError(fmt::format(
            "axial frequency {:.4f} MHz at z = {:.2f} um misses the {:.4f} MHz target within "
            "+-{} V",
            angular_to_mhz(out.axial_frequency), z, angular_to_mhz(opts.axial_frequency),
            opts.bound));
    return out;
}

double Waveform::max_abs_voltage() const
{
    double m = 0.0;
    for (const auto& s : steps)
        m = std::max(m, s.cwiseAbs().maxCoeff());
    return m;
}

double Waveform::max_step_delta() const
{
    double m = 0.0;
    for (std::size_t i = 1; i < steps.size(); ++i)
        m = std::max(m, (steps[i] - steps[i - 1]).cwiseAbs().maxCoeff());
    return m;
}

Waveform transport_waveform(const RfField& rf, double z_start, double z_end,
                            const TransportOptions& opts)
{
    if (opts.n_steps < 1 || !(opts.update_rate > 0.0) || !(opts.contour_step > 0.0))
        throw DomainError("transport needs at least one step and a positive update rate");
    const double margin =
        opts.control.stencil_points * opts.control.stencil_step + opts.contour_step;
    const double lo = std::min(z_start, z_end) - margin;
    const double hi = std::max(z_start, z_end) + margin;
    const NullContour contour =
        trace_null_contour(rf, lo, hi, opts.contour_step, opts.null_guess, opts.null);

    Waveform w;
    w.labels = rf.field().labels();
    w.update_rate = opts.update_rate;
    const Eigen::VectorXd* warm = nullptr;
    for (int i = 0; i < opts.n_steps; ++i)
    {
        const double t = opts.n_steps > 1 ? static_cast<double>(i) / (opts.n_steps - 1) : 0.0;
        const double z = z_start + (z_end - z_start) * t;
        const ControlSolution s = solve_control_voltages(rf, contour, z, opts.control, warm);
        w.positions.push_back(contour.position_at(z));
        w.steps.push_back(s.voltages);
        warm = &w.steps.back();
    }
    return w;
}

TrackingReport verify_tracking(const RfField& rf, const Waveform& waveform)
{
    TrackingReport report;
    for (std::size_t i = 0; i < waveform.steps.size(); ++i)
    {
        const EffectivePotential u(rf, waveform.steps[i]);
        const Eigen::Vector3d m = locate_minimum(u, waveform.positions[i]);
        report.errors.push_back((m - waveform.positions[i]).norm());
        report.max_error = std::max(report.max_error, report.errors.back());
    }
    return report;
}

} // namespace microtrap::fields
