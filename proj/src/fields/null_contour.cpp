#include "microtrap/fields/null_contour.hpp"

#include "microtrap/errors.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace microtrap::fields
{
namespace
{
struct Attempt
{
    bool converged = false;
    NullPoint point;
};

Attempt levenberg_marquardt(const RfField& rf, double z, Eigen::Vector2d xy, const NullOptions& opts)
{
    Attempt out;
    double lambda = 1e-3;
    RfSample s = rf.sample({xy.x(), xy.y(), z});
    for (int it = 0; it < opts.max_iterations; ++it)
    {
        const Eigen::Vector2d g = s.gradient.head<2>();
        out.point = {z, xy.x(), xy.y(), s.pseudo, g.norm(), it};
        if (g.norm() < opts.tolerance)
        {
            out.converged = true;
            return out;
        }
        const Eigen::Matrix<double, 3, 2> J = s.jacobian.leftCols<2>();
        const Eigen::Matrix2d JtJ = J.transpose() * J;
        const Eigen::Vector2d Jtr = J.transpose() * s.e_field;
        bool accepted = false;
        for (int tries = 0; tries < 30 && !accepted; ++tries)
        {
            Eigen::Matrix2d A = JtJ;
            A.diagonal() *= 1.0 + lambda;
            const Eigen::Vector2d step = A.ldlt().solve(-Jtr);
            Eigen::Vector2d next = xy + step;
            next.y() = std::max(next.y(), opts.min_height);
            const RfSample trial = rf.sample({next.x(), next.y(), z});
            // Near convergence the objective stalls at rounding level; accept
            // steps that still reduce the gradient there.
            const bool lower = trial.pseudo < s.pseudo;
            const bool flat = trial.pseudo <= s.pseudo * (1.0 + 1e-12) &&
                              trial.gradient.head<2>().norm() < g.norm();
            if (lower || flat)
            {
                xy = next;
                s = trial;
                lambda = std::max(lambda / 4.0, 1e-12);
                accepted = true;
            }
            else
            {
                lambda *= 8.0;
            }
        }
        if (!accepted)
            break;
    }
    const Eigen::Vector2d g = s.gradient.head<2>();
    out.point = {z, xy.x(), xy.y(), s.pseudo, g.norm(), opts.max_iterations};
    out.converged = g.norm() < opts.tolerance;
    return out;
}

Eigen::Vector2d grid_search(const RfField& rf, double z, const Eigen::Vector2d& guess,
                            const NullOptions& opts)
{
    double best = std::numeric_limits<double>::infinity();
    Eigen::Vector2d arg = guess;
    const double y0 = std::max(opts.min_height, guess.y() - opts.search_depth);
    for (double x = guess.x() - opts.search_half_width; x <= guess.x() + opts.search_half_width;
         x += opts.search_step)
    {
        for (double y = y0; y <= guess.y() + opts.search_depth; y += opts.search_step)
        {
            const double u = rf.pseudopotential({x, y, z});
            if (u < best)
            {
                best = u;
                arg = {x, y};
            }
        }
    }
    return arg;
}

} // namespace

NullPoint find_rf_null(const RfField& rf, double z, const Eigen::Vector2d& guess,
                       const NullOptions& opts)
{
    Attempt a = levenberg_marquardt(rf, z, guess, opts);
    if (a.converged)
        return a.point;
    a = levenberg_marquardt(rf, z, grid_search(rf, z, guess, opts), opts);
    if (a.converged)
        return a.point;
    throw NoMinimumError(fmt::format(
        "no pseudopotential minimum found at z = {} um (last gradient {:.3g} eV/um at x = {:.3f}, "
        "y = {:.3f})",
        z, a.point.gradient_norm, a.point.x, a.point.y));
}

Eigen::Vector3d NullContour::position_at(double z) const
{
    if (samples.empty())
        throw DomainError("empty null contour");
    const auto it = std::lower_bound(samples.begin(), samples.end(), z,
                                     [](const NullSample& s, double zz) { return s.z < zz; });
    if (it == samples.begin() || it == samples.end())
    {
        const NullSample& s = it == samples.begin() ? samples.front() : samples.back();
        if (std::abs(s.z - z) > 1e-9)
            throw DomainError(fmt::format("z = {} um outside the traced contour", z));
        return {s.x, s.y, s.z};
    }
    const NullSample& b = *it;
    const NullSample& a = *(it - 1);
    const double t = (z - a.z) / (b.z - a.z);
    return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), z};
}

NullContour trace_null_contour(const RfField& rf, double z_begin, double z_end, double step,
                               const Eigen::Vector2d& guess, const NullOptions& opts,
                               double max_jump)
{
    if (!(step > 0.0))
        throw DomainError("contour step must be positive");
    const double span = std::abs(z_end - z_begin);
    const double dir = z_end >= z_begin ? 1.0 : -1.0;
    const auto n = static_cast<int>(std::floor(span / step + 1e-9));
    std::vector<double> zs;
    for (int i = 0; i <= n; ++i)
        zs.push_back(z_begin + dir * step * i);
    if (span - n * step > 1e-9 * step)
        zs.push_back(z_end);

    const double plane = rf.field().layout().electrodes.front().polygon.layer();
    NullContour contour;
    Eigen::Vector2d warm = guess;
    for (std::size_t i = 0; i < zs.size(); ++i)
    {
        const double z = zs[i];
        NullPoint p;
        try
        {
            p = find_rf_null(rf, z, warm, opts);
        }
        catch (const NoMinimumError& e)
        {
            throw ContinuationBreakError(
                fmt::format("null contour lost at z = {} um: {}", z, e.what()));
        }
        const double jump = (Eigen::Vector2d(p.x, p.y) - warm).norm();
        if (i > 0 && jump > max_jump)
            throw ContinuationBreakError(fmt::format(
                "null contour jumped {:.3f} um at z = {} um (limit {} um)", jump, z, max_jump));
        warm = {p.x, p.y};
        contour.samples.push_back({z, p.x, p.y, p.residual, p.y - plane});
    }
    if (dir < 0.0)
        std::reverse(contour.samples.begin(), contour.samples.end());
    return contour;
}

} // namespace microtrap::fields
