#include "microtrap/optimize/fitness.hpp"

#include "microtrap/errors.hpp"

#include <cmath>
#include <fmt/format.h>

namespace microtrap::optimize
{
using namespace fields;

FitnessReport fitness(const TrapLayout& layout, const DriveParams& drive, const FitnessOptions& opts)
{
    FitnessReport report;
    if (!(opts.range.step > 0.0 && opts.range.z_end > opts.range.z_begin))
        throw DomainError("fitness range needs z_end > z_begin and a positive step");
    try
    {
        if (layout.rail_design)
        {
            const RailDesign& d = *layout.rail_design;
            report.width_deviation = width_deviation(rail_edges(d), d.rail_width);
            if (report.width_deviation > opts.width_tolerance)
                report.constraint_violations.push_back(
                    fmt::format("rail width deviates by {:.4f} um", report.width_deviation));
        }
        const TrapField field(layout, opts.field);
        const RfField rf(field, drive);
        double z0 = 0.0;
        Eigen::Vector2d guess(0.0, opts.guess_height);
        if (layout.mirror)
        {
            const Eigen::Vector3d focus = layout.mirror->spec.paraxial_focus();
            z0 = focus.z();
            guess = {focus.x(), focus.y()};
            const NullPoint centre = find_rf_null(rf, z0, guess, opts.null);
            report.null_focus_distance = (centre.position() - focus).norm();
            if (*report.null_focus_distance > opts.focus_tolerance)
                report.constraint_violations.push_back(fmt::format(
                    "null is {:.3f} um from the mirror focus", *report.null_focus_distance));
            guess = {centre.x, centre.y};
        }
        const NullContour contour = trace_null_contour(
            rf, z0 + opts.range.z_begin, z0 + opts.range.z_end, opts.range.step, guess, opts.null);
        const double c = drive.pseudo_coefficient();
        double integral = 0.0;
        double prev_z = 0.0;
        double prev_f = 0.0;
        for (std::size_t i = 0; i < contour.samples.size(); ++i)
        {
            const NullSample& s = contour.samples[i];
            const RfSample rs = rf.sample({s.x, s.y, s.z});
            const double de2 = rs.gradient.z() / c;
            const double f = de2 * de2;
            if (i > 0)
                integral += 0.5 * (f + prev_f) * (s.z - prev_z);
            prev_z = s.z;
            prev_f = f;
            report.profile_z.push_back(s.z - z0);
            report.profile_field.push_back(rs.e_field.norm());
        }
        report.fitness = integral;
    }
    catch (const DomainError& e)
    {
        report.constraint_violations.push_back(e.what());
        report.fitness = std::numeric_limits<double>::infinity();
    }
    catch (const NumericalError& e)
    {
        report.constraint_violations.push_back(e.what());
        report.fitness = std::numeric_limits<double>::infinity();
    }
    return report;
}

} // namespace microtrap::optimize
