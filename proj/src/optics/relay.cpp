#include "microtrap/optics/relay.hpp"

#include "microtrap/errors.hpp"

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <limits>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <memory>

namespace microtrap::optics
{
void RelayDesign::validate() const
{
    if (!(glass_index > 1.0 && lens_radius > thickness && thickness > 0.0 && lens_gap >= 0.0 &&
          aperture > 0.0 && object_distance > 0.0 && separation > 0.0 && na > 0.0 && na < 1.0))
        throw DomainError("relay design parameters out of range");
    if (!(object_distance + detector_shift > 0.0))
        throw DomainError("relay detector would sit inside the last lens");
}

namespace
{
OpticalPrescription halves(const RelayDesign& d, double stop_radius)
{
    OpticalPrescription p;
    double y = d.object_distance;
    const auto lens = [&](bool plane_first) {
        OpticalSurface a;
        OpticalSurface b;
        a.aperture = b.aperture = d.aperture;
        a.position = y;
        b.position = y + d.thickness;
        a.index_after = d.glass_index;
        b.index_after = 1.0;
        if (plane_first)
        {
            a.kind = SurfaceKind::plane_refractor;
            b.kind = SurfaceKind::spherical_refractor;
            b.radius = -d.lens_radius;
        }
        else
        {
            a.kind = SurfaceKind::spherical_refractor;
            a.radius = d.lens_radius;
            b.kind = SurfaceKind::plane_refractor;
        }
        p.surfaces.push_back(a);
        p.surfaces.push_back(b);
        y += d.thickness;
    };
    lens(true);
    y += d.lens_gap;
    lens(true);
    OpticalSurface stop;
    stop.kind = SurfaceKind::aperture_stop;
    stop.position = y + 0.5 * d.separation;
    stop.aperture = stop_radius;
    p.surfaces.push_back(stop);
    y += d.separation;
    lens(false);
    y += d.lens_gap;
    lens(false);
    OpticalSurface det;
    det.kind = SurfaceKind::detector_plane;
    det.position = y + d.object_distance + d.detector_shift;
    det.aperture = 1e3;
    p.surfaces.push_back(det);
    return p;
}

// Finite stand-in for rejected designs; the simplex refuses non-finite values.
constexpr double infeasible_cost = 1e6;

class GslVector
{
public:
    explicit GslVector(const Eigen::Vector3d& v) : v_(gsl_vector_alloc(3))
    {
        for (int i = 0; i < 3; ++i)
            gsl_vector_set(v_, static_cast<std::size_t>(i), v(i));
    }
    ~GslVector() { gsl_vector_free(v_); }
    GslVector(const GslVector&) = delete;
    GslVector& operator=(const GslVector&) = delete;
    [[nodiscard]] gsl_vector* get() const { return v_; }

private:
    gsl_vector* v_;
};

// GSL aborts on errors by default; failures are reported through return codes instead.
class ErrorHandlerOff
{
public:
    ErrorHandlerOff() : previous_(gsl_set_error_handler_off()) {}
    ~ErrorHandlerOff() { gsl_set_error_handler(previous_); }
    ErrorHandlerOff(const ErrorHandlerOff&) = delete;
    ErrorHandlerOff& operator=(const ErrorHandlerOff&) = delete;

private:
    gsl_error_handler_t* previous_;
};

} // namespace

OpticalPrescription build_relay(const RelayDesign& d)
{
    d.validate();
    // Size the stop from the on-axis marginal ray at the design NA.
    const OpticalPrescription open = halves(d, 1e3);
    RayBundle marginal;
    const double s = d.na;
    marginal.rays.push_back({Eigen::Vector3d::Zero(), Eigen::Vector3d(s, std::sqrt(1.0 - s * s), 0.0)});
    OpticalPrescription first;
    for (const auto& surf : open.surfaces)
    {
        if (surf.kind == SurfaceKind::aperture_stop)
        {
            OpticalSurface probe = surf;
            probe.kind = SurfaceKind::detector_plane;
            first.surfaces.push_back(probe);
            break;
        }
        first.surfaces.push_back(surf);
    }
    const Hit h = trace(first, marginal).hits.front();
    if (h.status != RayStatus::detected)
        throw DomainError("relay lenses vignette the design NA");
    return halves(d, std::abs(h.position.x()));
}

RelayFit optimize_relay(const RelayDesign& start, const MirrorSpec& mirror_mm,
                        const RelayFitOptions& opts)
{
    int evaluations = 0;
    const auto design_of = [&](const Eigen::Vector3d& x) {
        RelayDesign d = start;
        d.lens_radius = x(0);
        d.object_distance = x(1);
        d.detector_shift = x(2);
        return d;
    };
    const std::function<double(const Eigen::Vector3d&)> cost = [&](const Eigen::Vector3d& x) {
        ++evaluations;
        try
        {
            const auto spots =
                spot_vs_field_height(build_relay(design_of(x)), mirror_mm, opts.field_heights, opts.spot);
            double sum = 0.0;
            for (const auto& r : spots)
            {
                // Vignetted mirror light counts as a miss at the full aperture.
                if (r.reflected_vignetted > 0.0)
                    return std::numeric_limits<double>::infinity();
                sum += r.rms_direct;
            }
            return sum / static_cast<double>(spots.size());
        }
        catch (const DomainError&)
        {
            return std::numeric_limits<double>::infinity();
        }
    };

    struct Objective
    {
        const std::function<double(const Eigen::Vector3d&)>* cost;
    } objective{&cost};
    gsl_multimin_function fn;
    fn.n = 3;
    fn.params = &objective;
    fn.f = [](const gsl_vector* v, void* params) {
        const auto* o = static_cast<const Objective*>(params);
        const double c = (*o->cost)(Eigen::Vector3d(gsl_vector_get(v, 0), gsl_vector_get(v, 1),
                                                    gsl_vector_get(v, 2)));
        return std::isfinite(c) ? c : infeasible_cost;
    };

    const Eigen::Vector3d x0(start.lens_radius, start.object_distance, start.detector_shift);
    const Eigen::Vector3d steps(0.05 * start.lens_radius, 0.05 * start.object_distance, 0.5);
    const GslVector x(x0);
    const GslVector step(steps);
    const ErrorHandlerOff guard;
    const std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> s(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 3),
        gsl_multimin_fminimizer_free);
    if (gsl_multimin_fminimizer_set(s.get(), &fn, x.get(), step.get()) != GSL_SUCCESS)
        throw NumericalError("relay fit: cannot start the simplex");
    while (evaluations < opts.max_evaluations)
    {
        if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS)
            break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s.get()), 1e-6) == GSL_SUCCESS)
            break;
    }
    const gsl_vector* best = gsl_multimin_fminimizer_x(s.get());
    const Eigen::Vector3d xb(gsl_vector_get(best, 0), gsl_vector_get(best, 1), gsl_vector_get(best, 2));
    return {design_of(xb), gsl_multimin_fminimizer_minimum(s.get()), evaluations};
}

} // namespace microtrap::optics
