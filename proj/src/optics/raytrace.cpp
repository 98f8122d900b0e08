#include "microtrap/optics/raytrace.hpp"

#include "microtrap/errors.hpp"
#include "microtrap/rng.hpp"
#include "microtrap/units.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <optional>

namespace microtrap::optics
{
namespace
{
using Eigen::Vector3d;

// Orthonormal frame with w as the third axis.
void basis(const Vector3d& w, Vector3d& u, Vector3d& v)
{
    const Vector3d a = std::abs(w.x()) < 0.9 ? Vector3d::UnitX() : Vector3d::UnitY();
    u = w.cross(a).normalized();
    v = w.cross(u);
}

struct Intersection
{
    Vector3d point;
    Vector3d normal; // unit, against the incoming ray
};

// Surface with its vertex at (0, position, 0) and centre of curvature at
// (0, position + radius, 0); the root on the vertex cap is taken.
std::optional<Intersection> intersect(const OpticalSurface& s, const Vector3d& o, const Vector3d& d)
{
    Intersection out;
    if (s.radius == 0.0)
    {
        if (std::abs(d.y()) < 1e-300)
            return std::nullopt;
        const double t = (s.position - o.y()) / d.y();
        if (!(t > 1e-12))
            return std::nullopt;
        out.point = o + t * d;
        out.normal = Vector3d::UnitY();
    }
    else
    {
        const Vector3d c(0.0, s.position + s.radius, 0.0);
        const Vector3d oc = o - c;
        const double b = oc.dot(d);
        const double cc = oc.squaredNorm() - s.radius * s.radius;
        const double disc = b * b - cc;
        if (disc < 0.0)
            return std::nullopt;
        const double sq = std::sqrt(disc);
        const double t1 = -b - sq;
        const double t2 = -b + sq;
        const Vector3d p1 = o + t1 * d;
        // The vertex cap lies on the side of the centre opposite the radius sign.
        const bool first = (p1.y() - c.y()) * s.radius < 0.0;
        const double t = first ? t1 : t2;
        if (!(t > 1e-12))
            return std::nullopt;
        out.point = o + t * d;
        out.normal = (out.point - c) / std::abs(s.radius);
    }
    if (out.normal.dot(d) > 0.0)
        out.normal = -out.normal;
    return out;
}

Vector3d reflect(const Vector3d& d, const Vector3d& n) { return d - 2.0 * d.dot(n) * n; }

// Snell refraction; empty on total internal reflection. n faces the incoming ray.
std::optional<Vector3d> refract(const Vector3d& d, const Vector3d& n, double n1, double n2)
{
    const double eta = n1 / n2;
    const double cos_i = -n.dot(d);
    const double k = 1.0 - eta * eta * (1.0 - cos_i * cos_i);
    if (k < 0.0)
        return std::nullopt;
    return (eta * d + (eta * cos_i - std::sqrt(k)) * n).normalized();
}

} // namespace

RayBundle sample_emission(const Vector3d& ion, std::size_t n, std::uint64_t seed,
                          const EmissionCone& cone)
{
    if (n == 0)
        throw DomainError("emission needs at least one ray");
    if (!(cone.half_angle > 0.0 && cone.half_angle <= constants::pi))
        throw DomainError("emission cone half-angle must lie in (0, pi]");
    const Vector3d w = cone.axis.normalized();
    Vector3d u;
    Vector3d v;
    basis(w, u, v);
    const double cmin = std::cos(cone.half_angle);
    RayBundle b;
    b.solid_fraction = 0.5 * (1.0 - cmin);
    b.rays.resize(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        const CounterRng rng(seed, i);
        const double t = (static_cast<double>(i) + rng.uniform(0)) / static_cast<double>(n);
        const double c = 1.0 - (1.0 - cmin) * t;
        const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
        const double phi = 2.0 * constants::pi * rng.uniform(1);
        Ray& r = b.rays[i];
        r.origin = ion;
        r.direction = (c * w + s * std::cos(phi) * u + s * std::sin(phi) * v).normalized();
    }
    return b;
}

MirrorSpec mirror_in_mm(const MirrorSpec& um)
{
    MirrorSpec m = um;
    m.roc *= 1e-3;
    m.aperture_radius *= 1e-3;
    m.sag *= 1e-3;
    m.vertex *= 1e-3;
    return m;
}

RayBundle reflect_mirror(const RayBundle& bundle, const MirrorSpec& m, double reflectivity)
{
    if (!(reflectivity >= 0.0 && reflectivity <= 1.0))
        throw DomainError("reflectivity must lie in [0, 1]");
    m.validate();
    RayBundle out = bundle;
    const Vector3d c = m.center_of_curvature();
    const double rim = m.rim_height();
    for (Ray& r : out.rays)
    {
        if (r.direction.y() >= 0.0)
            continue;
        const Vector3d oc = r.origin - c;
        const double b = oc.dot(r.direction);
        const double disc = b * b - (oc.squaredNorm() - m.roc * m.roc);
        if (disc < 0.0)
            continue;
        // Lower cap: the far root for rays starting inside the sphere.
        const double t = -b + std::sqrt(disc);
        if (!(t > 0.0))
            continue;
        const Vector3d p = r.origin + t * r.direction;
        const double rho = std::hypot(p.x() - m.vertex.x(), p.z() - m.vertex.z());
        if (rho > m.aperture_radius || p.y() > rim + 1e-15)
            continue;
        const Vector3d n = (c - p) / m.roc;
        r.origin = p;
        r.direction = reflect(r.direction, n).normalized();
        r.weight *= reflectivity;
        r.tag = Provenance::reflected;
    }
    return out;
}

RayBundle reflect_plane(const RayBundle& bundle, double height, double reflectivity)
{
    if (!(reflectivity >= 0.0 && reflectivity <= 1.0))
        throw DomainError("reflectivity must lie in [0, 1]");
    RayBundle out = bundle;
    for (Ray& r : out.rays)
    {
        if (r.direction.y() >= 0.0 || r.origin.y() < height)
            continue;
        const double t = (height - r.origin.y()) / r.direction.y();
        r.origin += t * r.direction;
        r.direction.y() = -r.direction.y();
        r.weight *= reflectivity;
        r.tag = Provenance::reflected;
    }
    return out;
}

TraceResult trace(const OpticalPrescription& p, const RayBundle& bundle, const TraceOptions& opts)
{
    p.validate();
    TraceResult result;
    result.hits.resize(bundle.rays.size());
    for (std::size_t i = 0; i < bundle.rays.size(); ++i)
    {
        const Ray& ray = bundle.rays[i];
        Hit& hit = result.hits[i];
        hit.weight = ray.weight;
        hit.tag = ray.tag;
        Vector3d o = ray.origin;
        Vector3d d = ray.direction;
        double n = 1.0;
        hit.status = RayStatus::detected;
        for (const OpticalSurface& s : p.surfaces)
        {
            const auto x = intersect(s, o, d);
            if (!x)
            {
                hit.status = RayStatus::lost;
                break;
            }
            o = x->point;
            if (std::hypot(o.x(), o.z()) > s.aperture)
            {
                hit.status = RayStatus::vignetted;
                break;
            }
            if (s.kind == SurfaceKind::spherical_mirror)
                d = reflect(d, x->normal).normalized();
            else if (s.kind == SurfaceKind::spherical_refractor ||
                     s.kind == SurfaceKind::plane_refractor)
            {
                const auto t = refract(d, x->normal, n, s.index_after);
                if (!t)
                {
                    hit.status = RayStatus::lost;
                    break;
                }
                if (opts.check_snell)
                {
                    const double s1 = d.cross(x->normal).norm();
                    const double s2 = t->cross(x->normal).norm();
                    result.max_snell_error =
                        std::max(result.max_snell_error, std::abs(n * s1 - s.index_after * s2));
                }
                d = *t;
                n = s.index_after;
            }
        }
        hit.position = {o.x(), o.z()};
        hit.direction = d;
    }
    return result;
}

} // namespace microtrap::optics
