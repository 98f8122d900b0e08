#include "microtrap/optics/analysis.hpp"

#include "microtrap/errors.hpp"
#include "microtrap/rng.hpp"
#include "microtrap/units.hpp"

#include <cmath>

namespace microtrap::optics
{
namespace
{
struct Tally
{
    double enclosed = 0.0;
    double outside = 0.0;
    double vignetted = 0.0;
    double absorbed = 0.0;
    double reflected = 0.0;
    double reflected_vignetted = 0.0;
    double max_r = 0.0;
    double sum_r2 = 0.0;
    double n_r = 0.0;
    double sum_direct_r2 = 0.0;
    double n_direct = 0.0;
};

void tally_bundle(const OpticalPrescription& p, const MirrorSpec& m, const RayBundle& emitted,
                  const Eigen::Vector2d& detector, double radius, double reflectivity, Tally& t)
{
    const RayBundle b = reflect_mirror(emitted, m, reflectivity);
    const TraceResult tr = trace(p, b);
    const double unit = b.solid_fraction / static_cast<double>(b.rays.size());
    for (const Hit& h : tr.hits)
    {
        const double w = h.weight * unit;
        const bool refl = h.tag == Provenance::reflected;
        if (refl)
        {
            // Reflected rays started with unit weight.
            t.absorbed += unit - w;
            t.reflected += w;
        }
        if (h.status != RayStatus::detected)
        {
            t.vignetted += w;
            if (refl)
                t.reflected_vignetted += w;
            continue;
        }
        const double r = (h.position - detector).norm();
        (r <= radius ? t.enclosed : t.outside) += w;
        if (!refl)
        {
            t.sum_direct_r2 += r * r;
            t.n_direct += 1.0;
        }
        if (refl)
        {
            t.max_r = std::max(t.max_r, r);
            t.sum_r2 += r * r;
            t.n_r += 1.0;
        }
    }
}

} // namespace

SpotReport analyze_spot(const OpticalPrescription& p, const MirrorSpec& m, const Eigen::Vector3d& ion,
                        const Eigen::Vector2d& detector, const SpotOptions& opts)
{
    p.validate();
    m.validate();
    const double radius = p.detectors.empty() ? Detector{}.radius : p.detectors.front().radius;
    Tally t;
    double sampled = 0.0;
    if (opts.full_sphere)
    {
        const RayBundle b = sample_emission(ion, opts.rays, opts.seed);
        sampled = b.solid_fraction;
        tally_bundle(p, m, b, detector, radius, opts.reflectivity, t);
    }
    else
    {
        const RayBundle up =
            sample_emission(ion, opts.rays, opts.seed, {Eigen::Vector3d::UnitY(), opts.direct_half_angle});
        const double depth = ion.y() - m.rim_height();
        if (!(depth > 0.0))
            throw DomainError("ion must lie above the mirror rim");
        const double rim_angle = std::atan2(
            m.aperture_radius + std::hypot(ion.x() - m.vertex.x(), ion.z() - m.vertex.z()), depth);
        const double half = std::min(rim_angle + opts.mirror_margin, 0.5 * constants::pi);
        if (opts.direct_half_angle + half > constants::pi)
            throw DomainError("direct and mirror emission cones overlap");
        const RayBundle down =
            sample_emission(ion, opts.rays, splitmix64(opts.seed), {-Eigen::Vector3d::UnitY(), half});
        sampled = up.solid_fraction + down.solid_fraction;
        tally_bundle(p, m, up, detector, radius, opts.reflectivity, t);
        tally_bundle(p, m, down, detector, radius, opts.reflectivity, t);
    }
    SpotReport r;
    r.enclosed = t.enclosed;
    r.outside = t.outside;
    r.absorbed = t.absorbed;
    r.vignetted = t.vignetted + (1.0 - sampled);
    r.max_radius = t.max_r;
    r.rms_radius = t.n_r > 0.0 ? std::sqrt(t.sum_r2 / t.n_r) : 0.0;
    r.rms_direct = t.n_direct > 0.0 ? std::sqrt(t.sum_direct_r2 / t.n_direct) : 0.0;
    r.reflected_vignetted = t.reflected > 0.0 ? t.reflected_vignetted / t.reflected : 0.0;
    return r;
}

std::vector<SpotReport> spot_vs_field_height(const OpticalPrescription& p, const MirrorSpec& m,
                                             const std::vector<double>& heights,
                                             const SpotOptions& opts)
{
    std::vector<SpotReport> out;
    for (const double h : heights)
    {
        MirrorSpec shifted = m;
        shifted.vertex.x() += h;
        SpotReport r = analyze_spot(p, shifted, shifted.paraxial_focus(), {-h, 0.0}, opts);
        r.field_height = h;
        out.push_back(r);
    }
    return out;
}

double crosstalk_ratio(const OpticalPrescription& p, const MirrorSpec& m, double field_height,
                       const SpotOptions& opts)
{
    return spot_vs_field_height(p, m, {field_height}, opts).front().crosstalk();
}

std::vector<MisalignmentPoint> misalignment_scan(const OpticalPrescription& p, const MirrorSpec& m,
                                                 const std::vector<double>& field_heights,
                                                 const std::vector<double>& axial_um,
                                                 const std::vector<double>& vertical_um,
                                                 const SpotOptions& opts)
{
    std::vector<MisalignmentPoint> out;
    for (const double h : field_heights)
    {
        MirrorSpec shifted = m;
        shifted.vertex.x() += h;
        const Eigen::Vector3d focus = shifted.paraxial_focus();
        const auto run = [&](double dz, double dy) {
            MisalignmentPoint pt;
            pt.field_height = h;
            pt.axial_offset = dz;
            pt.vertical_offset = dy;
            pt.spot = analyze_spot(p, shifted, focus + Eigen::Vector3d(0.0, dy * 1e-3, dz * 1e-3),
                                   {-h, 0.0}, opts);
            pt.spot.field_height = h;
            out.push_back(pt);
        };
        for (const double dz : axial_um)
            run(dz, 0.0);
        for (const double dy : vertical_um)
            run(0.0, dy);
    }
    return out;
}

namespace
{
EfficiencyReport collect(const RayBundle& b, const EfficiencyOptions& opts)
{
    const double cos_na = std::sqrt(1.0 - opts.relay_na * opts.relay_na);
    const double n = static_cast<double>(b.rays.size());
    double sum = 0.0;
    double sum2 = 0.0;
    EfficiencyReport r;
    for (const Ray& ray : b.rays)
    {
        const double w = ray.direction.y() >= cos_na ? ray.weight : 0.0;
        sum += w;
        sum2 += w * w;
        (ray.tag == Provenance::reflected ? r.reflected : r.direct) += w;
    }
    const double mean = sum / n;
    r.efficiency = b.solid_fraction * mean;
    r.standard_error = b.solid_fraction * std::sqrt(std::max(0.0, sum2 / n - mean * mean) / n);
    r.direct *= b.solid_fraction / n;
    r.reflected *= b.solid_fraction / n;
    r.detected = r.efficiency * opts.quantum_efficiency;
    return r;
}

void check(const EfficiencyOptions& opts)
{
    if (!(opts.relay_na > 0.0 && opts.relay_na < 1.0))
        throw DomainError("relay NA must lie in (0, 1)");
    if (opts.rays == 0)
        throw DomainError("efficiency needs at least one ray");
}

double cone_fraction(double sin_half) { return 0.5 * (1.0 - std::sqrt(1.0 - sin_half * sin_half)); }

} // namespace

EfficiencyReport collection_efficiency(const MirrorSpec& m, const EfficiencyOptions& opts)
{
    check(opts);
    const Eigen::Vector3d ion = m.paraxial_focus();
    const RayBundle b =
        reflect_mirror(sample_emission(ion, opts.rays, opts.seed), m, opts.reflectivity);
    EfficiencyReport r = collect(b, opts);
    const double depth = ion.y() - m.rim_height();
    const double mirror_fraction = 0.5 * (1.0 - depth / std::hypot(depth, m.aperture_radius));
    r.closed_form = cone_fraction(opts.relay_na) + opts.reflectivity * mirror_fraction;
    return r;
}

EfficiencyReport planar_collection_efficiency(double height, const EfficiencyOptions& opts)
{
    check(opts);
    if (!(height > 0.0))
        throw DomainError("ion must lie above the plane");
    const RayBundle b = reflect_plane(sample_emission({0.0, height, 0.0}, opts.rays, opts.seed), 0.0,
                                      opts.reflectivity);
    EfficiencyReport r = collect(b, opts);
    r.closed_form = (1.0 + opts.reflectivity) * cone_fraction(opts.relay_na);
    return r;
}

} // namespace microtrap::optics
