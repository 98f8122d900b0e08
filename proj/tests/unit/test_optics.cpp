#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "microtrap/errors.hpp"
#include "microtrap/optics/analysis.hpp"
#include "microtrap/optics/prescription.hpp"
#include "microtrap/optics/raytrace.hpp"
#include "microtrap/optics/relay.hpp"

#include <Eigen/LU>
#include <cmath>
#include <filesystem>

using namespace microtrap;
using namespace microtrap::optics;

namespace
{
OpticalPrescription shipped()
{
    return load_prescription(std::filesystem::path(MICROTRAP_DATA_DIR) / "relay.json");
}

MirrorSpec wrapped_mirror()
{
    return mirror_in_mm(MirrorSpec::from_rim(150.0, 60.0));
}

// Single lens of index 1.5: convex front surface, flat back.
OpticalPrescription singlet()
{
    OpticalPrescription p;
    p.surfaces = {{SurfaceKind::spherical_refractor, 50.0, 20.0, 100.0, 1.5},
                  {SurfaceKind::plane_refractor, 0.0, 20.0, 105.0, 1.0},
                  {SurfaceKind::detector_plane, 0.0, 1000.0, 300.0, 1.0}};
    return p;
}

Eigen::Matrix2d gap(double d)
{
    Eigen::Matrix2d m;
    m << 1.0, d, 0.0, 1.0;
    return m;
}

Eigen::Matrix2d refract(double radius, double n1, double n2)
{
    Eigen::Matrix2d m;
    m << 1.0, 0.0, radius == 0.0 ? 0.0 : (n1 - n2) / (n2 * radius), n1 / n2;
    return m;
}

RayBundle single_ray(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction)
{
    RayBundle b;
    b.rays.push_back({origin, direction.normalized(), 1.0, Provenance::direct});
    return b;
}
} // namespace

TEST_CASE("paraxial matrix of a singlet")
{
    const Eigen::Matrix2d expected = gap(195.0) * refract(0.0, 1.5, 1.0) * gap(5.0) *
                                     refract(50.0, 1.0, 1.5) * gap(100.0);
    const Eigen::Matrix2d m = paraxial_matrix(singlet());
    CHECK((m - expected).norm() <= 1e-12 * expected.norm());
    CHECK(m.determinant() == doctest::Approx(1.0));
}

TEST_CASE("exact trace agrees with the paraxial matrix near the axis")
{
    for (const auto& p : {singlet(), shipped()})
    {
        const Eigen::Matrix2d m = paraxial_matrix(p);
        const double x0 = 1e-3;
        const double u = 2e-5;
        const auto t = trace(p, single_ray({x0, 0.0, 0.0}, {u, 1.0, 0.0}));
        REQUIRE(t.hits.front().status == RayStatus::detected);
        const double predicted = m(0, 0) * x0 + m(0, 1) * u;
        CHECK(t.hits.front().position.x() == doctest::Approx(predicted).epsilon(1e-5));
        CHECK(std::abs(t.hits.front().position.y()) <= 1e-15);
    }
}

TEST_CASE("shipped relay is a near unit inverting relay")
{
    const auto p = shipped();
    p.validate();
    const Eigen::Matrix2d m = paraxial_matrix(p);
    CHECK(m(0, 0) == doctest::Approx(-1.0).epsilon(0.02));
    CHECK(m.determinant() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("refraction obeys Snell's law")
{
    const auto p = shipped();
    const auto bundle = sample_emission(Eigen::Vector3d(2.0, 0.0, -1.0), 20000, 5,
                                        EmissionCone{Eigen::Vector3d::UnitY(), 0.14});
    TraceOptions o;
    o.check_snell = true;
    const auto t = trace(p, bundle, o);
    CHECK(t.hits.size() == bundle.rays.size());
    CHECK(t.max_snell_error < 1e-12);
}

TEST_CASE("emission sampling")
{
    const Eigen::Vector3d ion(0.1, 0.2, 0.3);
    const auto full = sample_emission(ion, 100000, 11);
    CHECK(full.solid_fraction == doctest::Approx(1.0));
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& r : full.rays)
    {
        CHECK(r.origin == ion);
        mean += r.direction;
    }
    mean /= static_cast<double>(full.rays.size());
    CHECK(mean.norm() < 0.01);

    const EmissionCone cone{Eigen::Vector3d(0.0, -1.0, 0.0), 0.5};
    const auto b = sample_emission(ion, 50000, 11, cone);
    CHECK(b.solid_fraction == doctest::Approx(0.5 * (1.0 - std::cos(0.5))));
    double min_cos = 1.0;
    for (const auto& r : b.rays)
    {
        CHECK(r.direction.norm() == doctest::Approx(1.0));
        min_cos = std::min(min_cos, r.direction.dot(cone.axis));
    }
    CHECK(min_cos >= std::cos(0.5) - 1e-12);

    // Same seed, same rays.
    const auto again = sample_emission(ion, 50000, 11, cone);
    CHECK(again.rays.back().direction == b.rays.back().direction);
    const auto other = sample_emission(ion, 50000, 12, cone);
    CHECK(other.rays.back().direction != b.rays.back().direction);
}

TEST_CASE("mirror and plane reflection")
{
    const MirrorSpec m = wrapped_mirror();
    // From the centre of curvature every ray returns along itself.
    const auto from_centre = sample_emission(m.center_of_curvature(), 2000, 3,
                                             EmissionCone{-Eigen::Vector3d::UnitY(), 0.35});
    const auto back = reflect_mirror(from_centre, m, 0.85);
    int reflected = 0;
    for (std::size_t i = 0; i < back.rays.size(); ++i)
    {
        const auto& r = back.rays[i];
        if (r.tag != Provenance::reflected)
            continue;
        ++reflected;
        CHECK(r.weight == doctest::Approx(0.85));
        CHECK((r.direction + from_centre.rays[i].direction).norm() < 1e-12);
    }
    CHECK(reflected > 1000);

    // From the paraxial focus, near-axis rays leave parallel to the axis.
    const auto near_axis = sample_emission(m.paraxial_focus(), 500, 3,
                                           EmissionCone{-Eigen::Vector3d::UnitY(), 0.01});
    for (const auto& r : reflect_mirror(near_axis, m, 1.0).rays)
    {
        REQUIRE(r.tag == Provenance::reflected);
        CHECK(r.direction.y() > 1.0 - 1e-8);
    }

    const auto plane = reflect_plane(single_ray({0.0, 1.0, 0.0}, {0.3, -1.0, 0.2}), 0.0, 0.5);
    const auto& r = plane.rays.front();
    CHECK(r.tag == Provenance::reflected);
    CHECK(r.weight == doctest::Approx(0.5));
    CHECK(r.origin.y() == doctest::Approx(0.0).scale(1.0));
    CHECK(r.direction.isApprox(Eigen::Vector3d(0.3, 1.0, 0.2).normalized(), 1e-12));
}

TEST_CASE("spot bookkeeping accounts for every ray")
{
    SpotOptions o;
    o.rays = 20000;
    o.full_sphere = true;
    const auto p = shipped();
    const MirrorSpec m = wrapped_mirror();
    const auto r = analyze_spot(p, m, m.paraxial_focus(), Eigen::Vector2d::Zero(), o);
    CHECK(r.enclosed + r.outside + r.vignetted + r.absorbed == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.absorbed > 0.0);
    CHECK(r.enclosed > r.outside);
    CHECK(r.crosstalk() + r.enclosed_fraction() == doctest::Approx(1.0));
}

TEST_CASE("misalignment is symmetric about the focus")
{
    SpotOptions o;
    o.rays = 20000;
    const auto points =
        misalignment_scan(shipped(), wrapped_mirror(), {0.0}, {-3.0, 0.0, 3.0}, {}, o);
    REQUIRE(points.size() == 3);
    CHECK(points[0].spot.max_radius == doctest::Approx(points[2].spot.max_radius).epsilon(0.05));
    CHECK(points[0].spot.rms_radius == doctest::Approx(points[2].spot.rms_radius).epsilon(0.05));
    CHECK(points[1].spot.rms_radius < points[0].spot.rms_radius);
}

TEST_CASE("prescription JSON round trip and validation")
{
    const auto p = shipped();
    const auto q = prescription_from_json(prescription_to_json(p));
    REQUIRE(q.surfaces.size() == p.surfaces.size());
    for (std::size_t i = 0; i < p.surfaces.size(); ++i)
    {
        CHECK(q.surfaces[i].kind == p.surfaces[i].kind);
        CHECK(q.surfaces[i].radius == doctest::Approx(p.surfaces[i].radius));
        CHECK(q.surfaces[i].position == doctest::Approx(p.surfaces[i].position));
        CHECK(q.surfaces[i].aperture == doctest::Approx(p.surfaces[i].aperture));
        CHECK(q.surfaces[i].index_after == doctest::Approx(p.surfaces[i].index_after));
    }
    CHECK(prescription_to_json(q) == prescription_to_json(p));

    CHECK_THROWS_AS(OpticalPrescription{}.validate(), DomainError);
    auto bad = singlet();
    bad.surfaces[1].aperture = 0.0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = singlet();
    std::swap(bad.surfaces[0], bad.surfaces[1]);
    CHECK_THROWS_AS(bad.validate(), DomainError);
    CHECK_THROWS_AS((void)surface_kind_from_string("prism"), ConfigError);
}

TEST_CASE("built relay matches its design")
{
    RelayDesign d;
    const auto p = build_relay(d);
    p.validate();
    CHECK(p.surfaces.front().position == doctest::Approx(d.object_distance));
    d.na = 1.2;
    CHECK_THROWS_AS(d.validate(), DomainError);
}

TEST_CASE("planar efficiency agrees with the closed form")
{
    EfficiencyOptions o;
    o.rays = 200000;
    for (const double na : {0.14, 0.43})
    {
        o.relay_na = na;
        const auto r = planar_collection_efficiency(0.063, o);
        CHECK(std::abs(r.efficiency - r.closed_form) <= 4.0 * r.standard_error + 1e-12);
        CHECK(r.direct + r.reflected == doctest::Approx(r.efficiency));
        CHECK(r.detected == doctest::Approx(0.205 * r.efficiency));
    }
}

TEST_CASE("mirror efficiency is bounded by full acceptance")
{
    EfficiencyOptions o;
    o.rays = 200000;
    const MirrorSpec m = wrapped_mirror();
    const auto wide = collection_efficiency(m, o);
    CHECK(wide.efficiency <= wide.closed_form + 4.0 * wide.standard_error);
    o.relay_na = 0.43;
    const auto wider = collection_efficiency(m, o);
    CHECK(wider.efficiency > wide.efficiency);
    o.reflectivity = 0.0;
    const auto dark = collection_efficiency(m, o);
    CHECK(dark.reflected == 0.0);
    o.relay_na = 0.0;
    CHECK_THROWS_AS((void)collection_efficiency(m, o), DomainError);
}
