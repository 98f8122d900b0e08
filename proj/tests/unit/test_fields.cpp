#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "microtrap/errors.hpp"
#include "microtrap/fields/control.hpp"
#include "microtrap/fields/layout.hpp"
#include "microtrap/fields/null_contour.hpp"
#include "microtrap/fields/panel.hpp"
#include "microtrap/fields/rail_design.hpp"
#include "microtrap/fields/secular.hpp"
#include "microtrap/fields/trap_field.hpp"
#include "microtrap/units.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <functional>
#include <fstream>
#include <random>

using namespace microtrap;
using namespace microtrap::fields;
using constants::pi;

namespace
{
const std::filesystem::path data_dir = MICROTRAP_DATA_DIR;

const TrapLayout& shipped()
{
    static const TrapLayout layout = load_layout(data_dir / "layout.json");
    return layout;
}

const TrapField& shipped_field()
{
    static const TrapField field(shipped());
    return field;
}

const RfField& shipped_rf()
{
    static const RfField rf(shipped_field(), DriveParams{});
    return rf;
}

// Solid angle of a convex polygon in the plane y = 0 seen from p, by nested
// adaptive Gauss-Kronrod quadrature of y / r^3 over the polygon.
double quadrature_solid_angle(const std::vector<Eigen::Vector2d>& poly, const Eigen::Vector3d& p)
{
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    double zmin = 1e300, zmax = -1e300;
    for (const auto& v : poly)
    {
        zmin = std::min(zmin, v.y());
        zmax = std::max(zmax, v.y());
    }
    // x range of the polygon at height z.
    const auto span = [&](double z) {
        double lo = 1e300, hi = -1e300;
        for (std::size_t i = 0; i < poly.size(); ++i)
        {
            const auto& a = poly[i];
            const auto& b = poly[(i + 1) % poly.size()];
            if ((z - a.y()) * (z - b.y()) > 0.0 || a.y() == b.y())
                continue;
            const double x = a.x() + (z - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        return std::pair{lo, hi};
    };
    const auto outer = [&](double z) {
        const auto [lo, hi] = span(z);
        if (!(hi > lo))
            return 0.0;
        const auto inner = [&](double x) {
            const double dx = p.x() - x, dz = p.z() - z;
            const double r2 = dx * dx + p.y() * p.y() + dz * dz;
            return p.y() / (r2 * std::sqrt(r2));
        };
        return GK::integrate(inner, lo, hi, 20, 1e-13);
    };
    return GK::integrate(outer, zmin, zmax, 20, 1e-13);
}

Eigen::Vector3d fd_gradient(const std::function<double(const Eigen::Vector3d&)>& f,
                            const Eigen::Vector3d& p, double h)
{
    Eigen::Vector3d g;
    for (int i = 0; i < 3; ++i)
    {
        Eigen::Vector3d e = Eigen::Vector3d::Zero();
        e(i) = h;
        g(i) = (f(p + e) - f(p - e)) / (2.0 * h);
    }
    return g;
}

} // namespace

TEST_CASE("polygon potential matches adaptive quadrature")
{
    const std::vector<std::vector<Eigen::Vector2d>> shapes{
        {{-50.0, -100.0}, {50.0, -100.0}, {50.0, 100.0}, {-50.0, 100.0}},
        {{0.0, 0.0}, {120.0, 10.0}, {30.0, 90.0}},
        {{-20.0, -30.0}, {40.0, -40.0}, {70.0, 20.0}, {10.0, 60.0}, {-40.0, 20.0}}};
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ux(-120.0, 120.0), uy(5.0, 120.0);
    int points = 0;
    for (const auto& s : shapes)
    {
        const Polygon poly(s);
        for (int k = 0; k < 7; ++k, ++points)
        {
            const Eigen::Vector3d p(ux(rng), uy(rng), ux(rng));
            const double expected = quadrature_solid_angle(s, p) / (2.0 * pi);
            CHECK(std::abs(solid_angle(poly, p).value / (2.0 * pi) - expected) < 1e-6);
        }
    }
    CHECK(points >= 20);
}

TEST_CASE("point in the polygon plane is rejected")
{
    const Polygon poly({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
    CHECK_THROWS_AS((void)solid_angle(poly, {0.2, 0.0, 0.2}), BoundaryPointError);
}

TEST_CASE("solid angle derivatives match differences and satisfy Laplace")
{
    const Polygon poly({{-20.0, -30.0}, {40.0, -40.0}, {70.0, 20.0}, {10.0, 60.0}, {-40.0, 20.0}});
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ux(-80.0, 80.0), uy(3.0, 80.0);
    for (int k = 0; k < 20; ++k)
    {
        const Eigen::Vector3d p(ux(rng), uy(rng), ux(rng));
        const FieldValue v = solid_angle(poly, p, Derivatives::hessian);
        const auto f = [&](const Eigen::Vector3d& q) { return solid_angle(poly, q).value; };
        const Eigen::Vector3d g = fd_gradient(f, p, 1e-3);
        CHECK((v.gradient - g).norm() <= 1e-3 * v.gradient.norm());
        CHECK(std::abs(v.hessian.trace()) <= 1e-9 * v.hessian.norm());
        CHECK((v.hessian - v.hessian.transpose()).norm() <= 1e-12 * v.hessian.norm());
    }
}

TEST_CASE("electric field of the shipped layout matches central differences")
{
    const TrapField& field = shipped_field();
    Eigen::VectorXd v = field.rf_voltages(1.0);
    v(static_cast<Eigen::Index>(field.index("dc05"))) = 0.7;
    v(static_cast<Eigen::Index>(field.index("center"))) = -0.3;
    const BoundPotential b = field.bind(v);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ux(-40.0, 40.0), uy(20.0, 100.0), uz(-150.0, 150.0);
    for (int k = 0; k < 20; ++k)
    {
        const Eigen::Vector3d p(ux(rng), uy(rng), uz(rng));
        const auto f = [&](const Eigen::Vector3d& q) { return b.potential(q); };
        const Eigen::Vector3d e = -constants::um_per_m * fd_gradient(f, p, 1e-3);
        CHECK((b.e_field(p) - e).norm() <= 1e-3 * e.norm());
    }
}

TEST_CASE("basis potentials sum to one")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ux(-200.0, 200.0), uy(1.0, 200.0);
    for (int k = 0; k < 10; ++k)
    {
        const Eigen::Vector3d p(ux(rng), uy(rng), ux(rng));
        Eigen::VectorXd values;
        Eigen::Matrix3Xd gradients;
        shipped_field().basis_all(p, &values, &gradients);
        CHECK(values.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(gradients.rowwise().sum().norm() < 1e-12);
        const std::size_t i = shipped_field().index("dc07");
        CHECK(shipped_field().basis(i, p).value ==
              doctest::Approx(values(static_cast<Eigen::Index>(i))).epsilon(1e-10));
    }
}

TEST_CASE("superposition of bound voltages")
{
    const TrapField& field = shipped_field();
    const auto n = static_cast<Eigen::Index>(field.size());
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n), b = Eigen::VectorXd::Zero(n);
    a(2) = 1.5;
    a(5) = -0.4;
    b(0) = 2.0;
    b(9) = 0.8;
    const Eigen::Vector3d p(3.0, 55.0, 20.0);
    CHECK(field.bind(a + b).potential(p) ==
          doctest::Approx(field.bind(a).potential(p) + field.bind(b).potential(p)).epsilon(1e-10));
}

TEST_CASE("mirror surface follows its host electrode")
{
    const TrapField& field = shipped_field();
    REQUIRE(field.has_mirror());
    const MirrorSpec& m = field.layout().mirror->spec;
    const std::size_t host = field.index(field.layout().mirror->host);
    // Just above the cap, inside the depression.
    for (const double r : {0.0, 20.0, 40.0})
    {
        const double y = m.center_of_curvature().y() - std::sqrt(m.roc * m.roc - r * r) + 0.05;
        Eigen::VectorXd values;
        field.basis_all({r, y, 0.0}, &values, nullptr);
        CHECK(values(static_cast<Eigen::Index>(host)) == doctest::Approx(1.0).epsilon(0.02));
    }
    // Continuous across the rim plane inside the aperture.
    const BoundPotential b = field.bind(field.rf_voltages(1.0));
    for (const double r : {5.0, 30.0})
    {
        const FieldValue above = b.evaluate({r, m.rim_height() + 1e-4, 3.0}, Derivatives::gradient);
        const FieldValue below = b.evaluate({r, m.rim_height() - 1e-4, 3.0}, Derivatives::gradient);
        CHECK(above.value == doctest::Approx(below.value).epsilon(1e-3).scale(1.0));
        CHECK((above.gradient - below.gradient).norm() <= 1e-2 * above.gradient.norm() + 1e-6);
    }
}

TEST_CASE("panel method sphere capacitance")
{
    const double radius = 10.0;
    const PanelSolver solver(sphere_mesh(radius, 8), {.closed = true});
    const Eigen::MatrixXd sigma = solver.solve(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(solver.mesh().size())));
    const PanelCharges charges(solver.mesh(), sigma.col(0));
    CHECK(charges.total_charge() == doctest::Approx(4.0 * pi * radius).epsilon(0.02));
    FieldValue outside;
    charges.accumulate({0.0, 3.0 * radius, 0.0}, 1.0, Derivatives::none, outside);
    CHECK(outside.value == doctest::Approx(1.0 / 3.0).epsilon(0.02));
}

TEST_CASE("open meshes are rejected by a closed solver")
{
    CHECK_THROWS_AS(PanelSolver(disk_mesh(10.0, 0.0), {.closed = true}), SingularSystemError);
    const auto report = inspect_mesh(sphere_mesh(1.0, 3));
    CHECK(report.boundary_edges == 0);
    CHECK(report.nonmanifold_edges == 0);
}

TEST_CASE("pseudopotential scaling")
{
    const Eigen::Vector3d e(120.0, -40.0, 3.0);
    DriveParams d;
    const double base = pseudopotential(d, e);
    CHECK(pseudopotential(d, 2.0 * e) == doctest::Approx(4.0 * base));
    DriveParams fast = d;
    fast.rf_frequency *= 2.0;
    CHECK(pseudopotential(fast, e) == doctest::Approx(0.25 * base));
    DriveParams heavy = d;
    heavy.ion_mass *= 3.0;
    CHECK(pseudopotential(heavy, e) == doctest::Approx(base / 3.0));
    const double q = d.ion_charge;
    CHECK(base == doctest::Approx(q * q * e.squaredNorm() /
                                  (4.0 * d.ion_mass * d.rf_frequency * d.rf_frequency) / q));

    DriveParams strong = d;
    strong.rf_amplitude *= 2.0;
    const RfField rf(shipped_field(), strong);
    const Eigen::Vector3d p(2.0, 50.0, 40.0);
    CHECK(rf.pseudopotential(p) == doctest::Approx(4.0 * shipped_rf().pseudopotential(p)).epsilon(1e-10));
}

TEST_CASE("shipped layout is symmetric")
{
    const RfField& rf = shipped_rf();
    for (const Eigen::Vector3d& p : {Eigen::Vector3d(4.0, 55.0, 30.0), Eigen::Vector3d(-7.0, 70.0, 250.0)})
    {
        const double u = rf.pseudopotential(p);
        CHECK(rf.pseudopotential({-p.x(), p.y(), p.z()}) == doctest::Approx(u).epsilon(1e-6));
        CHECK(rf.pseudopotential({p.x(), p.y(), -p.z()}) == doctest::Approx(u).epsilon(1e-6));
    }
    const NullPoint n = find_rf_null(rf, 120.0, {1.0, 60.0});
    CHECK(std::abs(n.x) < 1e-5); // solver stops on a 1e-9 eV/um gradient
}

TEST_CASE("null agrees with a grid search")
{
    const RfField& rf = shipped_rf();
    const double z = 300.0;
    const NullPoint n = find_rf_null(rf, z, {0.0, 60.0});
    double best = 1e300;
    Eigen::Vector2d at = Eigen::Vector2d::Zero();
    for (double x = -1.0; x <= 1.0 + 1e-9; x += 0.05)
        for (double y = 60.0; y <= 70.0 + 1e-9; y += 0.05)
        {
            const double u = rf.pseudopotential({x, y, z});
            if (u < best)
            {
                best = u;
                at = {x, y};
            }
        }
    CHECK(std::abs(n.x - at.x()) <= 0.05);
    CHECK(std::abs(n.y - at.y()) <= 0.05);
    CHECK(n.residual <= best + 1e-12);
}

TEST_CASE("null height flattens away from the mirror and dips over it")
{
    const auto c = trace_null_contour(shipped_rf(), 0.0, 600.0, 10.0, {0.0, 60.0});
    double far = 0.0;
    for (std::size_t i = 1; i < c.samples.size(); ++i)
    {
        const auto& a = c.samples[i - 1];
        const auto& b = c.samples[i];
        if (a.z >= 300.0)
            CHECK(std::abs(b.height - a.height) < 0.01);
        far = b.height;
    }
    CHECK(c.samples.front().height < far - 1.0);
    const Eigen::Vector3d focus = shipped().mirror->spec.paraxial_focus();
    CHECK(std::abs(c.samples.front().height - focus.y()) < 0.25);
}

TEST_CASE("secular frequencies of a known quadratic")
{
    const double m = constants::calcium40_ion_mass;
    const double k = 0.004; // eV/um^2
    const Eigen::Matrix3d h = Eigen::Vector3d(k, 4.0 * k, 9.0 * k).asDiagonal();
    const SecularModes s = secular_from_hessian(h, m);
    const double w = std::sqrt(k * constants::elementary_charge * 1e12 / m);
    CHECK(s.frequencies(0) == doctest::Approx(w));
    CHECK(s.frequencies(1) == doctest::Approx(2.0 * w));
    CHECK(s.frequencies(2) == doctest::Approx(3.0 * w));
    CHECK(axial_mode(s) == 2);
    Eigen::Matrix3d saddle = h;
    saddle(0, 0) = -k;
    CHECK_THROWS_AS((void)secular_from_hessian(saddle, m), SaddlePointError);
}

TEST_CASE("control voltages form the requested well")
{
    const RfField& rf = shipped_rf();
    const auto contour = trace_null_contour(rf, -20.0, 20.0, 1.25, {0.0, 60.0});
    ControlOptions opts;
    const auto sol = solve_control_voltages(rf, contour, 0.0, opts);
    CHECK(sol.voltages.cwiseAbs().maxCoeff() <= opts.bound + 1e-12);
    CHECK(std::abs(sol.axial_frequency / opts.axial_frequency - 1.0) <= opts.frequency_tolerance);

    const TrapField& field = rf.field();
    const RailDesign d;
    for (int k = 0; k < d.dc_per_side; ++k)
    {
        const double v = sol.voltages(static_cast<Eigen::Index>(field.index(fmt::format("dc{:02d}", k + 1))));
        const double zmirror = sol.voltages(static_cast<Eigen::Index>(
            field.index(fmt::format("dc{:02d}", d.dc_per_side - k))));
        const double xmirror = sol.voltages(static_cast<Eigen::Index>(
            field.index(fmt::format("dc{:02d}", d.dc_per_side + k + 1))));
        CHECK(v == doctest::Approx(zmirror).epsilon(1e-4).scale(1.0));
        CHECK(v == doctest::Approx(xmirror).epsilon(1e-4).scale(1.0));
    }

    const EffectivePotential u(rf, sol.voltages);
    const Eigen::Vector3d well = locate_minimum(u, contour.position_at(0.0));
    CHECK((well - contour.position_at(0.0)).norm() < 0.5);
    const SecularModes modes = secular_frequencies(u, well);
    const double axial = modes.frequencies(axial_mode(modes));
    CHECK(std::abs(axial / opts.axial_frequency - 1.0) <= opts.frequency_tolerance);

    const Eigen::Matrix3d fd = u.hessian(well, 5e-3);
    CHECK((u.hessian(well) - fd).norm() <= 1e-3 * fd.norm());
}

TEST_CASE("tight voltage bound is infeasible")
{
    const RfField& rf = shipped_rf();
    const auto contour = trace_null_contour(rf, -20.0, 20.0, 1.25, {0.0, 60.0});
    ControlOptions opts;
    opts.bound = 0.3;
    CHECK_THROWS_AS((void)solve_control_voltages(rf, contour, 0.0, opts), InfeasibleBoundError);
}

TEST_CASE("short transport tracks its commanded positions")
{
    TransportOptions opts;
    opts.n_steps = 11;
    const Waveform w = transport_waveform(shipped_rf(), -20.0, 20.0, opts);
    REQUIRE(w.steps.size() == 11);
    CHECK(w.duration() == doctest::Approx(11.0 / 500e3));
    CHECK(w.positions.front().z() == doctest::Approx(-20.0));
    CHECK(w.positions.back().z() == doctest::Approx(20.0));
    CHECK(w.max_abs_voltage() <= 6.0);
    const TrackingReport t = verify_tracking(shipped_rf(), w);
    CHECK(t.max_error < 0.5);
}

TEST_CASE("rail design geometry")
{
    const RailDesign d;
    CHECK(width_deviation(rail_edges(d), d.rail_width) < 0.01);
    const ClampedSpline delta = edge_perturbation(d.edge_points, d.edge_span);
    CHECK(delta(d.edge_span) == doctest::Approx(0.0));
    CHECK(delta(-d.edge_span - 50.0) == doctest::Approx(0.0));
    for (const auto& p : d.edge_points)
    {
        CHECK(delta(p.s) == doctest::Approx(p.offset).scale(1.0));
        CHECK(delta(-p.s) == doctest::Approx(p.offset).scale(1.0));
    }

    RailDesign bad = d;
    bad.edge_points.push_back({30.0, -20.0});
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = d;
    bad.edge_points.push_back(d.edge_points.back());
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = d;
    bad.edge_points.push_back({d.edge_span, 0.0});
    CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("design and layout serialize losslessly")
{
    const RailDesign d;
    const RailDesign back = nlohmann::json(d).get<RailDesign>();
    CHECK(back.edge_points == d.edge_points);
    CHECK(back.wrap_angle == d.wrap_angle);

    const TrapLayout layout = build_layout(d);
    const TrapLayout again = layout_from_json(layout_to_json(layout));
    CHECK(again.labels() == layout.labels());
    CHECK(layout_to_json(again) == layout_to_json(layout));
    CHECK(layout_to_json(layout) == layout_to_json(shipped()));
}

TEST_CASE("layout loading errors")
{
    CHECK_THROWS_AS((void)load_layout("/nonexistent/layout.json"), ConfigError);
    const auto tmp = std::filesystem::temp_directory_path() / "microtrap_bad_layout.json";
    {
        std::ofstream out(tmp);
        out << R"({"units": "um", "electrodes": [{"label": "rf"}]})";
    }
    CHECK_THROWS_AS((void)load_layout(tmp), ConfigError);
    {
        std::ofstream out(tmp);
        out << "{not json";
    }
    CHECK_THROWS_AS((void)load_layout(tmp), ConfigError);
    std::filesystem::remove(tmp);
}
