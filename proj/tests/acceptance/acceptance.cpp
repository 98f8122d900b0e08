// One pass/fail line per acceptance criterion; exit status 1 if any fails.

#include "microtrap/analytic.hpp"
#include "microtrap/cli/app.hpp"
#include "microtrap/errors.hpp"
#include "microtrap/fields/control.hpp"
#include "microtrap/fields/layout.hpp"
#include "microtrap/fields/null_contour.hpp"
#include "microtrap/fields/panel.hpp"
#include "microtrap/fields/polygon.hpp"
#include "microtrap/fields/rail_design.hpp"
#include "microtrap/fields/trap_field.hpp"
#include "microtrap/optics/analysis.hpp"
#include "microtrap/optics/prescription.hpp"
#include "microtrap/optimize/ga.hpp"
#include "microtrap/photometry/lineshape.hpp"
#include "microtrap/photometry/micromotion.hpp"
#include "microtrap/units.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <gsl/gsl_multimin.h>
#include <limits>
#include <nlohmann/json.hpp>
#include <random>
#include <string>
#include <vector>

using namespace microtrap;
using constants::pi;
namespace fs = std::filesystem;

namespace
{
const fs::path data_dir = MICROTRAP_DATA_DIR;

struct Outcome
{
    bool pass = false;
    std::string detail;
};

bool near(double value, double target, double tol)
{
    return std::abs(value - target) <= tol;
}

// criterion 1 ----------------------------------------------------------------

Outcome analytic_table()
{
    const double h = 63.0;
    const auto ring = analytic::collection_metrics(analytic::ring_rail_inner_radius({h, 0.0}), h);
    const auto lin0 = analytic::collection_metrics(analytic::linear_rail_radius({h, 0.0}), h);
    const auto lin4 =
        analytic::collection_metrics(analytic::linear_rail_radius({h, deg_to_rad(4.0)}), h);
    const bool ok =
        near(rad_to_deg(ring.half_angle), 54.74, 0.05) && near(ring.numerical_aperture, 0.816, 0.005) &&
        near(ring.geometric_efficiency, 0.211, 0.002) && near(rad_to_deg(lin0.half_angle), 45.0, 0.05) &&
        near(lin0.numerical_aperture, 0.707, 0.005) && near(lin0.geometric_efficiency, 0.146, 0.002) &&
        near(rad_to_deg(lin4.half_angle), 41.0, 0.05) && near(lin4.numerical_aperture, 0.656, 0.005) &&
        near(lin4.geometric_efficiency, 0.123, 0.002);
    return {ok, fmt::format("ring {:.3f} deg/{:.4f}/{:.4f}; linear {:.2f}/{:.4f}/{:.4f}; "
                            "linear 4deg {:.2f}/{:.4f}/{:.4f}",
                            rad_to_deg(ring.half_angle), ring.numerical_aperture,
                            ring.geometric_efficiency, rad_to_deg(lin0.half_angle),
                            lin0.numerical_aperture, lin0.geometric_efficiency,
                            rad_to_deg(lin4.half_angle), lin4.numerical_aperture,
                            lin4.geometric_efficiency)};
}

// criteria 2 and 3 -----------------------------------------------------------

Outcome wrapped_mirror()
{
    const MirrorSpec m = MirrorSpec::from_rim(150.0, 60.0);
    const double na = analytic::mirror_na(m, m.paraxial_focus());
    const double eta = analytic::efficiency_from_na(na);
    return {near(na, 0.69, 0.01) && near(eta, 0.14, 0.005),
            fmt::format("NA {:.4f}, efficiency {:.4f}", na, eta)};
}

Outcome fabricated_mirror()
{
    const MirrorSpec m = MirrorSpec::from_rim(178.0, 50.5);
    const double na = analytic::mirror_na(m, {0.0, 63.0, 0.0});
    return {near(na, 0.63, 0.01), fmt::format("NA {:.4f}", na)};
}

// criterion 4 ----------------------------------------------------------------

Outcome efficiency_estimates()
{
    const MirrorSpec m = optics::mirror_in_mm(MirrorSpec::from_rim(150.0, 60.0));
    struct Target
    {
        double na, mirror, mirror_tol, planar, planar_tol, gain, gain_tol;
    };
    bool ok = true;
    std::string detail;
    for (const Target t : {Target{0.43, 0.17, 0.015, 0.09, 0.01, 1.8, 0.2},
                           Target{0.14, 0.12, 0.015, 0.009, 0.002, 13.0, 3.0}})
    {
        optics::EfficiencyOptions o;
        o.relay_na = t.na;
        o.reflectivity = 0.85;
        o.rays = 1000000;
        const auto mirror = optics::collection_efficiency(m, o);
        const auto plane = optics::planar_collection_efficiency(m.paraxial_focus().y(), o);
        const double gain = mirror.efficiency / plane.efficiency;
        ok = ok && near(mirror.efficiency, t.mirror, t.mirror_tol) &&
             near(plane.efficiency, t.planar, t.planar_tol) && near(gain, t.gain, t.gain_tol);
        detail += fmt::format("{}NA {}: mirror {:.4f}, planar {:.5f}, x{:.2f}",
                              detail.empty() ? "" : "; ", t.na, mirror.efficiency,
                              plane.efficiency, gain);
    }
    return {ok, detail};
}

// criterion 5 ----------------------------------------------------------------

Outcome relay_scan()
{
    const auto p = optics::load_prescription(data_dir / "relay.json");
    const MirrorSpec m = optics::mirror_in_mm(MirrorSpec::from_rim(150.0, 60.0));
    std::vector<double> heights;
    for (int k = 0; k <= 16; ++k)
        heights.push_back(0.5 * k);
    optics::SpotOptions o;
    o.rays = 100000;
    double spot = 0.0, crosstalk = 0.0;
    for (const auto& r : optics::spot_vs_field_height(p, m, heights, o))
    {
        spot = std::max(spot, r.max_radius);
        crosstalk = std::max(crosstalk, r.crosstalk());
    }
    return {spot <= 0.25 && crosstalk <= 0.002,
            fmt::format("max spot {:.4f} mm, max cross-talk {:.4f}% over 0-8 mm", spot,
                        100.0 * crosstalk)};
}

// criterion 6 ----------------------------------------------------------------

// Solid angle of a convex polygon in y = 0 by nested adaptive quadrature.
double quadrature_solid_angle(const std::vector<Eigen::Vector2d>& poly, const Eigen::Vector3d& p)
{
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    double zmin = 1e300, zmax = -1e300;
    for (const auto& v : poly)
    {
        zmin = std::min(zmin, v.y());
        zmax = std::max(zmax, v.y());
    }
    const auto outer = [&](double z) {
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

Outcome field_oracles()
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> ux(-120.0, 120.0), uy(5.0, 120.0);
    const std::vector<std::vector<Eigen::Vector2d>> shapes{
        {{-50.0, -100.0}, {50.0, -100.0}, {50.0, 100.0}, {-50.0, 100.0}},
        {{0.0, 0.0}, {120.0, 10.0}, {30.0, 90.0}},
        {{-20.0, -30.0}, {40.0, -40.0}, {70.0, 20.0}, {10.0, 60.0}, {-40.0, 20.0}},
        {{-10.0, -10.0}, {10.0, -10.0}, {10.0, 10.0}, {-10.0, 10.0}}};
    double basis_error = 0.0;
    for (int k = 0; k < 20; ++k)
    {
        const auto& s = shapes[static_cast<std::size_t>(k) % shapes.size()];
        const Eigen::Vector3d p(ux(rng), uy(rng), ux(rng));
        const double v = fields::solid_angle(fields::Polygon(s), p).value / (2.0 * pi);
        basis_error = std::max(basis_error, std::abs(v - quadrature_solid_angle(s, p) / (2.0 * pi)));
    }

    const fields::TrapField field(fields::load_layout(data_dir / "layout.json"));
    Eigen::VectorXd volts = field.rf_voltages(200.0);
    volts(static_cast<Eigen::Index>(field.index("dc03"))) = 2.0;
    const auto bound = field.bind(volts);
    std::uniform_real_distribution<double> tx(-40.0, 40.0), ty(20.0, 100.0), tz(-200.0, 200.0);
    double field_error = 0.0;
    const double h = 1e-3; // um
    for (int k = 0; k < 20; ++k)
    {
        const Eigen::Vector3d p(tx(rng), ty(rng), tz(rng));
        Eigen::Vector3d fd;
        for (int i = 0; i < 3; ++i)
        {
            Eigen::Vector3d e = Eigen::Vector3d::Zero();
            e(i) = h;
            fd(i) = -(bound.potential(p + e) - bound.potential(p - e)) / (2.0 * h) * constants::um_per_m;
        }
        field_error = std::max(field_error, (bound.e_field(p) - fd).norm() / fd.norm());
    }

    const double radius = 10.0;
    const fields::PanelSolver solver(fields::sphere_mesh(radius, 8), {.closed = true});
    const Eigen::MatrixXd sigma =
        solver.solve(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(solver.mesh().size())));
    const double q = fields::PanelCharges(solver.mesh(), sigma.col(0)).total_charge();
    const double cap_error = std::abs(q / (4.0 * pi * radius) - 1.0);

    return {basis_error <= 1e-6 && field_error <= 1e-3 && cap_error <= 0.02,
            fmt::format("basis vs quadrature {:.2e}, E vs differences {:.2e} rel, "
                        "sphere capacitance {:.2f}% off",
                        basis_error, field_error, 100.0 * cap_error)};
}

// criterion 7 ----------------------------------------------------------------

Outcome null_contour_shape()
{
    const auto layout = fields::load_layout(data_dir / "layout.json");
    const fields::RfField rf(fields::TrapField(layout), fields::DriveParams{});
    const double z0 = layout.mirror ? layout.mirror->spec.vertex.z() : 0.0;
    const auto c = fields::trace_null_contour(rf, z0, z0 + 600.0, 10.0, {0.0, 60.0});
    double slope = 0.0, far = 0.0;
    for (std::size_t i = 1; i < c.samples.size(); ++i)
    {
        const auto& a = c.samples[i - 1];
        const auto& b = c.samples[i];
        if (a.z - z0 >= 300.0)
            slope = std::max(slope, std::abs(b.height - a.height) / (b.z - a.z) * 10.0);
        far = b.height;
    }
    // The dip must sit over the mirror: its deepest point inside the
    // aperture plus the keep-out shelf.
    const fields::RailDesign design;
    const double footprint = design.mirror_aperture + design.keepout_margin;
    const fields::NullSample* lowest = &c.samples.front();
    for (const auto& s : c.samples)
        if (s.height < lowest->height)
            lowest = &s;
    const double centre = c.samples.front().height;
    return {slope < 0.01 && centre < far - 1.0 && lowest->z - z0 <= footprint,
            fmt::format("slope beyond 300 um {:.4f} um/10um; height {:.2f} um at the mirror "
                        "centre, minimum {:.2f} um at z = {:.0f} um, {:.2f} um far away",
                        slope, centre, lowest->height, lowest->z - z0, far)};
}

// criterion 8 ----------------------------------------------------------------

double toy_span = 600.0;

optimize::FitnessReport toy(const optimize::EdgeGenome& g)
{
    const auto d = fields::edge_perturbation(g.points, toy_span);
    const auto at = [&](double s) { return d.empty() ? 0.0 : d(s); };
    optimize::FitnessReport r;
    r.fitness = 1.0 + std::pow(at(150.0) - 3.0, 2) + std::pow(at(450.0) + 2.0, 2);
    if (std::abs(at(300.0)) > 5.0)
        r.constraint_violations.push_back("edge swing");
    return r;
}

// Distance from the mirror focus to the pseudopotential minimum in the
// focus plane, found by simplex search on the pseudopotential itself.
double remeasure_focus_distance(const fields::TrapLayout& layout)
{
    const fields::RfField rf(fields::TrapField(layout), fields::DriveParams{});
    const Eigen::Vector3d focus = layout.mirror->spec.paraxial_focus();
    struct Args
    {
        const fields::RfField* rf;
        double z;
    } args{&rf, focus.z()};
    gsl_multimin_function f;
    f.n = 2;
    f.params = &args;
    f.f = [](const gsl_vector* v, void* p) {
        const auto* a = static_cast<const Args*>(p);
        return a->rf->pseudopotential({gsl_vector_get(v, 0), gsl_vector_get(v, 1), a->z});
    };
    gsl_vector* x = gsl_vector_alloc(2);
    gsl_vector* step = gsl_vector_alloc(2);
    gsl_vector_set(x, 0, focus.x() + 3.0);
    gsl_vector_set(x, 1, focus.y() - 4.0);
    gsl_vector_set_all(step, 2.0);
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2);
    gsl_multimin_fminimizer_set(s, &f, x, step);
    for (int it = 0; it < 2000; ++it)
    {
        if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS)
            break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-7) == GSL_SUCCESS)
            break;
    }
    const Eigen::Vector3d found(gsl_vector_get(s->x, 0), gsl_vector_get(s->x, 1), focus.z());
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(step);
    gsl_vector_free(x);
    return (found - focus).norm();
}

Outcome ga_suite()
{
    const fields::RailDesign base;
    optimize::GAConfig cfg;
    cfg.population = 6;
    cfg.generations = 3;
    cfg.seed = 11;
    cfg.threads = 2;
    const auto a = optimize::run_ga(base, fields::DriveParams{}, cfg);
    const auto b = optimize::run_ga(base, fields::DriveParams{}, cfg);
    bool same = a.candidates.size() == b.candidates.size();
    for (std::size_t i = 0; same && i < a.candidates.size(); ++i)
        same = a.candidates[i].genome == b.candidates[i].genome &&
               a.candidates[i].report.fitness == b.candidates[i].report.fitness;
    bool monotone = true;
    for (std::size_t g = 1; g < a.history.size(); ++g)
        monotone = monotone && a.history[g].best <= a.history[g - 1].best;
    double worst = 0.0;
    for (const auto& c : a.candidates)
        worst = std::max(worst, remeasure_focus_distance(optimize::interpolate_edge(c.genome, base)));

    double grid = std::numeric_limits<double>::infinity();
    for (double u = -10.0; u <= 10.0; u += 0.25)
        for (double v = -10.0; v <= 10.0; v += 0.25)
        {
            const auto r = toy(optimize::EdgeGenome{{{150.0, u}, {450.0, v}}});
            if (r.feasible())
                grid = std::min(grid, r.fitness);
        }
    optimize::GAConfig tc;
    tc.population = 24;
    tc.generations = 60;
    tc.span = toy_span;
    tc.seed = 1;
    const auto t = optimize::run_ga(optimize::EdgeGenome{{{150.0, 0.0}, {450.0, 0.0}}}, toy, tc);
    const double toy_best = t.candidates.front().report.fitness;

    return {same && monotone && worst <= 0.25 && toy_best <= 1.05 * grid,
            fmt::format("ranking {} across runs, best {} over {} generations, "
                        "{} candidates within {:.3f} um of the focus, toy {:.4f} vs grid {:.4f}",
                        same ? "identical" : "differs", monotone ? "monotone" : "not monotone",
                        a.history.size() - 1, a.candidates.size(), worst, toy_best, grid)};
}

// criterion 9 ----------------------------------------------------------------

Outcome photometry_checks()
{
    photometry::Lineshape m;
    m.carrier_center = -2.0;
    m.carrier_width = m.sideband_width = 10.8;
    m.carrier_amplitude = 3000.0;
    m.sideband_amplitude = 180.0;
    std::vector<photometry::SpectrumSample> samples;
    for (int k = -80; k <= 120; k += 2)
        samples.push_back({double(k), photometry::eval_lineshape(m, k)});
    const auto fit = photometry::fit_lineshape(samples);
    const double fit_error = std::max(
        {std::abs(fit.model.carrier_center - m.carrier_center),
         std::abs(fit.model.carrier_width / m.carrier_width - 1.0),
         std::abs(fit.model.carrier_amplitude / m.carrier_amplitude - 1.0),
         std::abs(fit.model.sideband_amplitude / m.sideband_amplitude - 1.0)});

    double bessel_error = 0.0;
    for (double r = 1e-4; r < 0.99; r += 0.007)
        bessel_error = std::max(bessel_error,
                                std::abs(photometry::sideband_ratio(photometry::modulation_index(r)) - r) / r);

    // The 9a-model reproduction through the command line, metadata checked.
    const fs::path out = fs::temp_directory_path() / "microtrap_acceptance_9a";
    fs::remove_all(out);
    const std::string dir = out.string();
    const char* argv[] = {"microtrap", "--out-dir", dir.c_str(), "reproduce", "--figure", "9a-model"};
    const int code = cli::run(6, argv);
    double beta = std::numeric_limits<double>::quiet_NaN();
    double quoted = std::numeric_limits<double>::quiet_NaN();
    bool noted = false;
    if (code == 0)
    {
        std::ifstream in(out / "reproduce.manifest.json");
        const auto j = nlohmann::json::parse(in);
        beta = j["metadata"]["beta_bessel"].get<double>();
        quoted = j["metadata"]["beta_reference"][0].get<double>();
        noted = j["metadata"].contains("note");
    }
    fs::remove_all(out);
    return {fit_error <= 1e-6 && bessel_error <= 1e-9 && near(beta, 0.49, 0.02) && quoted == 0.3 &&
                noted,
            fmt::format("fit error {:.1e}, Bessel round trip {:.1e}, R = 0.06 gives beta {:.3f} "
                        "(small-angle {:.3f}) beside quoted {} +/- {}",
                        fit_error, bessel_error, beta, 2.0 * std::sqrt(0.06), quoted,
                        photometry::reference_modulation_index.sigma)};
}

// criterion 10 ---------------------------------------------------------------

Outcome transport()
{
    const fields::RfField rf(fields::TrapField(fields::load_layout(data_dir / "layout.json")),
                             fields::DriveParams{});
    fields::TransportOptions o;
    o.n_steps = 1000;
    o.update_rate = 500e3;
    const auto w = fields::transport_waveform(rf, -150.0, 150.0, o);
    const auto t = fields::verify_tracking(rf, w);
    const double vmax = w.max_abs_voltage();
    return {w.steps.size() == 1000 && std::abs(w.duration() - 2e-3) <= 1e-15 && t.max_error < 0.5 &&
                vmax <= 6.0,
            fmt::format("{} steps over {:.6f} ms, max tracking error {:.4f} um, max |V| {:.3f}",
                        w.steps.size(), 1e3 * w.duration(), t.max_error, vmax)};
}

struct Criterion
{
    int id;
    std::function<Outcome()> check;
    double time_limit; // s, infinite when the criterion sets none
};

} // namespace

int main()
{
    const double none = std::numeric_limits<double>::infinity();
    const std::vector<Criterion> criteria{
        {1, analytic_table, 1.0},       {2, wrapped_mirror, none},   {3, fabricated_mirror, none},
        {4, efficiency_estimates, 60.0}, {5, relay_scan, none},      {6, field_oracles, 120.0},
        {7, null_contour_shape, none},  {8, ga_suite, none},         {9, photometry_checks, none},
        {10, transport, none}};
    int failures = 0;
    for (const auto& c : criteria)
    {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try
        {
            o = c.check();
        }
        catch (const std::exception& e)
        {
            o = {false, fmt::format("threw: {}", e.what())};
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (seconds > c.time_limit)
        {
            o.pass = false;
            o.detail += fmt::format(", over the {} s limit", c.time_limit);
        }
        failures += o.pass ? 0 : 1;
        fmt::print("criterion {}: {} {} ({:.2f} s)\n", c.id, o.pass ? "PASS" : "FAIL", o.detail,
                   seconds);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
