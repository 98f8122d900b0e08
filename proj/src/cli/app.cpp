#include "microtrap/cli/app.hpp"

#include "context.hpp"
#include "microtrap/analytic.hpp"
#include "microtrap/cli/csv.hpp"
#include "microtrap/errors.hpp"
#include "microtrap/fields/control.hpp"
#include "microtrap/fields/null_contour.hpp"
#include "microtrap/fields/rail_design.hpp"
#include "microtrap/fields/secular.hpp"
#include "microtrap/optics/analysis.hpp"
#include "microtrap/optics/raytrace.hpp"
#include "microtrap/optics/relay.hpp"
#include "microtrap/optimize/ga.hpp"
#include "microtrap/photometry/enhancement.hpp"
#include "microtrap/photometry/lineshape.hpp"
#include "microtrap/photometry/micromotion.hpp"
#include "microtrap/units.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <limits>
#include <functional>
#include <iostream>

#ifndef MICROTRAP_VERSION
#define MICROTRAP_VERSION "unknown"
#endif
#ifndef MICROTRAP_DATA_DIR
#define MICROTRAP_DATA_DIR "data"
#endif

namespace microtrap::cli
{
void reproduce_figure(Context& ctx, const std::string& id, std::size_t rays);

std::filesystem::path Context::output(const std::string& name)
{
    manifest.outputs.push_back({name, ""});
    return out_dir / name;
}

void Context::write_json(const std::string& name, const nlohmann::json& j)
{
    std::ofstream out(output(name));
    if (!out)
        throw ConfigError(fmt::format("cannot write '{}'", (out_dir / name).string()));
    out << j.dump(2) << '\n';
}

nlohmann::json Context::read_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError(fmt::format("cannot read '{}'", path.string()));
    manifest.add_config(path);
    try
    {
        return nlohmann::json::parse(in);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ConfigError(fmt::format("'{}': {}", path.string(), e.what()));
    }
}

fields::TrapLayout Context::layout(const std::string& path)
{
    const std::filesystem::path p = path.empty() ? data_dir / "layout.json" : std::filesystem::path(path);
    manifest.add_config(p);
    return fields::load_layout(p);
}

optics::OpticalPrescription Context::prescription(const std::string& path)
{
    const std::filesystem::path p = path.empty() ? data_dir / "relay.json" : std::filesystem::path(path);
    manifest.add_config(p);
    return optics::load_prescription(p);
}

double quantity(const std::string& text, const char* unit)
{
    return parse_quantity(text, unit);
}

std::vector<double> quantities(const std::vector<std::string>& texts, const char* unit)
{
    std::vector<double> out;
    for (const auto& t : texts)
        out.push_back(parse_quantity(t, unit));
    return out;
}

std::vector<double> range(double begin, double end, double step)
{
    if (!(step > 0.0) || end < begin)
        throw ConfigError(fmt::format("invalid range [{}, {}] step {}", begin, end, step));
    std::vector<double> out;
    const auto n = static_cast<long>(std::floor((end - begin) / step + 1e-9));
    for (long i = 0; i <= n; ++i)
        out.push_back(begin + static_cast<double>(i) * step);
    if (end - out.back() > 1e-9 * step)
        out.push_back(end);
    return out;
}

fields::DriveParams DriveFlags::params() const
{
    fields::DriveParams d;
    d.rf_amplitude = quantity(amplitude, "V");
    d.rf_frequency = mhz_to_angular(quantity(frequency, "MHz"));
    d.validate();
    return d;
}

MirrorSpec MirrorFlags::spec_um() const
{
    return MirrorSpec::from_rim(quantity(roc, "um"), quantity(aperture, "um"));
}

namespace
{
using Action = std::function<void(Context&)>;

void add_drive(CLI::App* cmd, DriveFlags& d)
{
    cmd->add_option("--rf-amplitude", d.amplitude, "rf amplitude, e.g. 200V")->capture_default_str();
    cmd->add_option("--rf-frequency", d.frequency, "rf drive frequency, e.g. 62.3MHz")
        ->capture_default_str();
}

void add_mirror(CLI::App* cmd, MirrorFlags& m)
{
    cmd->add_option("--mirror-roc", m.roc, "mirror radius of curvature")->capture_default_str();
    cmd->add_option("--mirror-aperture", m.aperture, "mirror aperture radius")->capture_default_str();
}

fields::RailDesign read_design(Context& ctx, const std::string& path)
{
    if (path.empty())
        return {};
    try
    {
        return ctx.read_json(path).get<fields::RailDesign>();
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ConfigError(fmt::format("'{}': {}", path, e.what()));
    }
}

// analytic ------------------------------------------------------------------

Action analytic_command(CLI::App& app)
{
    struct Flags
    {
        bool ring = false, linear = false, mirror = false;
        std::string height, theta = "0deg";
        MirrorFlags m;
    };
    auto f = std::make_shared<Flags>();
    auto* cmd = app.add_subcommand("analytic", "Collection angle, NA and efficiency of analytic models");
    cmd->set_help_flag("--help", "Print this help message and exit"); // frees -h for --h
    auto* ring = cmd->add_flag("--ring", f->ring, "rf ring around the mirror");
    auto* linear = cmd->add_flag("--linear", f->linear, "linear rails tangent to the mirror");
    auto* mirror = cmd->add_flag("--mirror", f->mirror, "spherical mirror seen from an on-axis ion");
    ring->excludes(linear)->excludes(mirror);
    linear->excludes(mirror);
    cmd->add_option("--h", f->height, "ion height above the electrode plane, e.g. 63um (mirror: defaults to the focus)");
    cmd->add_option("--theta", f->theta, "rail angle, e.g. 16deg")->capture_default_str();
    add_mirror(cmd, f->m);
    return [f](Context& ctx) {
        if (!(f->ring || f->linear || f->mirror))
            throw ConfigError("analytic: choose one of --ring, --linear, --mirror");
        CsvWriter out(ctx.output("analytic.csv"), {"model", "height_um", "theta_deg", "radius_um",
                                                   "phi_deg", "na", "efficiency"});
        if (f->mirror)
        {
            const MirrorSpec m = f->m.spec_um();
            const double h = f->height.empty() ? m.paraxial_focus().y() : quantity(f->height, "um");
            const double na = analytic::mirror_na(m, {0.0, h, 0.0});
            out.cell(std::string("mirror")).cell(h).cell(0.0).cell(m.aperture_radius)
                .cell(rad_to_deg(std::asin(na))).cell(na).cell(analytic::efficiency_from_na(na));
            out.end_row();
            return;
        }
        if (f->height.empty())
            throw ConfigError("analytic: --h is required for --ring and --linear");
        const double h = quantity(f->height, "um");
        const double theta = parse_angle(f->theta);
        const double r = f->ring ? analytic::ring_rail_inner_radius({h, theta})
                                 : analytic::linear_rail_radius({h, theta});
        const auto c = analytic::collection_metrics(r, h);
        out.cell(std::string(f->ring ? "ring" : "linear")).cell(h).cell(rad_to_deg(theta)).cell(r)
            .cell(rad_to_deg(c.half_angle)).cell(c.numerical_aperture).cell(c.geometric_efficiency);
        out.end_row();
    };
}

// fields --------------------------------------------------------------------

Action solve_field_command(CLI::App& app)
{
    struct Flags
    {
        std::string layout, x = "0um", y = "60um", z_begin = "0um", z_end = "400um", z_step = "10um";
        DriveFlags drive;
    };
    auto f = std::make_shared<Flags>();
    auto* cmd = app.add_subcommand("solve-field", "Electrode basis potentials and rf field along a line parallel to the axis");
    cmd->add_option("--layout", f->layout, "layout JSON (default: shipped layout)");
    cmd->add_option("--x", f->x)->capture_default_str();
    cmd->add_option("--y", f->y)->capture_default_str();
    cmd->add_option("--z-begin", f->z_begin)->capture_default_str();
    cmd->add_option("--z-end", f->z_end)->capture_default_str();
    cmd->add_option("--z-step", f->z_step)->capture_default_str();
    add_drive(cmd, f->drive);
    return [f](Context& ctx) {
        const fields::TrapField field(ctx.layout(f->layout));
        const fields::RfField rf(field, f->drive.params());
        const double x = quantity(f->x, "um"), y = quantity(f->y, "um");
        std::vector<std::string> header{"z_um", "x_um", "y_um"};
        for (const auto& l : field.labels())
            header.push_back("phi_" + l);
        for (const char* c : {"ex_V_per_m", "ey_V_per_m", "ez_V_per_m", "pseudo_eV"})
            header.emplace_back(c);
        CsvWriter out(ctx.output("field.csv"), header);
        for (double z : range(quantity(f->z_begin, "um"), quantity(f->z_end, "um"),
                              quantity(f->z_step, "um")))
        {
            const Eigen::Vector3d p(x, y, z);
            Eigen::VectorXd phi;
            field.basis_all(p, &phi, nullptr);
            const auto s = rf.sample(p);
            out.cell(z).cell(x).cell(y);
            for (Eigen::Index i = 0; i < phi.size(); ++i)
                out.cell(phi(i));
            out.cell(s.e_field.x()).cell(s.e_field.y()).cell(s.e_field.z()).cell(s.pseudo);
            out.end_row();
        }
    };
}

Action trace_null_command(CLI::App& app)
{
    struct Flags
    {
        std::string layout, z_begin = "0um", z_end = "600um", step = "5um", guess_y = "60um";
        DriveFlags drive;
    };
    auto f = std::make_shared<Flags>();
    auto* cmd = app.add_subcommand("trace-null", "Continuation of the rf null along the trap axis");
    cmd->add_option("--layout", f->layout, "layout JSON (default: shipped layout)");
    cmd->add_option("--z-begin", f->z_begin)->capture_default_str();
    cmd->add_option("--z-end", f->z_end)->capture_default_str();
    cmd->add_option("--step", f->step)->capture_default_str();
    cmd->add_option("--guess-y", f->guess_y, "null height guess at z-begin")->capture_default_str();
    add_drive(cmd, f->drive);
    return [f](Context& ctx) {
        const fields::TrapField field(ctx.layout(f->layout));
        const fields::RfField rf(field, f->drive.params());
        const auto contour = fields::trace_null_contour(
            rf, quantity(f->z_begin, "um"), quantity(f->z_end, "um"), quantity(f->step, "um"),
            {0.0, quantity(f->guess_y, "um")});
        CsvWriter out(ctx.output("null.csv"), {"z_um", "x_um", "y_um", "height_um", "residual_eV"});
        for (const auto& s : contour.samples)
            out.row({s.z, s.x, s.y, s.height, s.residual});
    };
}

fields::ControlOptions control_options(const std::string& axial, const std::string& bound)
{
    fields::ControlOptions c;
    c.axial_frequency = mhz_to_angular(quantity(axial, "MHz"));
    c.bound = quantity(bound, "V");
    return c;
}

Action secular_command(CLI::App& app)
{
    struct Flags
    {
        std::string layout, z = "0um", axial = "1MHz", bound = "6V", guess_y = "60um";
        DriveFlags drive;
    };
    auto f = std::make_shared<Flags>();
    auto* cmd = app.add_subcommand("secular", "Control voltages and secular frequencies of a well");
    cmd->add_option("--layout", f->layout, "layout JSON (default: shipped layout)");
    cmd->add_option("--z", f->z, "well position on the axis")->capture_default_str();
    cmd->add_option("--axial", f->axial, "target axial frequency")->capture_default_str();
    cmd->add_option("--bound", f->bound, "electrode voltage limit")->capture_default_str();
    cmd->add_option("--guess-y", f->guess_y)->capture_default_str();
    add_drive(cmd, f->drive);
    return [f](Context& ctx) {
        const fields::TrapField field(ctx.layout(f->layout));
        const fields::RfField rf(field, f->drive.params());
        const double z = quantity(f->z, "um");
        const auto opts = control_options(f->axial, f->bound);
        const double margin = 2.0 * opts.stencil_points * opts.stencil_step;
        const auto contour = fields::trace_null_contour(rf, z - margin, z + margin,
                                                        0.5 * opts.stencil_step,
                                                        {0.0, quantity(f->guess_y, "um")});
        const auto sol = fields::solve_control_voltages(rf, contour, z, opts);
        const fields::EffectivePotential u(rf, sol.voltages);
        const Eigen::Vector3d well = fields::locate_minimum(u, contour.position_at(z));
        const auto modes = fields::secular_frequencies(u, well);
        {
            CsvWriter out(ctx.output("secular.csv"),
                          {"mode", "frequency_MHz", "mode_x", "mode_y", "mode_z", "axial"});
            const int axial = fields::axial_mode(modes);
            for (int k = 0; k < 3; ++k)
            {
                out.cell(k).cell(angular_to_mhz(modes.frequencies(k)));
                for (int i = 0; i < 3; ++i)
                    out.cell(modes.modes(i, k));
                out.cell(k == axial ? 1 : 0);
                out.end_row();
            }
        }
        CsvWriter v(ctx.output("voltages.csv"), {"electrode", "volts"});
        for (std::size_t i = 0; i < field.labels().size(); ++i)
            v.cell(field.labels()[i]).cell(sol.voltages(static_cast<Eigen::Index>(i))).end_row();
        ctx.manifest.metadata["well_um"] = {well.x(), well.y(), well.z()};
        ctx.manifest.metadata["control_residual_V"] = sol.residual;
    };
}

Action waveform_command(CLI::App& app)
{
    struct Flags
    {
        std::string layout, z_start = "-150um", z_end = "150um", rate = "500kHz", axial = "1MHz",
                            bound = "6V", guess_y = "60um";
        int steps = 1000;
        bool verify = false;
        DriveFlags drive;
    };
    auto f = std::make_shared<Flags>();
    auto* cmd = app.add_subcommand("waveform", "Transport waveform along the null");
    cmd->add_option("--layout", f->layout, "layout JSON (default: shipped layout)");
    cmd->add_option("--z-start", f->z_start)->capture_default_str();
    cmd->add_option("--z-end", f->z_end)->capture_default_str();
    cmd->add_option("--steps", f->steps)->capture_default_str()->check(CLI::Range(2, 1000000));
    cmd->add_option("--rate", f->rate, "update rate")->capture_default_str();
    cmd->add_option("--axial", f->axial)->capture_default_str();
    cmd->add_option("--bound", f->bound)->capture_default_str();
    cmd->add_option("--guess-y", f->guess_y)->capture_default_str();
    cmd->add_flag("--verify", f->verify, "re-minimize every step and report tracking errors");
    add_drive(cmd, f->drive);
    return [f](Context& ctx) {
        const fields::TrapField field(ctx.layout(f->layout));
        const fields::RfField rf(field, f->drive.params());
        fields::TransportOptions opts;
        opts.n_steps = f->steps;
        opts.update_rate = quantity(f->rate, "kHz") * 1e3;
        opts.null_guess = {0.0, quantity(f->guess_y, "um")};
        opts.control = control_options(f->axial, f->bound);
        const auto w = fields::transport_waveform(rf, quantity(f->z_start, "um"),
                                                  quantity(f->z_end, "um"), opts);
        {
            std::vector<std::string> header{"step", "time_us", "z_um", "x_um", "y_um"};
            for (const auto& l : w.labels)
                header.push_back(l + "_V");
            CsvWriter out(ctx.output("waveform.csv"), header);
            for (std::size_t k = 0; k < w.steps.size(); ++k)
            {
                const auto& p = w.positions[k];
                out.cell(k).cell(1e6 * static_cast<double>(k) / w.update_rate).cell(p.z())
                    .cell(p.x()).cell(p.y());
                for (Eigen::Index i = 0; i < w.steps[k].size(); ++i)
                    out.cell(w.steps[k](i));
                out.end_row();
            }
        }
        auto& meta = ctx.manifest.metadata;
        meta["duration_s"] = w.duration();
        meta["max_abs_voltage_V"] = w.max_abs_voltage();
        meta["max_step_delta_V"] = w.max_step_delta();
        if (f->verify)
        {
            const auto t = fields::verify_tracking(rf, w);
            CsvWriter out(ctx.output("tracking.csv"), {"step", "z_um", "error_um"});
            for (std::size_t k = 0; k < t.errors.size(); ++k)
                out.cell(k).cell(w.positions[k].z()).cell(t.errors[k]).end_row();
            meta["max_tracking_error_um"] = t.max_error;
        }
    };
}

// optimize ------------------------------------------------------------------

Action optimize_command(CLI::App& app)
{
    struct Flags
    {
        std::string design;
        optimize::GAConfig ga;
        int top_k = 5;
        DriveFlags drive;
    };
    auto f = std::make_shared<Flags>();
    auto* cmd = app.add_subcommand("optimize-rails", "Genetic optimization of the inner rf edge");
    cmd->add_option("--design", f->design, "rail design JSON (default: built-in design)");
    cmd->add_option("--population", f->ga.population)->capture_default_str();
    cmd->add_option("--generations", f->ga.generations)->capture_default_str();
    cmd->add_option("--mutation-scale", f->ga.mutation_scale, "um")->capture_default_str();
    cmd->add_option("--elites", f->ga.elites)->capture_default_str();
    cmd->add_option("--top-k", f->top_k, "final pick among the k best by decay distance")
        ->capture_default_str();
    add_drive(cmd, f->drive);
    return [f](Context& ctx) {
        const fields::RailDesign base = read_design(ctx, f->design);
        optimize::GAConfig cfg = f->ga;
        cfg.seed = ctx.seed;
        cfg.threads = ctx.threads;
        const auto result = optimize::run_ga(base, f->drive.params(), cfg);
        {
            CsvWriter out(ctx.output("ga_history.csv"),
                          {"generation", "best_fitness", "median_fitness", "feasible"});
            for (const auto& g : result.history)
                out.cell(g.generation).cell(g.best).cell(g.median).cell(g.feasible).end_row();
        }
        {
            CsvWriter out(ctx.output("ga_candidates.csv"),
                          {"rank", "fitness", "null_focus_um", "decay_um", "edge_points"});
            for (std::size_t i = 0; i < result.candidates.size(); ++i)
            {
                const auto& c = result.candidates[i];
                std::string pts;
                for (const auto& p : c.genome.points)
                    pts += fmt::format("{}{:.6g}:{:.6g}", pts.empty() ? "" : " ", p.s, p.offset);
                out.cell(i).cell(c.report.fitness).cell(c.report.null_focus_distance.value_or(NAN))
                    .cell(optimize::decay_distance(c.report)).cell(pts).end_row();
            }
        }
        const auto& best = optimize::select_final(result.candidates, f->top_k);
        const auto design = optimize::apply_genome(best.genome, base);
        ctx.write_json("ga_final_design.json", nlohmann::json(design));
        fields::save_layout(fields::build_layout(design), ctx.output("ga_final_layout.json"));
        ctx.manifest.metadata["final_fitness"] = best.report.fitness;
    };
}

Action make_layout_command(CLI::App& app)
{
    auto design = std::make_shared<std::string>();
    auto name = std::make_shared<std::string>("layout.json");
    auto* cmd = app.add_subcommand("make-layout", "Electrode layout from a rail design");
    cmd->add_option("--design", *design, "rail design JSON (default: built-in design)");
    cmd->add_option("--name", *name, "output file name")->capture_default_str();
    return [design, name](Context& ctx) {
        const auto d = read_design(ctx, *design);
        fields::save_layout(fields::build_layout(d), ctx.output(*name));
    };
}

// optics --------------------------------------------------------------------

Action make_relay_command(CLI::App& app)
{
    struct Flags
    {
        bool optimize = false;
        std::string name = "relay.json";
        MirrorFlags m;
    };
    auto f = std::make_shared<Flags>();
    auto* cmd = app.add_subcommand("make-relay", "1:1 relay prescription");
    cmd->add_flag("--optimize", f->optimize, "refine lens radius, spacing and detector focus");
    cmd->add_option("--name", f->name, "output file name")->capture_default_str();
    add_mirror(cmd, f->m);
    return [f](Context& ctx) {
        optics::RelayDesign d;
        if (f->optimize)
        {
            optics::RelayFitOptions o;
            o.spot.seed = ctx.seed;
            const auto fit = optics::optimize_relay(d, optics::mirror_in_mm(f->m.spec_um()), o);
            d = fit.design;
            ctx.manifest.metadata["fit_rms_mm"] = fit.rms;
            ctx.manifest.metadata["fit_evaluations"] = fit.evaluations;
        }
        ctx.manifest.metadata["design"] = {{"lens_radius_mm", d.lens_radius},
                                           {"object_distance_mm", d.object_distance},
                                           {"separation_mm", d.separation},
                                           {"detector_shift_mm", d.detector_shift}};
        optics::save_prescription(optics::build_relay(d), ctx.output(f->name));
    };
}

optics::SpotOptions spot_options(const Context& ctx, std::size_t rays)
{
    optics::SpotOptions o;
    o.rays = rays;
    o.seed = ctx.seed;
    return o;
}

std::string to_string(optics::RayStatus s)
{
    switch (s)
    {
    case optics::RayStatus::detected: return "detected";
    case optics::RayStatus::vignetted: return "vignetted";
    case optics::RayStatus::lost: return "lost";
    }
    return "unknown";
}

Action trace_optics_command(CLI::App& app)
{
    struct Flags
    {
        std::string prescription, height = "0mm";
        std::size_t rays = 2000;
        MirrorFlags m;
    };
    auto f = std::make_shared<Flags>();
    auto* cmd = app.add_subcommand("trace-optics", "Trace mirror-reflected rays through the relay");
    cmd->add_option("--prescription", f->prescription, "relay JSON (default: shipped relay)");
    cmd->add_option("--field-height", f->height)->capture_default_str();
    cmd->add_option("--rays", f->rays)->capture_default_str();
    add_mirror(cmd, f->m);
    return [f](Context& ctx) {
        const auto p = ctx.prescription(f->prescription);
        const double h = quantity(f->height, "mm");
        MirrorSpec m = optics::mirror_in_mm(f->m.spec_um());
        m.vertex.x() += h;
        const Eigen::Vector3d ion = m.paraxial_focus();
        const auto bundle = optics::reflect_mirror(
            optics::sample_emission(ion, f->rays, ctx.seed), m, 1.0);
        const auto result = optics::trace(p, bundle);
        CsvWriter out(ctx.output("rays.csv"),
                      {"ray", "provenance", "status", "x_mm", "z_mm", "weight"});
        for (std::size_t i = 0; i < result.hits.size(); ++i)
        {
            const auto& hit = result.hits[i];
            out.cell(i)
                .cell(std::string(hit.tag == optics::Provenance::reflected ? "reflected" : "direct"))
                .cell(to_string(hit.status)).cell(hit.position.x()).cell(hit.position.y())
                .cell(hit.weight).end_row();
        }
        const auto spot = optics::analyze_spot(p, m, ion, {-h, 0.0}, spot_options(ctx, 100000));
        ctx.manifest.metadata["spot"] = {{"rms_radius_mm", spot.rms_radius},
                                         {"max_radius_mm", spot.max_radius},
                                         {"crosstalk", spot.crosstalk()}};
    };
}

Action scan_field_command(CLI::App& app)
{
    struct Flags
    {
        std::string prescription;
        std::vector<std::string> heights{"0mm", "1mm", "2mm", "3mm", "4mm", "5mm",
                                         "6mm", "7mm", "8mm", "9mm", "10mm"};
        std::string spacing = "0.5mm";
        std::size_t rays = 100000;
        MirrorFlags m;
    };
    auto f = std::make_shared<Flags>();
    auto* cmd = app.add_subcommand("scan-field", "Spot radius and cross-talk versus field height");
    cmd->add_option("--prescription", f->prescription, "relay JSON (default: shipped relay)");
    cmd->add_option("--heights", f->heights)->delimiter(',')->capture_default_str();
    cmd->add_option("--spacing", f->spacing, "mirror centre-to-centre spacing for the neighbour check")
        ->capture_default_str();
    cmd->add_option("--rays", f->rays)->capture_default_str();
    add_mirror(cmd, f->m);
    return [f](Context& ctx) {
        const auto p = ctx.prescription(f->prescription);
        const auto reports = optics::spot_vs_field_height(
            p, optics::mirror_in_mm(f->m.spec_um()), quantities(f->heights, "mm"),
            spot_options(ctx, f->rays));
        // Gap between the specular spot and the detector of a neighbouring
        // mirror; positive means no specular light reaches it.
        const double spacing = quantity(f->spacing, "mm");
        const double detector =
            p.detectors.empty() ? optics::Detector{}.radius : p.detectors.front().radius;
        CsvWriter out(ctx.output("spot_vs_field.csv"),
                      {"field_height_mm", "rms_radius_mm", "max_radius_mm", "rms_direct_mm",
                       "crosstalk", "vignetted", "neighbour_clearance_mm"});
        double clearance = std::numeric_limits<double>::infinity();
        for (const auto& r : reports)
        {
            const double c = spacing - detector - r.max_radius;
            clearance = std::min(clearance, c);
            out.row({r.field_height, r.rms_radius, r.max_radius, r.rms_direct, r.crosstalk(),
                     r.vignetted, c});
        }
        ctx.manifest.metadata["neighbour_spacing_mm"] = spacing;
        ctx.manifest.metadata["min_neighbour_clearance_mm"] = clearance;
    };
}

Action scan_misalign_command(CLI::App& app)
{
    struct Flags
    {
        std::string prescription;
        std::vector<std::string> heights{"0mm", "8mm"};
        std::vector<std::string> axial{"-4um", "-2um", "0um", "2um", "4um"};
        std::vector<std::string> vertical{"-3um", "-1.5um", "0um", "1.5um", "3um"};
        std::size_t rays = 100000;
        MirrorFlags m;
    };
    auto f = std::make_shared<Flags>();
    auto* cmd = app.add_subcommand("scan-misalign", "Spot radius versus ion displacement from the focus");
    cmd->add_option("--prescription", f->prescription, "relay JSON (default: shipped relay)");
    cmd->add_option("--field-heights", f->heights)->delimiter(',')->capture_default_str();
    cmd->add_option("--axial", f->axial, "ion shifts along z")->delimiter(',')->capture_default_str();
    cmd->add_option("--vertical", f->vertical, "ion shifts along y")->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--rays", f->rays)->capture_default_str();
    add_mirror(cmd, f->m);
    return [f](Context& ctx) {
        const auto p = ctx.prescription(f->prescription);
        const auto points = optics::misalignment_scan(
            p, optics::mirror_in_mm(f->m.spec_um()), quantities(f->heights, "mm"),
            quantities(f->axial, "um"), quantities(f->vertical, "um"), spot_options(ctx, f->rays));
        CsvWriter out(ctx.output("misalign.csv"),
                      {"field_height_mm", "axial_um", "vertical_um", "rms_radius_mm",
                       "max_radius_mm", "crosstalk"});
        for (const auto& q : points)
            out.row({q.field_height, q.axial_offset, q.vertical_offset, q.spot.rms_radius,
                     q.spot.max_radius, q.spot.crosstalk()});
    };
}

Action efficiency_command(CLI::App& app)
{
    struct Flags
    {
        std::vector<double> na{0.43, 0.14};
        double reflectivity = 0.85;
        std::size_t rays = 1000000;
        MirrorFlags m;
    };
    auto f = std::make_shared<Flags>();
    auto* cmd = app.add_subcommand("efficiency", "Monte-Carlo collection efficiency, mirror versus plane");
    cmd->add_option("--na", f->na, "relay numerical apertures")->delimiter(',')->capture_default_str();
    cmd->add_option("--reflectivity", f->reflectivity)->capture_default_str()->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--rays", f->rays)->capture_default_str();
    add_mirror(cmd, f->m);
    return [f](Context& ctx) {
        const MirrorSpec m = optics::mirror_in_mm(f->m.spec_um());
        CsvWriter out(ctx.output("efficiency.csv"),
                      {"configuration", "relay_na", "efficiency", "standard_error", "closed_form",
                       "detected", "enhancement"});
        for (double na : f->na)
        {
            optics::EfficiencyOptions o;
            o.relay_na = na;
            o.reflectivity = f->reflectivity;
            o.rays = f->rays;
            o.seed = ctx.seed;
            const auto mirror = optics::collection_efficiency(m, o);
            const auto plane = optics::planar_collection_efficiency(m.paraxial_focus().y(), o);
            const double gain = mirror.efficiency / plane.efficiency;
            out.cell(std::string("mirror")).cell(na).cell(mirror.efficiency)
                .cell(mirror.standard_error).cell(mirror.closed_form).cell(mirror.detected)
                .cell(gain).end_row();
            out.cell(std::string("planar")).cell(na).cell(plane.efficiency)
                .cell(plane.standard_error).cell(plane.closed_form).cell(plane.detected).cell(1.0)
                .end_row();
        }
    };
}

// photometry ----------------------------------------------------------------

nlohmann::json modulation_record(double ratio, double sigma)
{
    const auto& ref = photometry::reference_modulation_index;
    const auto& refr = photometry::reference_sideband_ratio;
    nlohmann::json j;
    j["sideband_ratio"] = ratio;
    j["sideband_ratio_sigma"] = sigma;
    if (ratio >= 0.0 && ratio < 1.0)
    {
        j["beta_bessel"] = photometry::modulation_index(ratio);
        j["beta_small_angle"] = 2.0 * std::sqrt(ratio);
        if (ratio - sigma >= 0.0 && ratio + sigma < 1.0)
            j["beta_bessel_range"] = {photometry::modulation_index(ratio - sigma),
                                      photometry::modulation_index(ratio + sigma)};
    }
    j["reference"] = {{"sideband_ratio", refr.value},
                      {"sideband_ratio_sigma", refr.sigma},
                      {"beta", ref.value},
                      {"beta_sigma", ref.sigma},
                      {"beta_bessel", photometry::modulation_index(refr.value)}};
    j["note"] = fmt::format(
        "beta from R = J1^2/J0^2 is {:.3f} for the reference ratio {}, while the quoted value is "
        "{} +/- {}; the mapping behind the quoted value is unstated and no correction is applied",
        photometry::modulation_index(refr.value), refr.value, ref.value, ref.sigma);
    return j;
}

nlohmann::json fit_record(const photometry::LineshapeFit& fit)
{
    nlohmann::json params;
    for (std::size_t i = 0; i < fit.parameters.size(); ++i)
        params[fit.parameters[i]] = fit.values(static_cast<Eigen::Index>(i));
    std::vector<std::vector<double>> cov;
    for (Eigen::Index i = 0; i < fit.covariance.rows(); ++i)
    {
        cov.emplace_back();
        for (Eigen::Index j = 0; j < fit.covariance.cols(); ++j)
            cov.back().push_back(fit.covariance(i, j));
    }
    return {{"parameters", params},
            {"parameter_order", fit.parameters},
            {"covariance", cov},
            {"sideband_offset_MHz", fit.model.sideband_offset},
            {"ratio", fit.ratio},
            {"ratio_sigma", fit.ratio_sigma},
            {"residual_rms", fit.residual_rms},
            {"evaluations", fit.evaluations},
            {"degenerate", fit.degenerate},
            {"modulation", modulation_record(fit.ratio, fit.ratio_sigma)}};
}

Action fit_lineshape_command(CLI::App& app)
{
    struct Flags
    {
        std::string input, offset = "62.3MHz";
        bool separate = false;
    };
    auto f = std::make_shared<Flags>();
    auto* cmd = app.add_subcommand("fit-lineshape", "Two-Lorentzian fit of a fluorescence spectrum");
    cmd->add_option("--input", f->input, "CSV with header detuning_MHz,counts")->required();
    cmd->add_option("--offset", f->offset, "sideband offset, the rf drive frequency")
        ->capture_default_str();
    cmd->add_flag("--separate-widths", f->separate, "fit carrier and sideband widths independently");
    return [f](Context& ctx) {
        ctx.manifest.add_config(f->input);
        const auto data = read_two_column(f->input, {"detuning_MHz", "counts"});
        std::vector<photometry::SpectrumSample> samples;
        for (std::size_t i = 0; i < data.first.size(); ++i)
            samples.push_back({data.first[i], data.second[i]});
        photometry::FitOptions o;
        o.sideband_offset = quantity(f->offset, "MHz");
        o.shared_width = !f->separate;
        const auto fit = photometry::fit_lineshape(samples, o);
        const auto record = fit_record(fit);
        ctx.write_json("lineshape.json", record);
        CsvWriter out(ctx.output("lineshape_model.csv"), {"detuning_MHz", "counts", "model"});
        for (const auto& s : samples)
            out.row({s.detuning, s.counts, photometry::eval_lineshape(fit.model, s.detuning)});
        ctx.manifest.metadata["modulation"] = record["modulation"];
    };
}

photometry::AxialScan read_scan(Context& ctx, const std::string& path, const char* column)
{
    ctx.manifest.add_config(path);
    const auto c = read_two_column(path, {"z_um", column});
    return {c.first, c.second};
}

Action enhancement_command(CLI::App& app)
{
    struct Flags
    {
        std::string input, reference, correction;
    };
    auto f = std::make_shared<Flags>();
    auto* cmd = app.add_subcommand("enhancement", "Collection intensity relative to a far-field baseline");
    cmd->add_option("--input", f->input, "CSV z_um,counts along the mirror")->required();
    cmd->add_option("--reference", f->reference, "CSV z_um,counts far from the mirror")->required();
    cmd->add_option("--correction", f->correction, "CSV z_um,response of the detector aperture");
    return [f](Context& ctx) {
        const auto counts = read_scan(ctx, f->input, "counts");
        const auto reference = read_scan(ctx, f->reference, "counts");
        const auto correction =
            f->correction.empty() ? photometry::AxialScan{} : read_scan(ctx, f->correction, "response");
        const auto p = photometry::enhancement_profile(counts, reference, correction);
        CsvWriter out(ctx.output("enhancement.csv"), {"z_um", "relative", "correction"});
        for (std::size_t i = 0; i < p.z.size(); ++i)
            out.row({p.z[i], p.relative[i], p.correction[i]});
        ctx.manifest.metadata["baseline"] = p.baseline;
        ctx.manifest.metadata["peak"] = p.peak;
        ctx.manifest.metadata["peak_z_um"] = p.peak_z;
    };
}

Action reproduce_command(CLI::App& app)
{
    auto id = std::make_shared<std::string>();
    auto rays = std::make_shared<std::size_t>(100000);
    auto* cmd = app.add_subcommand("reproduce", "Plot-ready data for one figure");
    cmd->add_option("--figure", *id, "figure id")->required()->check(CLI::IsMember(figure_ids()));
    cmd->add_option("--rays", *rays, "rays per optics evaluation")->capture_default_str();
    return [id, rays](Context& ctx) { reproduce_figure(ctx, *id, *rays); };
}

} // namespace

int run(int argc, const char* const* argv)
{
    CLI::App app{"Micromirror ion trap design and analysis"};
    app.set_version_flag("--version", MICROTRAP_VERSION);
    app.require_subcommand(1);
    Context ctx;
    std::string out_dir = ".";
    std::string data_dir = MICROTRAP_DATA_DIR;
    app.add_option("--seed", ctx.seed, "random seed")->capture_default_str();
    app.add_option("--threads", ctx.threads, "worker threads")->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--out-dir", out_dir, "output directory")->capture_default_str();
    app.add_option("--data-dir", data_dir, "shipped layout and relay")->capture_default_str();

    std::vector<Action> actions;
    for (auto make : {analytic_command, solve_field_command, trace_null_command, secular_command,
                      waveform_command, optimize_command, make_layout_command, make_relay_command,
                      trace_optics_command, scan_field_command, scan_misalign_command,
                      efficiency_command, fit_lineshape_command, enhancement_command,
                      reproduce_command})
        actions.push_back(make(app));
    const auto subcommands = app.get_subcommands([](const CLI::App*) { return true; });

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const auto start = std::chrono::steady_clock::now();
    try
    {
        ctx.out_dir = out_dir;
        ctx.data_dir = data_dir;
        std::filesystem::create_directories(ctx.out_dir);
        for (std::size_t k = 0; k < actions.size(); ++k)
        {
            if (!subcommands[k]->parsed())
                continue;
            ctx.manifest.command = subcommands[k]->get_name();
            for (int i = 1; i < argc; ++i)
                ctx.manifest.arguments.emplace_back(argv[i]);
            ctx.manifest.seed = ctx.seed;
            ctx.manifest.threads = ctx.threads;
            ctx.manifest.version = MICROTRAP_VERSION;
            actions[k](ctx);
        }
        for (auto& o : ctx.manifest.outputs)
            o.hash = file_hash(ctx.out_dir / o.name);
        ctx.manifest.wall_time =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::ofstream out(ctx.out_dir / (ctx.manifest.command + ".manifest.json"));
        out << manifest_to_json(ctx.manifest).dump(2) << '\n';
        for (const auto& o : ctx.manifest.outputs)
            std::cout << (ctx.out_dir / o.name).string() << '\n';
        return 0;
    }
    catch (const ConfigError& e)
    {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    }
    catch (const DomainError& e)
    {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    }
    catch (const Error& e)
    {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 1;
    }
    catch (const std::filesystem::filesystem_error& e)
    {
        std::cerr << "file error: " << e.what() << '\n';
        return 2;
    }
}

} // namespace microtrap::cli
