#include "microtrap/fields/rail_design.hpp"

#include "microtrap/analytic.hpp"
#include "microtrap/errors.hpp"
#include "microtrap/fields/layout.hpp"
#include "microtrap/spline.hpp"
#include "microtrap/units.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace microtrap::fields
{
namespace
{
using constants::pi;


double edge_value(const RailDesign& d, const ClampedSpline& delta, double z, double* slope)
{
    const double az = std::abs(z);
    const double sign = z < 0.0 ? -1.0 : 1.0;
    const double R = d.wrap_half_gap;
    const double zw = R * std::sin(d.wrap_angle);
    double e = d.linear_half_gap;
    double de = 0.0;
    if (az <= zw)
    {
        e = std::sqrt(R * R - az * az);
        de = -sign * az / e;
    }
    else if (az < zw + d.taper_length)
    {
        const double T = d.taper_length;
        const double e0 = R * std::cos(d.wrap_angle);
        const double s0 = -std::tan(d.wrap_angle);
        const double t = (az - zw) / T;
        const double h00 = 2 * t * t * t - 3 * t * t + 1;
        const double h10 = t * t * t - 2 * t * t + t;
        const double h01 = -2 * t * t * t + 3 * t * t;
        const double d00 = 6 * t * t - 6 * t;
        const double d10 = 3 * t * t - 4 * t + 1;
        const double d01 = -6 * t * t + 6 * t;
        e = h00 * e0 + h10 * T * s0 + h01 * d.linear_half_gap;
        de = sign * (d00 * e0 / T + d10 * s0 + d01 * d.linear_half_gap / T);
    }
    if (!delta.empty() && az < d.edge_span)
    {
        e += delta(z);
        de += delta.derivative(z);
    }
    if (slope)
        *slope = de;
    return e;
}

std::vector<double> sample_z(const RailDesign& d)
{
    const double curved = d.wrap_half_gap * std::sin(d.wrap_angle) + d.taper_length;
    const double spline = std::max(curved, d.edge_span);
    std::vector<double> z;
    const auto run = [&](double from, double to, double step) {
        if (!(to > from))
            return;
        const int n = std::max(1, static_cast<int>(std::ceil((to - from) / step)));
        for (int i = 0; i < n; ++i)
            z.push_back(from + (to - from) * i / n);
    };
    run(-d.rail_extent, -spline, d.coarse_step);
    run(-spline, -curved, d.spline_step);
    run(-curved, curved, d.fine_step);
    run(curved, spline, d.spline_step);
    run(spline, d.rail_extent, d.coarse_step);
    z.push_back(d.rail_extent);
    return z;
}

double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                              const Eigen::Vector2d& b)
{
    const Eigen::Vector2d ab = b - a;
    const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    return (a + t * ab - p).norm();
}

// Linear interpolation of the x coordinate of a z-monotone polyline.
double x_at(const std::vector<Eigen::Vector2d>& line, double z)
{
    const auto it = std::lower_bound(line.begin(), line.end(), z,
                                     [](const Eigen::Vector2d& v, double zz) { return v.y() < zz; });
    if (it == line.begin())
        return it->x();
    if (it == line.end())
        return line.back().x();
    const auto& b = *it;
    const auto& a = *(it - 1);
    return a.x() + (b.x() - a.x()) * (z - a.y()) / (b.y() - a.y());
}

Eigen::Vector2d flip(const Eigen::Vector2d& v) { return {-v.x(), v.y()}; }

} // namespace

ClampedSpline edge_perturbation(const std::vector<EdgePoint>& points, double span)
{
    if (points.empty())
        return {};
    std::vector<EdgePoint> pts = points;
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.s < b.s; });
    std::vector<double> x{-span};
    std::vector<double> y{0.0};
    for (auto it = pts.rbegin(); it != pts.rend(); ++it)
    {
        if (it->s == 0.0)
            continue;
        x.push_back(-it->s);
        y.push_back(it->offset);
    }
    for (const auto& p : pts)
    {
        x.push_back(p.s);
        y.push_back(p.offset);
    }
    x.push_back(span);
    y.push_back(0.0);
    return ClampedSpline(std::move(x), std::move(y), 0.0, 0.0);
}

void RailDesign::validate() const
{
    if (!(linear_half_gap > 0.0 && wrap_half_gap > 0.0 && rail_width > 0.0 &&
          taper_length > 0.0 && fine_step > 0.0 && spline_step > 0.0 && coarse_step > 0.0))
        throw DomainError("rail design: gaps, width, lengths and steps must be positive");
    if (!(wrap_angle >= 0.0 && wrap_angle < 0.5 * pi))
        throw DomainError("rail design: wrap angle must lie in [0, pi/2)");
    if (!(wrap_half_gap * std::sin(wrap_angle) + taper_length < rail_extent))
        throw DomainError("rail design: wrap and taper must end inside the rails");
    if (!(edge_span > 0.0 && edge_span < rail_extent))
        throw DomainError("rail design: edge span must lie inside the rail extent");
    for (std::size_t i = 0; i < edge_points.size(); ++i)
    {
        const double s = edge_points[i].s;
        if (!(s >= 0.0 && s < edge_span))
            throw DomainError(
                fmt::format("rail design: edge point s = {} outside [0, {})", s, edge_span));
        for (std::size_t j = 0; j < i; ++j)
            if (edge_points[j].s == s)
                throw DomainError(fmt::format("rail design: duplicate edge point s = {}", s));
    }
    if (dc_per_side < 1 || !(dc_pitch > 0.0) ||
        !(dc_outer_x > linear_half_gap + rail_width + 1.0))
        throw DomainError("rail design: invalid dc electrode segmentation");
    const double half_span = 0.5 * dc_per_side * dc_pitch;
    if (half_span >= rail_extent)
        throw DomainError("rail design: dc electrodes extend beyond the rails");

    // The inner rf edge must clear the aperture plus shelf and isolation gap.
    const double clearance = mirror_aperture + keepout_margin;
    const ClampedSpline delta = edge_perturbation(edge_points, edge_span);
    for (double z = -clearance; z <= clearance; z += 0.25)
    {
        const double e = edge_value(*this, delta, z, nullptr);
        if (e * e + z * z < clearance * clearance - 1e-9)
            throw DomainError(fmt::format(
                "rail design: inner rf edge at z = {} um intrudes into the mirror keep-out", z));
    }
}

double inner_edge(const RailDesign& d, double z, double* slope)
{
    return edge_value(d, edge_perturbation(d.edge_points, d.edge_span), z, slope);
}

RailEdges rail_edges(const RailDesign& d)
{
    const ClampedSpline delta = edge_perturbation(d.edge_points, d.edge_span);
    RailEdges edges;
    for (double z : sample_z(d))
    {
        double slope = 0.0;
        const double e = edge_value(d, delta, z, &slope);
        const Eigen::Vector2d in(e, z);
        const Eigen::Vector2d normal = Eigen::Vector2d(1.0, -slope).normalized();
        edges.inner.push_back(in);
        edges.outer.push_back(in + d.rail_width * normal);
    }
    for (std::size_t i = 1; i < edges.outer.size(); ++i)
        if (!(edges.outer[i].y() > edges.outer[i - 1].y()))
            throw SelfIntersectionError(fmt::format(
                "outer rf edge folds back near z = {:.3f} um", edges.outer[i].y()));
    for (std::size_t i = 1; i < edges.inner.size(); ++i)
        if (!(edges.inner[i].x() > 0.0))
            throw SelfIntersectionError("inner rf edge crosses the trap axis");
    return edges;
}

double width_deviation(const RailEdges& edges, double width)
{
    double worst = 0.0;
    const auto& in = edges.inner;
    std::size_t lo = 0;
    for (const auto& p : edges.outer)
    {
        // Restrict the search to inner segments within one width in z.
        while (lo + 1 < in.size() && in[lo + 1].y() < p.y() - 2.0 * width)
            ++lo;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = lo; i + 1 < in.size() && in[i].y() <= p.y() + 2.0 * width; ++i)
            best = std::min(best, point_segment_distance(p, in[i], in[i + 1]));
        worst = std::max(worst, std::abs(best - width));
    }
    return worst;
}

TrapLayout build_layout(const RailDesign& d)
{
    d.validate();
    const RailEdges edges = rail_edges(d);
    const auto& inner = edges.inner;
    const auto& outer = edges.outer;

    TrapLayout layout;
    layout.rail_design = d;

    // rf rails at +x and -x.
    std::vector<Eigen::Vector2d> rail(inner);
    rail.insert(rail.end(), outer.rbegin(), outer.rend());
    std::vector<Eigen::Vector2d> rail_neg;
    for (const auto& v : rail)
        rail_neg.push_back(flip(v));
    layout.electrodes.push_back({"rf", Polygon(rail)});
    layout.electrodes.push_back({"rf", Polygon(rail_neg)});

    // Central dc electrode between the rails; hosts the mirror.
    std::vector<Eigen::Vector2d> center(inner);
    for (auto it = inner.rbegin(); it != inner.rend(); ++it)
        center.push_back(flip(*it));
    layout.electrodes.push_back({"center", Polygon(center)});

    // Segmented control electrodes, bounded on the inside by the rail outer edge.
    const double z0 = -0.5 * d.dc_per_side * d.dc_pitch;
    for (int side = 0; side < 2; ++side)
    {
        for (int k = 0; k < d.dc_per_side; ++k)
        {
            const double lo = z0 + k * d.dc_pitch;
            const double hi = lo + d.dc_pitch;
            std::vector<Eigen::Vector2d> poly{{x_at(outer, lo), lo}};
            for (const auto& v : outer)
                if (v.y() > lo + 1e-9 && v.y() < hi - 1e-9)
                    poly.push_back(v);
            poly.emplace_back(x_at(outer, hi), hi);
            poly.emplace_back(d.dc_outer_x, hi);
            poly.emplace_back(d.dc_outer_x, lo);
            if (side == 1)
                for (auto& v : poly)
                    v = flip(v);
            const int index = side * d.dc_per_side + k + 1;
            layout.electrodes.push_back({fmt::format("dc{:02d}", index), Polygon(poly)});
        }
    }
    layout.fill = "gnd";
    layout.mirror = EmbeddedMirror{MirrorSpec::from_rim(d.mirror_roc, d.mirror_aperture), "center"};
    return layout;
}

void to_json(nlohmann::json& j, const RailDesign& d)
{
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : d.edge_points)
        pts.push_back({p.s, p.offset});
    j = {{"linear_half_gap", d.linear_half_gap},
         {"wrap_half_gap", d.wrap_half_gap},
         {"wrap_angle", d.wrap_angle},
         {"taper_length", d.taper_length},
         {"rail_width", d.rail_width},
         {"rail_extent", d.rail_extent},
         {"mirror_roc", d.mirror_roc},
         {"mirror_aperture", d.mirror_aperture},
         {"keepout_margin", d.keepout_margin},
         {"edge_span", d.edge_span},
         {"edge_points", pts},
         {"dc_per_side", d.dc_per_side},
         {"dc_pitch", d.dc_pitch},
         {"dc_outer_x", d.dc_outer_x},
         {"fine_step", d.fine_step},
         {"spline_step", d.spline_step},
         {"coarse_step", d.coarse_step}};
}

void from_json(const nlohmann::json& j, RailDesign& d)
{
    const auto get = [&](const char* key, auto& field) {
        if (j.contains(key))
            j.at(key).get_to(field);
    };
    get("linear_half_gap", d.linear_half_gap);
    get("wrap_half_gap", d.wrap_half_gap);
    get("wrap_angle", d.wrap_angle);
    get("taper_length", d.taper_length);
    get("rail_width", d.rail_width);
    get("rail_extent", d.rail_extent);
    get("mirror_roc", d.mirror_roc);
    get("mirror_aperture", d.mirror_aperture);
    get("keepout_margin", d.keepout_margin);
    get("edge_span", d.edge_span);
    get("dc_per_side", d.dc_per_side);
    get("dc_pitch", d.dc_pitch);
    get("dc_outer_x", d.dc_outer_x);
    get("fine_step", d.fine_step);
    get("spline_step", d.spline_step);
    get("coarse_step", d.coarse_step);
    d.edge_points.clear();
    if (j.contains("edge_points"))
        for (const auto& p : j.at("edge_points"))
            d.edge_points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
}

} // namespace microtrap::fields
