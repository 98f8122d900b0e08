#include "microtrap/fields/layout.hpp"

#include "microtrap/errors.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <fstream>

namespace microtrap::fields
{
namespace
{
using nlohmann::json;

double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                              const Eigen::Vector2d& b)
{
    const Eigen::Vector2d ab = b - a;
    const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    return (a + t * ab - p).norm();
}

const json& require(const json& j, const char* key, const std::string& where)
{
    if (!j.is_object() || !j.contains(key))
        throw ConfigError(fmt::format("{}: missing field '{}'", where, key));
    return j.at(key);
}

double number(const json& j, const std::string& where)
{
    if (!j.is_number())
        throw ConfigError(fmt::format("{}: expected a number", where));
    return j.get<double>();
}

Polygon polygon_from_json(const json& j, const std::string& where)
{
    const double layer = j.contains("layer") ? number(j.at("layer"), where + ".layer") : 0.0;
    const json& verts = require(j, "vertices", where);
    if (!verts.is_array())
        throw ConfigError(fmt::format("{}.vertices: expected an array", where));
    std::vector<Eigen::Vector2d> loop;
    for (std::size_t i = 0; i < verts.size(); ++i)
    {
        const std::string at = fmt::format("{}.vertices[{}]", where, i);
        if (!verts[i].is_array() || verts[i].size() != 2)
            throw ConfigError(fmt::format("{}: expected an [x, z] pair", at));
        loop.emplace_back(number(verts[i][0], at), number(verts[i][1], at));
    }
    try
    {
        return Polygon(std::move(loop), layer);
    }
    catch (const DomainError& e)
    {
        throw ConfigError(fmt::format("{}: {}", where, e.what()));
    }
}

json polygon_to_json(const Polygon& p)
{
    json verts = json::array();
    for (const auto& v : p.vertices())
        verts.push_back({v.x(), v.y()});
    return {{"layer", p.layer()}, {"vertices", verts}};
}

} // namespace

std::vector<std::string> TrapLayout::labels() const
{
    std::vector<std::string> out;
    for (const auto& e : electrodes)
        if (std::find(out.begin(), out.end(), e.label) == out.end())
            out.push_back(e.label);
    out.push_back(fill);
    return out;
}

bool TrapLayout::is_rf(const std::string& label) const { return label.rfind("rf", 0) == 0; }

void TrapLayout::validate() const
{
    if (electrodes.empty())
        throw DomainError("layout has no electrodes");
    bool has_rf = false;
    for (std::size_t i = 0; i < electrodes.size(); ++i)
    {
        const auto& e = electrodes[i];
        if (e.label == fill)
            throw DomainError(fmt::format("electrode {} uses the fill label '{}'", i, fill));
        if (!e.polygon.is_simple())
            throw SelfIntersectionError(
                fmt::format("electrode {} ('{}') is self-intersecting", i, e.label));
        has_rf = has_rf || is_rf(e.label);
    }
    if (!has_rf)
        throw DomainError("layout has no rf electrode");
    if (is_rf(fill))
        throw DomainError("the fill electrode cannot carry rf");

    if (mirror)
    {
        const auto& m = mirror->spec;
        m.validate();
        if (is_rf(mirror->host) || mirror->host == fill)
            throw DomainError("the mirror must be hosted by a dc electrode");
        const Eigen::Vector2d axis(m.vertex.x(), m.vertex.z());
        bool hosted = false;
        for (const auto& e : electrodes)
        {
            const auto& v = e.polygon.vertices();
            for (std::size_t i = 0; i < v.size(); ++i)
            {
                const double d = point_segment_distance(axis, v[i], v[(i + 1) % v.size()]);
                if (d < m.aperture_radius)
                    throw DomainError(fmt::format(
                        "electrode '{}' has an edge {:.3f} um from the mirror axis, inside the "
                        "{:.3f} um aperture",
                        e.label, d, m.aperture_radius));
            }
            if (e.label == mirror->host && e.polygon.contains(axis))
            {
                hosted = true;
                if (std::abs(e.polygon.layer() - m.rim_height()) > 1e-9)
                    throw DomainError("mirror rim must lie in the host electrode layer");
            }
        }
        if (!hosted)
            throw DomainError(
                fmt::format("mirror is not inside its host electrode '{}'", mirror->host));
    }
}

TrapLayout layout_from_json(const json& j)
{
    if (!j.is_object())
        throw ConfigError("layout: expected a JSON object");
    const std::string units = require(j, "units", "layout").get<std::string>();
    if (units != "um")
        throw ConfigError(fmt::format("layout.units: expected 'um', got '{}'", units));

    TrapLayout layout;
    if (j.contains("fill"))
        layout.fill = j.at("fill").get<std::string>();
    const json& electrodes = require(j, "electrodes", "layout");
    if (!electrodes.is_array())
        throw ConfigError("layout.electrodes: expected an array");
    for (std::size_t i = 0; i < electrodes.size(); ++i)
    {
        const std::string where = fmt::format("layout.electrodes[{}]", i);
        const json& label = require(electrodes[i], "label", where);
        if (!label.is_string())
            throw ConfigError(where + ".label: expected a string");
        layout.electrodes.push_back({label.get<std::string>(), polygon_from_json(electrodes[i], where)});
    }
    if (j.contains("mirror") && !j.at("mirror").is_null())
    {
        const json& m = j.at("mirror");
        const std::string where = "layout.mirror";
        EmbeddedMirror em;
        em.spec.roc = number(require(m, "roc", where), where + ".roc");
        em.spec.aperture_radius =
            number(require(m, "aperture_radius", where), where + ".aperture_radius");
        const json& c = require(m, "center", where);
        if (!c.is_array() || c.size() != 3)
            throw ConfigError(where + ".center: expected [x, y, z] of the mirror vertex");
        em.spec.vertex = {number(c[0], where + ".center"), number(c[1], where + ".center"),
                          number(c[2], where + ".center")};
        em.spec.sag = m.contains("sag") ? number(m.at("sag"), where + ".sag")
                                        : em.spec.roc - std::sqrt(em.spec.roc * em.spec.roc -
                                                                  em.spec.aperture_radius *
                                                                      em.spec.aperture_radius);
        em.host = require(m, "host", where).get<std::string>();
        layout.mirror = em;
    }
    if (j.contains("loading_slot") && !j.at("loading_slot").is_null())
        layout.loading_slot = polygon_from_json(j.at("loading_slot"), "layout.loading_slot");
    if (j.contains("rail_design") && !j.at("rail_design").is_null())
        layout.rail_design = j.at("rail_design").get<RailDesign>();
    try
    {
        layout.validate();
    }
    catch (const DomainError& e)
    {
        throw ConfigError(fmt::format("layout: {}", e.what()));
    }
    return layout;
}

json layout_to_json(const TrapLayout& layout)
{
    json electrodes = json::array();
    for (const auto& e : layout.electrodes)
    {
        json item = polygon_to_json(e.polygon);
        item["label"] = e.label;
        electrodes.push_back(item);
    }
    json j = {{"units", "um"}, {"fill", layout.fill}, {"electrodes", electrodes}};
    if (layout.mirror)
    {
        const auto& m = layout.mirror->spec;
        j["mirror"] = {{"roc", m.roc},
                       {"aperture_radius", m.aperture_radius},
                       {"sag", m.sag},
                       {"center", {m.vertex.x(), m.vertex.y(), m.vertex.z()}},
                       {"host", layout.mirror->host}};
    }
    if (layout.loading_slot)
        j["loading_slot"] = polygon_to_json(*layout.loading_slot);
    if (layout.rail_design)
        j["rail_design"] = *layout.rail_design;
    return j;
}

TrapLayout load_layout(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError(fmt::format("cannot open layout file '{}'", path.string()));
    json j;
    try
    {
        in >> j;
    }
    catch (const json::exception& e)
    {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
    try
    {
        return layout_from_json(j);
    }
    catch (const json::exception& e)
    {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

void save_layout(const TrapLayout& layout, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw ConfigError(fmt::format("cannot write layout file '{}'", path.string()));
    out << layout_to_json(layout).dump(1) << '\n';
}

} // namespace microtrap::fields
