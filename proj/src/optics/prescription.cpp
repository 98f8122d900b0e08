#include "microtrap/optics/prescription.hpp"

#include "microtrap/errors.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fstream>

namespace microtrap::optics
{
void OpticalPrescription::validate() const
{
    if (surfaces.empty() || surfaces.back().kind != SurfaceKind::detector_plane)
        throw DomainError("prescription must end with a detector plane");
    double previous = object.y();
    double direction = 1.0;
    for (std::size_t i = 0; i < surfaces.size(); ++i)
    {
        const OpticalSurface& s = surfaces[i];
        if (!(s.aperture > 0.0))
            throw DomainError(fmt::format("surface {}: aperture must be positive", i));
        if (s.kind == SurfaceKind::detector_plane && i + 1 != surfaces.size())
            throw DomainError(fmt::format("surface {}: detector plane before the last surface", i));
        if (s.kind == SurfaceKind::plane_refractor && s.radius != 0.0)
            throw DomainError(fmt::format("surface {}: plane refractor with a radius", i));
        if (!(s.index_after >= 1.0))
            throw DomainError(fmt::format("surface {}: refractive index below 1", i));
        if (!((s.position - previous) * direction > 0.0))
            throw DomainError(
                fmt::format("surface {}: positions must advance along the propagation direction", i));
        previous = s.position;
        if (s.kind == SurfaceKind::spherical_mirror)
            direction = -direction;
    }
    for (const auto& d : detectors)
        if (!(d.radius > 0.0))
            throw DomainError("detector radius must be positive");
}

std::string to_string(SurfaceKind k)
{
    switch (k)
    {
    case SurfaceKind::spherical_mirror: return "spherical_mirror";
    case SurfaceKind::spherical_refractor: return "spherical_refractor";
    case SurfaceKind::plane_refractor: return "plane_refractor";
    case SurfaceKind::aperture_stop: return "aperture_stop";
    case SurfaceKind::detector_plane: return "detector_plane";
    }
    return "unknown";
}

SurfaceKind surface_kind_from_string(const std::string& s)
{
    for (const auto k : {SurfaceKind::spherical_mirror, SurfaceKind::spherical_refractor,
                         SurfaceKind::plane_refractor, SurfaceKind::aperture_stop,
                         SurfaceKind::detector_plane})
        if (to_string(k) == s)
            return k;
    throw ConfigError(fmt::format("unknown surface kind '{}'", s));
}

nlohmann::json prescription_to_json(const OpticalPrescription& p)
{
    p.validate();
    nlohmann::json surfaces = nlohmann::json::array();
    for (std::size_t i = 0; i < p.surfaces.size(); ++i)
    {
        const OpticalSurface& s = p.surfaces[i];
        const double next = i + 1 < p.surfaces.size() ? p.surfaces[i + 1].position : s.position;
        surfaces.push_back({{"kind", to_string(s.kind)},
                            {"radius", s.radius},
                            {"aperture", s.aperture},
                            {"thickness", next - s.position},
                            {"index", s.index_after}});
    }
    nlohmann::json detectors = nlohmann::json::array();
    for (const auto& d : p.detectors)
        detectors.push_back({{"center", {d.center.x(), d.center.y()}}, {"radius", d.radius}});
    return {{"units", "mm"},
            {"object", {p.object.x(), p.object.y(), p.object.z()}},
            {"object_distance", p.surfaces.front().position - p.object.y()},
            {"surfaces", surfaces},
            {"detectors", detectors}};
}

OpticalPrescription prescription_from_json(const nlohmann::json& j)
{
    OpticalPrescription p;
    try
    {
        if (j.value("units", "mm") != "mm")
            throw ConfigError("prescription: units must be \"mm\"");
        if (j.contains("object"))
        {
            const auto& o = j.at("object");
            p.object = {o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()};
        }
        double y = p.object.y() + j.at("object_distance").get<double>();
        const auto& surfaces = j.at("surfaces");
        for (std::size_t i = 0; i < surfaces.size(); ++i)
        {
            const auto& s = surfaces.at(i);
            OpticalSurface surf;
            try
            {
                surf.kind = surface_kind_from_string(s.at("kind").get<std::string>());
            }
            catch (const ConfigError& e)
            {
                throw ConfigError(fmt::format("prescription.surfaces[{}]: {}", i, e.what()));
            }
            surf.radius = s.value("radius", 0.0);
            surf.aperture = s.at("aperture").get<double>();
            surf.index_after = s.value("index", 1.0);
            surf.position = y;
            y += s.value("thickness", 0.0);
            p.surfaces.push_back(surf);
        }
        if (j.contains("detectors"))
        {
            p.detectors.clear();
            for (const auto& d : j.at("detectors"))
                p.detectors.push_back({{d.at("center").at(0).get<double>(),
                                        d.at("center").at(1).get<double>()},
                                       d.value("radius", 0.25)});
        }
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ConfigError(fmt::format("prescription: {}", e.what()));
    }
    try
    {
        p.validate();
    }
    catch (const DomainError& e)
    {
        throw ConfigError(fmt::format("prescription: {}", e.what()));
    }
    return p;
}

OpticalPrescription load_prescription(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError(fmt::format("cannot open prescription '{}'", path.string()));
    nlohmann::json j;
    try
    {
        in >> j;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return prescription_from_json(j);
}

void save_prescription(const OpticalPrescription& p, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw ConfigError(fmt::format("cannot write prescription '{}'", path.string()));
    out << prescription_to_json(p).dump(1) << '\n';
}

Eigen::Matrix2d paraxial_matrix(const OpticalPrescription& p, double from)
{
    Eigen::Matrix2d m = Eigen::Matrix2d::Identity();
    double y = from;
    double n = 1.0;
    for (const auto& s : p.surfaces)
    {
        Eigen::Matrix2d t;
        t << 1.0, std::abs(s.position - y), 0.0, 1.0;
        m = t * m;
        y = s.position;
        Eigen::Matrix2d r = Eigen::Matrix2d::Identity();
        switch (s.kind)
        {
        case SurfaceKind::spherical_refractor:
        case SurfaceKind::plane_refractor:
        {
            const double power = s.radius == 0.0 ? 0.0 : (s.index_after - n) / s.radius;
            r << 1.0, 0.0, -power / s.index_after, n / s.index_after;
            n = s.index_after;
            break;
        }
        case SurfaceKind::spherical_mirror:
            // Unfolded: a mirror acts as a lens of power 2/R.
            if (s.radius != 0.0)
                r << 1.0, 0.0, 2.0 / s.radius, 1.0;
            break;
        default:
            break;
        }
        m = r * m;
    }
    return m;
}

} // namespace microtrap::optics
