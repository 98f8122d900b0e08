#pragma once

#include "microtrap/fields/polygon.hpp"
#include "microtrap/fields/rail_design.hpp"
#include "microtrap/mirror.hpp"

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace microtrap::fields
{
struct Electrode
{
    std::string label;
    Polygon polygon;
};

struct EmbeddedMirror
{
    MirrorSpec spec;
    std::string host; // label of the dc electrode whose surface forms the mirror
};

/// Layered electrode map. Several polygons may share a label (one electrode,
/// e.g. the two rf rails). The plane outside every polygon belongs to the
/// `fill` electrode, which is usually ground.
struct TrapLayout
{
    std::vector<Electrode> electrodes;
    std::string fill = "gnd";
    std::optional<EmbeddedMirror> mirror;
    std::optional<Polygon> loading_slot;
    std::optional<RailDesign> rail_design; // recipe the polygons were generated from

    /// Distinct labels in order of first appearance, fill label last.
    [[nodiscard]] std::vector<std::string> labels() const;
    [[nodiscard]] bool is_rf(const std::string& label) const;

    /// Throws DomainError on self-intersecting polygons, missing rf rails,
    /// or electrode edges inside the mirror aperture.
    void validate() const;
};

[[nodiscard]] TrapLayout layout_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json layout_to_json(const TrapLayout& layout);

/// Throws ConfigError naming the offending field on schema violations.
[[nodiscard]] TrapLayout load_layout(const std::filesystem::path& path);
void save_layout(const TrapLayout& layout, const std::filesystem::path& path);

} // namespace microtrap::fields
