#pragma once

#include "microtrap/cli/manifest.hpp"
#include "microtrap/fields/layout.hpp"
#include "microtrap/fields/pseudopotential.hpp"
#include "microtrap/mirror.hpp"
#include "microtrap/optics/prescription.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace microtrap::cli
{
struct Context
{
    std::filesystem::path out_dir = ".";
    std::filesystem::path data_dir;
    std::uint64_t seed = 1;
    int threads = 1;
    RunManifest manifest;

    /// Registers `name` as an output of this run and returns its path.
    std::filesystem::path output(const std::string& name);
    void write_json(const std::string& name, const nlohmann::json& j);

    fields::TrapLayout layout(const std::string& path);
    optics::OpticalPrescription prescription(const std::string& path);
    nlohmann::json read_json(const std::filesystem::path& path);
};

/// Quantity with a required unit suffix, e.g. "63um".
double quantity(const std::string& text, const char* unit);
std::vector<double> quantities(const std::vector<std::string>& texts, const char* unit);
/// begin, end inclusive, step; the last sample is clamped to end.
std::vector<double> range(double begin, double end, double step);

struct DriveFlags
{
    std::string amplitude = "200V";
    std::string frequency = "62.3MHz";

    [[nodiscard]] fields::DriveParams params() const;
};

struct MirrorFlags
{
    std::string roc = "150um";
    std::string aperture = "60um";

    [[nodiscard]] MirrorSpec spec_um() const;
};

/// Table of residual and height along the null for the design iterations.
struct NullTableRow
{
    std::string design;
    double z = 0.0;
    double height = 0.0;
    double residual = 0.0;
};
std::vector<NullTableRow> design_iteration_nulls(const fields::TrapLayout& shipped,
                                                 const fields::DriveParams& drive, double z_end,
                                                 double step);

} // namespace microtrap::cli
