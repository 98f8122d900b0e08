#pragma once

#include "microtrap/fields/layout.hpp"
#include "microtrap/fields/null_contour.hpp"
#include "microtrap/fields/pseudopotential.hpp"
#include "microtrap/fields/rail_design.hpp"
#include "microtrap/fields/trap_field.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace microtrap::optimize
{
/// Axial window of the fitness integral, relative to the mirror centre
/// (or z = 0 without a mirror).
struct FitnessRange
{
    double z_begin = 0.0;
    double z_end = 400.0;
    double step = 2.0;
};

struct FitnessOptions
{
    FitnessRange range;
    double focus_tolerance = 0.25; // um
    double width_tolerance = 0.01; // um
    double guess_height = 60.0;    // null search start without a mirror, um
    fields::FieldOptions field;
    fields::NullOptions null;
};

struct FitnessReport
{
    double fitness = std::numeric_limits<double>::infinity(); // (V/m)^4 / um
    std::vector<std::string> constraint_violations;
    std::optional<double> null_focus_distance; // um, empty without a mirror
    double width_deviation = 0.0;              // um
    // |E_rf| along the traced null, for final selection.
    std::vector<double> profile_z;       // um from the mirror centre
    std::vector<double> profile_field;   // V/m

    [[nodiscard]] bool feasible() const { return constraint_violations.empty(); }
};

/// Integral of [d(E^2)/dz]^2 along the traced pseudopotential minimum by the
/// composite trapezoid rule. d(E^2)/dz is the axial pseudopotential gradient
/// over the pseudopotential coefficient, which equals the total derivative
/// along the contour because the transverse gradient vanishes there. Trace
/// failures and geometry errors yield an infeasible report.
[[nodiscard]] FitnessReport fitness(const fields::TrapLayout& layout,
                                    const fields::DriveParams& drive,
                                    const FitnessOptions& opts = {});

} // namespace microtrap::optimize
