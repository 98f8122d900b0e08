#pragma once

#include "microtrap/fields/pseudopotential.hpp"

#include <Eigen/Core>
#include <vector>

namespace microtrap::fields
{
struct NullOptions
{
    double tolerance = 1e-9;   // pseudopotential gradient norm, eV/um
    int max_iterations = 200;
    double search_half_width = 20.0; // grid fallback, x range around the guess (um)
    double search_depth = 40.0;      // grid fallback, y range around the guess (um)
    double search_step = 1.0;
    double min_height = 2.0;         // keep iterates this far above the electrode plane
};

struct NullPoint
{
    double z = 0.0;
    double x = 0.0;
    double y = 0.0;
    double residual = 0.0;      // pseudopotential at the minimum, eV
    double gradient_norm = 0.0; // eV/um
    int iterations = 0;

    [[nodiscard]] Eigen::Vector3d position() const { return {x, y, z}; }
};

/// Transverse minimizer of the pseudopotential in the plane of fixed z, by a
/// damped Gauss-Newton iteration on the rf field with a grid-search fallback.
/// Throws NoMinimumError when neither converges.
[[nodiscard]] NullPoint find_rf_null(const RfField& rf, double z, const Eigen::Vector2d& guess,
                                     const NullOptions& opts = {});

struct NullSample
{
    double z = 0.0;
    double x = 0.0;
    double y = 0.0;
    double residual = 0.0; // eV
    double height = 0.0;   // above the electrode plane, um
};

struct NullContour
{
    std::vector<NullSample> samples;

    /// Linear interpolation of the null position at z inside the sampled range.
    [[nodiscard]] Eigen::Vector3d position_at(double z) const;
};

/// Continuation of the null from z_begin to z_end, each solve warm-started
/// from the previous one. Throws ContinuationBreakError when the minimum is
/// lost or jumps by more than `max_jump` um between samples.
[[nodiscard]] NullContour trace_null_contour(const RfField& rf, double z_begin, double z_end,
                                             double step, const Eigen::Vector2d& guess,
                                             const NullOptions& opts = {},
                                             double max_jump = 5.0);

} // namespace microtrap::fields
