#pragma once

#include "microtrap/fields/null_contour.hpp"
#include "microtrap/fields/secular.hpp"

#include <Eigen/Core>
#include <string>
#include <vector>

namespace microtrap::fields
{
struct ControlOptions
{
    double bound = 6.0;                          // |V| limit per electrode
    double axial_frequency = mhz_to_angular(1.0); // rad/s
    double frequency_tolerance = 0.05;           // relative
    int stencil_points = 4;                      // samples on each side of the well
    double stencil_step = 2.5;                   // um
    double gradient_weight = 10.0;               // field rows relative to potential rows
    double regularization = 1e-5;                // Tikhonov weight relative to the mean diagonal
    std::string control_prefix = "dc";           // labels driven by the solver
};

struct ControlSolution
{
    Eigen::VectorXd voltages;     // every label of the field, volts
    double axial_frequency = 0.0; // achieved, rad/s
    double residual = 0.0;        // rms stencil misfit, volts
};

/// Bounded least-squares dc voltages that place an axial well of the target
/// frequency on the rf null at axial position z. The ion's energy at stencil
/// points along the null matches the target parabola after removing the
/// pseudopotential variation, and the dc field vanishes at the well. The box
/// constraint is handled by an active-set solve whose initial set comes from
/// `warm_start` when given. The contour must
/// cover the stencil. Throws InfeasibleBoundError when the bounded solution
/// misses the frequency.
[[nodiscard]] ControlSolution solve_control_voltages(const RfField& rf, const NullContour& contour,
                                                     double z, const ControlOptions& opts = {},
                                                     const Eigen::VectorXd* warm_start = nullptr);

struct Waveform
{
    std::vector<std::string> labels;   // columns of each step
    std::vector<Eigen::Vector3d> positions; // commanded well per step, um
    std::vector<Eigen::VectorXd> steps; // volts per label
    double update_rate = 500e3;        // Hz

    [[nodiscard]] double duration() const { return steps.size() / update_rate; }
    [[nodiscard]] double max_abs_voltage() const;
    /// Largest change of any electrode between consecutive steps.
    [[nodiscard]] double max_step_delta() const;
};

struct TransportOptions
{
    int n_steps = 1000;
    double update_rate = 500e3; // Hz
    double contour_step = 5.0;  // um, null pre-trace spacing
    Eigen::Vector2d null_guess{0.0, 60.0}; // (x, y) near the null at the start
    ControlOptions control;
    NullOptions null;
};

/// Control solutions along evenly spaced well positions from z_start to
/// z_end, with the transverse position interpolated from a pre-traced null
/// contour and each solve warm-started from the previous step.
[[nodiscard]] Waveform transport_waveform(const RfField& rf, double z_start, double z_end,
                                          const TransportOptions& opts = {});

struct TrackingReport
{
    std::vector<double> errors; // |minimum - commanded| per step, um
    double max_error = 0.0;
};

/// Re-minimizes the effective potential at every step from the commanded
/// position and reports the distance.
[[nodiscard]] TrackingReport verify_tracking(const RfField& rf, const Waveform& waveform);

} // namespace microtrap::fields
