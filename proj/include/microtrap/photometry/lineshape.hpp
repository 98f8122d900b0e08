#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace microtrap::photometry
{
/// Carrier plus first rf sideband, each a Lorentzian in detuning (MHz).
struct Lineshape
{
    double carrier_center = 0.0;    // MHz
    double carrier_width = 10.0;    // MHz, half width at half maximum
    double carrier_amplitude = 1.0;
    double sideband_offset = 62.3;  // MHz, the rf drive frequency, held fixed
    double sideband_width = 10.0;   // MHz
    double sideband_amplitude = 0.0;

    void validate() const;
};

[[nodiscard]] double eval_lineshape(const Lineshape& model, double detuning);

struct SpectrumSample
{
    double detuning = 0.0; // MHz
    double counts = 0.0;
};

struct FitOptions
{
    double sideband_offset = 62.3; // MHz
    bool shared_width = true;
    int max_evaluations = 2000;
    double tolerance = 1e-14;
};

struct LineshapeFit
{
    Lineshape model;
    std::vector<std::string> parameters; // names in covariance order
    Eigen::VectorXd values;
    Eigen::MatrixXd covariance;
    double ratio = 0.0;       // sideband / carrier amplitude
    double ratio_sigma = 0.0; // from the parameter covariance
    double residual_rms = 0.0;
    int evaluations = 0;
    bool degenerate = false; // peaks overlap or the sideband amplitude is not resolved
};

/// Least-squares fit of the two-Lorentzian model with the sideband offset held
/// fixed. Needs at least 8 samples that bracket both peaks; throws DomainError
/// otherwise and NonConvergenceError when the minimizer fails.
[[nodiscard]] LineshapeFit fit_lineshape(const std::vector<SpectrumSample>& samples,
                                         const FitOptions& opts = {});

} // namespace microtrap::photometry
