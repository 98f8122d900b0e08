#pragma once

#include <vector>

namespace microtrap::photometry
{
/// Counts (or a response factor) sampled along the trap axis.
struct AxialScan
{
    std::vector<double> z; // um, strictly increasing
    std::vector<double> counts;

    void validate() const;
    /// Linear interpolation; throws DomainError outside [z.front(), z.back()].
    [[nodiscard]] double operator()(double at) const;
};

struct EnhancementProfile
{
    std::vector<double> z;        // um
    std::vector<double> relative; // corrected counts over the baseline
    std::vector<double> correction;
    double baseline = 0.0; // mean corrected counts of the reference scan
    double peak = 0.0;
    double peak_z = 0.0;
};

/// Divides counts by the detector aperture response at each z, then by the
/// mean corrected count level of a reference scan taken far from the mirror.
/// An empty correction means a flat response.
[[nodiscard]] EnhancementProfile enhancement_profile(const AxialScan& counts,
                                                     const AxialScan& reference,
                                                     const AxialScan& correction = {});

} // namespace microtrap::photometry
