#include "microtrap/photometry/enhancement.hpp"

#include "microtrap/errors.hpp"

#include <algorithm>
#include <fmt/format.h>

namespace microtrap::photometry
{
void AxialScan::validate() const
{
    if (z.size() != counts.size())
        throw DomainError(fmt::format("scan has {} positions and {} counts", z.size(), counts.size()));
    if (z.empty())
        throw DomainError("scan is empty");
    for (std::size_t i = 1; i < z.size(); ++i)
        if (!(z[i] > z[i - 1]))
            throw DomainError(fmt::format("scan positions not increasing at z = {} um", z[i]));
}

double AxialScan::operator()(double at) const
{
    if (at < z.front() || at > z.back())
        throw DomainError(fmt::format("z = {} um outside the scan [{}, {}]", at, z.front(), z.back()));
    if (z.size() == 1)
        return counts.front();
    const auto hi = static_cast<std::size_t>(
        std::clamp<std::ptrdiff_t>(std::upper_bound(z.begin(), z.end(), at) - z.begin(), 1,
                                   static_cast<std::ptrdiff_t>(z.size() - 1)));
    const double t = (at - z[hi - 1]) / (z[hi] - z[hi - 1]);
    return counts[hi - 1] + t * (counts[hi] - counts[hi - 1]);
}

EnhancementProfile enhancement_profile(const AxialScan& counts, const AxialScan& reference,
                                       const AxialScan& correction)
{
    counts.validate();
    reference.validate();
    const bool flat = correction.z.empty();
    if (!flat)
        correction.validate();
    auto response = [&](double z) {
        const double r = flat ? 1.0 : correction(z);
        if (!(r > 0.0))
            throw DomainError(fmt::format("aperture response {} at z = {} um is not positive", r, z));
        return r;
    };

    double sum = 0.0;
    for (std::size_t i = 0; i < reference.z.size(); ++i)
        sum += reference.counts[i] / response(reference.z[i]);
    const double baseline = sum / static_cast<double>(reference.z.size());
    if (!(baseline > 0.0))
        throw DomainError("reference scan has no counts");

    EnhancementProfile p;
    p.baseline = baseline;
    p.z = counts.z;
    for (std::size_t i = 0; i < counts.z.size(); ++i)
    {
        const double r = response(counts.z[i]);
        p.correction.push_back(r);
        p.relative.push_back(counts.counts[i] / r / baseline);
    }
    const auto it = std::max_element(p.relative.begin(), p.relative.end());
    p.peak = *it;
    p.peak_z = p.z[static_cast<std::size_t>(it - p.relative.begin())];
    return p;
}

} // namespace microtrap::photometry
