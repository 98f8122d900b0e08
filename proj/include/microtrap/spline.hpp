#pragma once

#include <vector>

namespace microtrap
{
/// Cubic interpolating spline with prescribed end slopes (clamped).
class ClampedSpline
{
public:
    ClampedSpline() = default;
    /// Knots must be strictly increasing; throws DomainError otherwise.
    ClampedSpline(std::vector<double> x, std::vector<double> y, double slope_begin = 0.0,
                  double slope_end = 0.0);

    // Outside the knot range the spline is continued linearly with the end slope.
    [[nodiscard]] double operator()(double t) const;
    [[nodiscard]] double derivative(double t) const;
    [[nodiscard]] bool empty() const { return x_.empty(); }

private:
    std::size_t segment(double t) const;

    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> m_; // second derivatives at knots
    double slope_begin_ = 0.0;
    double slope_end_ = 0.0;
};

} // namespace microtrap
