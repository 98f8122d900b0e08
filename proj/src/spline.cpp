#include "microtrap/spline.hpp"

#include "microtrap/errors.hpp"

#include <algorithm>

namespace microtrap
{
ClampedSpline::ClampedSpline(std::vector<double> x, std::vector<double> y, double slope_begin,
                             double slope_end)
    : x_(std::move(x)), y_(std::move(y)), slope_begin_(slope_begin), slope_end_(slope_end)
{
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n)
        throw DomainError("spline needs at least two knots with matching values");
    for (std::size_t i = 1; i < n; ++i)
        if (!(x_[i] > x_[i - 1]))
            throw DomainError("spline knots must be strictly increasing");

    // Tridiagonal system for the knot second derivatives (Thomas algorithm).
    std::vector<double> a(n), b(n), c(n), d(n);
    const double h0 = x_[1] - x_[0];
    b[0] = h0 / 3.0;
    c[0] = h0 / 6.0;
    d[0] = (y_[1] - y_[0]) / h0 - slope_begin_;
    for (std::size_t i = 1; i + 1 < n; ++i)
    {
        const double hl = x_[i] - x_[i - 1];
        const double hr = x_[i + 1] - x_[i];
        a[i] = hl / 6.0;
        b[i] = (hl + hr) / 3.0;
        c[i] = hr / 6.0;
        d[i] = (y_[i + 1] - y_[i]) / hr - (y_[i] - y_[i - 1]) / hl;
    }
    const double hn = x_[n - 1] - x_[n - 2];
    a[n - 1] = hn / 6.0;
    b[n - 1] = hn / 3.0;
    d[n - 1] = slope_end_ - (y_[n - 1] - y_[n - 2]) / hn;

    for (std::size_t i = 1; i < n; ++i)
    {
        const double w = a[i] / b[i - 1];
        b[i] -= w * c[i - 1];
        d[i] -= w * d[i - 1];
    }
    m_.assign(n, 0.0);
    m_[n - 1] = d[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;)
        m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
}

std::size_t ClampedSpline::segment(double t) const
{
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    const auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - x_.begin()));
    return std::min(i, x_.size() - 1) - 1;
}

double ClampedSpline::operator()(double t) const
{
    if (t <= x_.front())
        return y_.front() + slope_begin_ * (t - x_.front());
    if (t >= x_.back())
        return y_.back() + slope_end_ * (t - x_.back());
    const std::size_t i = segment(t);
    const double h = x_[i + 1] - x_[i];
    const double A = (x_[i + 1] - t) / h;
    const double B = (t - x_[i]) / h;
    return A * y_[i] + B * y_[i + 1] +
           ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
}

double ClampedSpline::derivative(double t) const
{
    if (t <= x_.front())
        return slope_begin_;
    if (t >= x_.back())
        return slope_end_;
    const std::size_t i = segment(t);
    const double h = x_[i + 1] - x_[i];
    const double A = (x_[i + 1] - t) / h;
    const double B = (t - x_[i]) / h;
    return (y_[i + 1] - y_[i]) / h - (3.0 * A * A - 1.0) / 6.0 * h * m_[i] +
           (3.0 * B * B - 1.0) / 6.0 * h * m_[i + 1];
}

} // namespace microtrap
