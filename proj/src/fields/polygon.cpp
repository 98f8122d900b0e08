#include "microtrap/fields/polygon.hpp"

#include "microtrap/errors.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace microtrap::fields
{
namespace
{
double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b)
{
    return a.x() * b.y() - a.y() * b.x();
}

bool segments_intersect(const Eigen::Vector2d& p1, const Eigen::Vector2d& p2,
                        const Eigen::Vector2d& q1, const Eigen::Vector2d& q2)
{
    const double d1 = cross2(q2 - q1, p1 - q1);
    const double d2 = cross2(q2 - q1, p2 - q1);
    const double d3 = cross2(p2 - p1, q1 - p1);
    const double d4 = cross2(p2 - p1, q2 - p1);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 &&
           d4 != 0;
}

Eigen::Vector3d lift(const Eigen::Vector2d& v, double layer)
{
    return {v.x(), layer, v.y()};
}

} // namespace

double signed_area(const std::vector<Eigen::Vector2d>& loop)
{
    double twice = 0.0;
    for (std::size_t i = 0, n = loop.size(); i < n; ++i)
        twice += cross2(loop[i], loop[(i + 1) % n]);
    return 0.5 * twice;
}

Polygon::Polygon(std::vector<Eigen::Vector2d> vertices, double layer)
    : vertices_(std::move(vertices)), layer_(layer)
{
    if (vertices_.size() >= 2 && vertices_.front() == vertices_.back())
        vertices_.pop_back();
    if (vertices_.size() < 3)
        throw DomainError("polygon needs at least three vertices");
    area_ = signed_area(vertices_);
    if (!(std::abs(area_) > 0.0))
        throw DomainError("polygon has zero area");
    if (area_ < 0.0)
    {
        std::reverse(vertices_.begin(), vertices_.end());
        area_ = -area_;
    }
}

Eigen::Vector2d Polygon::centroid() const
{
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (std::size_t i = 0, n = vertices_.size(); i < n; ++i)
    {
        const auto& a = vertices_[i];
        const auto& b = vertices_[(i + 1) % n];
        c += (a + b) * cross2(a, b);
    }
    return c / (6.0 * area_);
}

bool Polygon::contains(const Eigen::Vector2d& q) const
{
    bool inside = false;
    for (std::size_t i = 0, j = vertices_.size() - 1; i < vertices_.size(); j = i++)
    {
        const auto& a = vertices_[i];
        const auto& b = vertices_[j];
        if ((a.y() > q.y()) != (b.y() > q.y()) &&
            q.x() < (b.x() - a.x()) * (q.y() - a.y()) / (b.y() - a.y()) + a.x())
            inside = !inside;
    }
    return inside;
}

bool Polygon::is_simple() const
{
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i)
    {
        for (std::size_t j = i + 1; j < n; ++j)
        {
            if (j == i + 1 || (i == 0 && j == n - 1))
                continue;
            if (segments_intersect(vertices_[i], vertices_[(i + 1) % n], vertices_[j],
                                   vertices_[(j + 1) % n]))
                return false;
        }
    }
    return true;
}

void accumulate_solid_angle(const Polygon& poly, const Eigen::Vector3d& p, double weight,
                            Derivatives order, FieldValue& out)
{
    const auto& v = poly.vertices();
    const std::size_t n = v.size();
    const double height = p.y() - poly.layer();
    if (std::abs(height) < 1e-12)
        throw BoundaryPointError(fmt::format(
            "field point ({}, {}, {}) lies in the electrode plane", p.x(), p.y(), p.z()));

    // Fan triangulation (Van Oosterom & Strackee) for the value.
    const Eigen::Vector3d a = lift(v[0], poly.layer()) - p;
    const double la = a.norm();
    double omega = 0.0;
    Eigen::Vector3d b = lift(v[1], poly.layer()) - p;
    double lb = b.norm();
    for (std::size_t i = 1; i + 1 < n; ++i)
    {
        const Eigen::Vector3d c = lift(v[i + 1], poly.layer()) - p;
        const double lc = c.norm();
        const double num = a.dot(b.cross(c));
        const double den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
        omega += 2.0 * std::atan2(num, den);
        b = c;
        lb = lc;
    }
    out.value += weight * omega;
    if (order == Derivatives::none)
        return;

    // Edge sum: grad Omega = sum (a x b) F, F = (|a|+|b|) / (|a||b|(|a||b| + a.b)).
    for (std::size_t i = 0; i < n; ++i)
    {
        const Eigen::Vector3d ea = lift(v[i], poly.layer()) - p;
        const Eigen::Vector3d eb = lift(v[(i + 1) % n], poly.layer()) - p;
        const double A = ea.norm();
        const double B = eb.norm();
        const double D = ea.dot(eb);
        const double AB = A * B;
        const double M = AB * (AB + D);
        const double N = A + B;
        const double F = N / M;
        const Eigen::Vector3d c = ea.cross(eb);
        out.gradient += weight * F * c;
        if (order != Derivatives::hessian)
            continue;

        const Eigen::Vector3d dA = -ea / A;
        const Eigen::Vector3d dB = -eb / B;
        const Eigen::Vector3d dD = -(ea + eb);
        const Eigen::Vector3d dAB = dA * B + A * dB;
        const Eigen::Vector3d dN = dA + dB;
        const Eigen::Vector3d dM = dAB * (AB + D) + AB * (dAB + dD);
        const Eigen::Vector3d dF = (dN * M - N * dM) / (M * M);
        const Eigen::Vector3d diff = ea - eb;
        Eigen::Matrix3d h;
        for (int k = 0; k < 3; ++k)
            h.col(k) = F * Eigen::Vector3d::Unit(k).cross(diff);
        h.noalias() += c * dF.transpose();
        out.hessian += weight * h;
    }
}

FieldValue solid_angle(const Polygon& poly, const Eigen::Vector3d& p, Derivatives order)
{
    FieldValue s;
    accumulate_solid_angle(poly, p, 1.0, order, s);
    return s;
}

} // namespace microtrap::fields
