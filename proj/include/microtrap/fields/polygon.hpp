#pragma once

#include <Eigen/Core>

#include <vector>

namespace microtrap::fields
{
/// Simple polygon in the electrode plane. Vertex coordinates are (x, z) in um;
/// the polygon lies at height `layer` along y.
class Polygon
{
public:
    Polygon() = default;
    /// Stores the loop counter-clockwise in (x, z). Throws DomainError for
    /// fewer than three vertices or zero area.
    explicit Polygon(std::vector<Eigen::Vector2d> vertices, double layer = 0.0);

    [[nodiscard]] const std::vector<Eigen::Vector2d>& vertices() const { return vertices_; }
    [[nodiscard]] double layer() const { return layer_; }
    [[nodiscard]] double area() const { return area_; }
    [[nodiscard]] Eigen::Vector2d centroid() const;
    [[nodiscard]] bool contains(const Eigen::Vector2d& q) const;
    // O(n^2) edge-pair test; intended for validation, not inner loops.
    [[nodiscard]] bool is_simple() const;

private:
    std::vector<Eigen::Vector2d> vertices_;
    double layer_ = 0.0;
    double area_ = 0.0;
};

[[nodiscard]] double signed_area(const std::vector<Eigen::Vector2d>& loop);

/// Scalar field value with optional gradient (per um) and Hessian (per um^2).
struct FieldValue
{
    double value = 0.0;
    Eigen::Vector3d gradient = Eigen::Vector3d::Zero();
    Eigen::Matrix3d hessian = Eigen::Matrix3d::Zero();
};

enum class Derivatives
{
    none,
    gradient,
    hessian
};

/// Accumulates `weight` times the solid angle subtended by the polygon at p,
/// positive for p above the layer, and its derivatives into `out`.
/// Throws BoundaryPointError when p lies in the polygon's plane.
void accumulate_solid_angle(const Polygon& poly, const Eigen::Vector3d& p, double weight,
                            Derivatives order, FieldValue& out);

[[nodiscard]] FieldValue solid_angle(const Polygon& poly, const Eigen::Vector3d& p,
                                     Derivatives order = Derivatives::none);

} // namespace microtrap::fields
