#pragma once

#include "microtrap/fields/polygon.hpp"
#include "microtrap/mirror.hpp"

#include <Eigen/Core>
#include <Eigen/LU>
#include <array>
#include <cstdint>
#include <memory>
#include <vector>

namespace microtrap::fields
{
/// Flat triangular panels. Coordinates in um.
struct PanelMesh
{
    enum Region : std::uint8_t
    {
        cap = 0,
        plane = 1,
    };

    std::vector<Eigen::Vector3d> nodes;
    std::vector<std::array<int, 3>> triangles;
    std::vector<std::uint8_t> region;

    [[nodiscard]] std::size_t size() const { return triangles.size(); }
    [[nodiscard]] Eigen::Vector3d vertex(std::size_t t, int k) const
    {
        return nodes[static_cast<std::size_t>(triangles[t][static_cast<std::size_t>(k)])];
    }
    [[nodiscard]] Eigen::Vector3d centroid(std::size_t t) const;
    [[nodiscard]] double area(std::size_t t) const;
    [[nodiscard]] double diameter(std::size_t t) const; // longest edge
};

struct MirrorMeshOptions
{
    int cap_rings = 10;        // radial rings on the spherical cap
    double plane_extent = 4.0; // annulus outer radius in aperture radii
};

/// Spherical cap of the mirror plus the surrounding plane annulus, both
/// ring-structured around the mirror axis.
[[nodiscard]] PanelMesh mirror_mesh(const MirrorSpec& mirror, const MirrorMeshOptions& opts = {});

/// Flat disk of `radius` at height y, ringed by a plane annulus (sag = 0 limit).
[[nodiscard]] PanelMesh disk_mesh(double radius, double y, const MirrorMeshOptions& opts = {});

/// Geodesic sphere from a subdivided icosahedron: 20 * frequency^2 panels.
[[nodiscard]] PanelMesh sphere_mesh(double radius, int frequency,
                                    const Eigen::Vector3d& center = Eigen::Vector3d::Zero());

struct MeshReport
{
    std::size_t boundary_edges = 0;
    std::size_t nonmanifold_edges = 0;
    std::size_t degenerate_panels = 0;
};

[[nodiscard]] MeshReport inspect_mesh(const PanelMesh& mesh);

/// Collocation solver for the single-layer density sigma (potential units
/// times um^-1, i.e. surface charge over epsilon_0) whose free-space potential
///   phi(p) = sum_j sigma_j * integral_Tj 1 / (4 pi |p - r'|) dA
/// matches prescribed values at the panel centroids.
class PanelSolver
{
public:
    enum class Method
    {
        direct,
        bicgstab,
    };

    struct Options
    {
        Method method = Method::direct;
        double tolerance = 1e-10; // iterative residual
        int max_iterations = 1000;
        // Require every mesh edge to be shared by two panels, as on a sphere.
        bool closed = false;
    };

    /// Assembles and factorizes the system. Throws SingularSystemError for
    /// degenerate or non-watertight meshes and near-singular matrices.
    explicit PanelSolver(PanelMesh mesh, Options opts);
    explicit PanelSolver(PanelMesh mesh) : PanelSolver(std::move(mesh), Options{}) {}

    [[nodiscard]] const PanelMesh& mesh() const { return mesh_; }
    [[nodiscard]] const Eigen::MatrixXd& matrix() const { return matrix_; }

    /// One density column per right-hand-side column.
    /// Throws NonConvergenceError when the iterative method stalls.
    [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixXd& boundary_values) const;

private:
    PanelMesh mesh_;
    Options opts_;
    Eigen::MatrixXd matrix_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

/// Quadrature-node charges of a solved density, for fast field evaluation.
class PanelCharges
{
public:
    PanelCharges() = default;
    PanelCharges(const PanelMesh& mesh, const Eigen::VectorXd& sigma);

    /// Accumulates `weight` times the potential and derivatives at p.
    void accumulate(const Eigen::Vector3d& p, double weight, Derivatives order,
                    FieldValue& out) const;
    [[nodiscard]] double total_charge() const { return total_; } // sum sigma_j A_j
    [[nodiscard]] bool empty() const { return q_.size() == 0; }

private:
    Eigen::Matrix3Xd nodes_;
    Eigen::VectorXd q_; // sigma * weight * area / 4 pi
    double total_ = 0.0;
};

/// Quadrature nodes of the whole mesh (7 per panel) and the per-node weight
/// area/4pi, shared by multi-column evaluations.
struct PanelQuadrature
{
    Eigen::Matrix3Xd nodes;
    Eigen::VectorXd weight;
    std::vector<int> panel; // owning panel of each node
};

[[nodiscard]] PanelQuadrature panel_quadrature(const PanelMesh& mesh);

} // namespace microtrap::fields
