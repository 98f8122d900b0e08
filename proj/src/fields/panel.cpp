#include "microtrap/fields/panel.hpp"

#include "microtrap/errors.hpp"
#include "microtrap/units.hpp"

#include <Eigen/Geometry>
#include <Eigen/IterativeLinearSolvers>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <map>
#include <tuple>

namespace microtrap::fields
{
namespace
{
using constants::pi;
constexpr double inv4pi = 0.25 / pi;

// Degree-5 seven-point rule on the triangle (barycentric coordinates, weights sum to 1).
struct Rule
{
    double l1, l2, l3, w;
};
constexpr double a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
constexpr double a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
constexpr std::array<Rule, 7> rule7{{{1.0 / 3, 1.0 / 3, 1.0 / 3, 0.225},
                                     {a1, b1, b1, w1},
                                     {b1, a1, b1, w1},
                                     {b1, b1, a1, w1},
                                     {a2, b2, b2, w2},
                                     {b2, a2, b2, w2},
                                     {b2, b2, a2, w2}}};

// Integral of 1/|p - r'| over a triangle by the 7-point rule on 4^level subtriangles.
double integrate_inverse_distance(const Eigen::Vector3d& A, const Eigen::Vector3d& B,
                                  const Eigen::Vector3d& C, const Eigen::Vector3d& p, int level)
{
    if (level > 0)
    {
        const Eigen::Vector3d ab = 0.5 * (A + B), bc = 0.5 * (B + C), ca = 0.5 * (C + A);
        return integrate_inverse_distance(A, ab, ca, p, level - 1) +
               integrate_inverse_distance(ab, B, bc, p, level - 1) +
               integrate_inverse_distance(ca, bc, C, p, level - 1) +
               integrate_inverse_distance(ab, bc, ca, p, level - 1);
    }
    const double area = 0.5 * (B - A).cross(C - A).norm();
    double sum = 0.0;
    for (const auto& r : rule7)
        sum += r.w / (r.l1 * A + r.l2 * B + r.l3 * C - p).norm();
    return sum * area;
}

// Exact integral of 1/|p - r'| over a flat triangle for p inside it.
double self_integral(const Eigen::Vector3d& A, const Eigen::Vector3d& B, const Eigen::Vector3d& C,
                     const Eigen::Vector3d& p)
{
    const std::array<Eigen::Vector3d, 3> v{A, B, C};
    double sum = 0.0;
    for (int e = 0; e < 3; ++e)
    {
        const Eigen::Vector3d& a = v[static_cast<std::size_t>(e)];
        const Eigen::Vector3d& b = v[static_cast<std::size_t>((e + 1) % 3)];
        const Eigen::Vector3d t = (b - a).normalized();
        const double s1 = (a - p).dot(t);
        const double s2 = (b - p).dot(t);
        const double d = ((a - p) - s1 * t).norm();
        sum += d * (std::asinh(s2 / d) - std::asinh(s1 / d));
    }
    return sum;
}

// Rings of nodes around the y axis joined into a triangulated surface. Node
// counts are multiples of four (or a single centre node); one quadrant is
// triangulated and mirrored, so the mesh is symmetric under x -> -x and z -> -z.
struct Ring
{
    double radius;
    double y;
    int count;
};

PanelMesh ring_mesh(const std::vector<Ring>& rings, double cap_radius, const Eigen::Vector3d& axis)
{
    PanelMesh mesh;
    std::vector<int> first;
    for (const auto& r : rings)
    {
        first.push_back(static_cast<int>(mesh.nodes.size()));
        for (int k = 0; k < r.count; ++k)
        {
            const double t = 2.0 * pi * k / r.count;
            mesh.nodes.emplace_back(axis.x() + r.radius * std::cos(t), r.y,
                                    axis.z() + r.radius * std::sin(t));
        }
    }
    // Quadrant-0 triangles as (ring, node index) pairs.
    using Node = std::pair<std::size_t, int>;
    std::vector<std::array<Node, 3>> quadrant;
    for (std::size_t r = 0; r + 1 < rings.size(); ++r)
    {
        const int n1 = rings[r].count;
        const int n2 = rings[r + 1].count;
        if (n1 == 1)
        {
            for (int j = 0; j < n2 / 4; ++j)
                quadrant.push_back({Node{r, 0}, Node{r + 1, j}, Node{r + 1, j + 1}});
            continue;
        }
        int i = 0, j = 0;
        while (i < n1 / 4 || j < n2 / 4)
        {
            const bool advance_inner =
                j >= n2 / 4 || (i < n1 / 4 && double(i + 1) / n1 <= double(j + 1) / n2);
            if (advance_inner)
            {
                quadrant.push_back({Node{r, i}, Node{r + 1, j}, Node{r, i + 1}});
                ++i;
            }
            else
            {
                quadrant.push_back({Node{r, i}, Node{r + 1, j}, Node{r + 1, j + 1}});
                ++j;
            }
        }
    }
    // Images of quadrant 0: identity, t -> pi - t, t -> pi + t, t -> 2 pi - t.
    for (int q = 0; q < 4; ++q)
    {
        for (const auto& tri : quadrant)
        {
            std::array<int, 3> ids{};
            for (std::size_t k = 0; k < 3; ++k)
            {
                const auto [r, idx] = tri[k];
                const int n = rings[r].count;
                int m = idx;
                if (n > 1)
                {
                    if (q == 1)
                        m = n / 2 - idx;
                    else if (q == 2)
                        m = idx + n / 2;
                    else if (q == 3)
                        m = n - idx;
                    m = ((m % n) + n) % n;
                }
                else
                {
                    m = 0;
                }
                ids[k] = first[r] + m;
            }
            mesh.triangles.push_back(ids);
            const Eigen::Vector3d c = mesh.centroid(mesh.size() - 1);
            const double rho = std::hypot(c.x() - axis.x(), c.z() - axis.z());
            mesh.region.push_back(rho < cap_radius ? PanelMesh::cap : PanelMesh::plane);
        }
    }
    return mesh;
}

std::vector<Ring> annulus_rings(double radius, double y, int count, double extent)
{
    std::vector<Ring> rings;
    const double growth = 1.0 + 2.0 * pi / count;
    const double outer = radius * extent;
    double rho = radius;
    while (rho * growth < outer * (1.0 - 0.25 * (growth - 1.0)))
    {
        rho *= growth;
        rings.push_back({rho, y, count});
    }
    rings.push_back({outer, y, count});
    return rings;
}

void check_options(const MirrorMeshOptions& opts)
{
    if (opts.cap_rings < 1 || !(opts.plane_extent > 1.0))
        throw DomainError("mesh options: need cap_rings >= 1 and plane_extent > 1");
}

} // namespace

Eigen::Vector3d PanelMesh::centroid(std::size_t t) const
{
    return (vertex(t, 0) + vertex(t, 1) + vertex(t, 2)) / 3.0;
}

double PanelMesh::area(std::size_t t) const
{
    return 0.5 * (vertex(t, 1) - vertex(t, 0)).cross(vertex(t, 2) - vertex(t, 0)).norm();
}

double PanelMesh::diameter(std::size_t t) const
{
    return std::max({(vertex(t, 1) - vertex(t, 0)).norm(), (vertex(t, 2) - vertex(t, 1)).norm(),
                     (vertex(t, 0) - vertex(t, 2)).norm()});
}

PanelMesh mirror_mesh(const MirrorSpec& mirror, const MirrorMeshOptions& opts)
{
    mirror.validate();
    check_options(opts);
    const int nc = opts.cap_rings;
    const double r = mirror.aperture_radius;
    std::vector<Ring> rings{{0.0, mirror.vertex.y(), 1}};
    for (int k = 1; k <= nc; ++k)
    {
        const double rho = r * k / nc;
        const double y = mirror.vertex.y() + mirror.roc -
                         std::sqrt((mirror.roc - rho) * (mirror.roc + rho));
        rings.push_back({rho, k == nc ? mirror.rim_height() : y, 4 * k});
    }
    for (const auto& ring : annulus_rings(r, mirror.rim_height(), 4 * nc, opts.plane_extent))
        rings.push_back(ring);
    return ring_mesh(rings, r, mirror.vertex);
}

PanelMesh disk_mesh(double radius, double y, const MirrorMeshOptions& opts)
{
    if (!(radius > 0.0))
        throw DomainError("disk mesh: radius must be positive");
    check_options(opts);
    const int nc = opts.cap_rings;
    std::vector<Ring> rings{{0.0, y, 1}};
    for (int k = 1; k <= nc; ++k)
        rings.push_back({radius * k / nc, y, 4 * k});
    for (const auto& ring : annulus_rings(radius, y, 4 * nc, opts.plane_extent))
        rings.push_back(ring);
    return ring_mesh(rings, radius, Eigen::Vector3d(0.0, y, 0.0));
}

PanelMesh sphere_mesh(double radius, int frequency, const Eigen::Vector3d& center)
{
    if (!(radius > 0.0) || frequency < 1)
        throw DomainError("sphere mesh: radius and frequency must be positive");
    const double phi = 0.5 * (1.0 + std::sqrt(5.0));
    const std::array<Eigen::Vector3d, 12> ico{{{-1, phi, 0},
                                               {1, phi, 0},
                                               {-1, -phi, 0},
                                               {1, -phi, 0},
                                               {0, -1, phi},
                                               {0, 1, phi},
                                               {0, -1, -phi},
                                               {0, 1, -phi},
                                               {phi, 0, -1},
                                               {phi, 0, 1},
                                               {-phi, 0, -1},
                                               {-phi, 0, 1}}};
    constexpr std::array<std::array<int, 3>, 20> faces{{{0, 11, 5},
                                                        {0, 5, 1},
                                                        {0, 1, 7},
                                                        {0, 7, 10},
                                                        {0, 10, 11},
                                                        {1, 5, 9},
                                                        {5, 11, 4},
                                                        {11, 10, 2},
                                                        {10, 7, 6},
                                                        {7, 1, 8},
                                                        {3, 9, 4},
                                                        {3, 4, 2},
                                                        {3, 2, 6},
                                                        {3, 6, 8},
                                                        {3, 8, 9},
                                                        {4, 9, 5},
                                                        {2, 4, 11},
                                                        {6, 2, 10},
                                                        {8, 6, 7},
                                                        {9, 8, 1}}};
    PanelMesh mesh;
    std::map<std::tuple<long long, long long, long long>, int> index;
    const auto node = [&](const Eigen::Vector3d& p) {
        const Eigen::Vector3d u = p.normalized();
        const auto key = std::make_tuple(std::llround(u.x() * 1e9), std::llround(u.y() * 1e9),
                                         std::llround(u.z() * 1e9));
        auto [it, inserted] = index.try_emplace(key, static_cast<int>(mesh.nodes.size()));
        if (inserted)
            mesh.nodes.push_back(center + radius * u);
        return it->second;
    };
    const int n = frequency;
    for (const auto& f : faces)
    {
        const Eigen::Vector3d& A = ico[static_cast<std::size_t>(f[0])];
        const Eigen::Vector3d& B = ico[static_cast<std::size_t>(f[1])];
        const Eigen::Vector3d& C = ico[static_cast<std::size_t>(f[2])];
        const auto at = [&](int i, int j) {
            return node(A + (B - A) * (double(i) / n) + (C - A) * (double(j) / n));
        };
        for (int i = 0; i < n; ++i)
        {
            for (int j = 0; i + j < n; ++j)
            {
                mesh.triangles.push_back({at(i, j), at(i + 1, j), at(i, j + 1)});
                if (i + j + 1 < n)
                    mesh.triangles.push_back({at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)});
            }
        }
    }
    mesh.region.assign(mesh.triangles.size(), PanelMesh::cap);
    return mesh;
}

MeshReport inspect_mesh(const PanelMesh& mesh)
{
    MeshReport report;
    std::map<std::pair<int, int>, int> edges;
    for (std::size_t t = 0; t < mesh.size(); ++t)
    {
        const auto& tri = mesh.triangles[t];
        for (int e = 0; e < 3; ++e)
        {
            const int a = tri[static_cast<std::size_t>(e)];
            const int b = tri[static_cast<std::size_t>((e + 1) % 3)];
            ++edges[{std::min(a, b), std::max(a, b)}];
        }
        const double d = mesh.diameter(t);
        if (!(mesh.area(t) > 1e-10 * d * d))
            ++report.degenerate_panels;
    }
    for (const auto& [edge, count] : edges)
    {
        if (count == 1)
            ++report.boundary_edges;
        else if (count > 2)
            ++report.nonmanifold_edges;
    }
    return report;
}

PanelSolver::PanelSolver(PanelMesh mesh, Options opts) : mesh_(std::move(mesh)), opts_(opts)
{
    const std::size_t n = mesh_.size();
    if (n == 0)
        throw SingularSystemError("panel mesh is empty");
    const MeshReport report = inspect_mesh(mesh_);
    if (report.degenerate_panels > 0 || report.nonmanifold_edges > 0 ||
        (opts_.closed && report.boundary_edges > 0))
        throw SingularSystemError(fmt::format(
            "degenerate panel mesh: {} degenerate panels, {} non-manifold edges, {} open edges",
            report.degenerate_panels, report.nonmanifold_edges, report.boundary_edges));

    std::vector<Eigen::Vector3d> centroids(n);
    std::vector<double> size(n), area(n);
    for (std::size_t j = 0; j < n; ++j)
    {
        centroids[j] = mesh_.centroid(j);
        size[j] = mesh_.diameter(j);
        area[j] = mesh_.area(j);
    }
    matrix_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j)
    {
        const Eigen::Vector3d A = mesh_.vertex(j, 0), B = mesh_.vertex(j, 1), C = mesh_.vertex(j, 2);
        for (std::size_t i = 0; i < n; ++i)
        {
            double value;
            const double dist = (centroids[i] - centroids[j]).norm();
            if (i == j)
                value = self_integral(A, B, C, centroids[i]);
            else if (dist < 1.5 * size[j])
                value = integrate_inverse_distance(A, B, C, centroids[i], 2);
            else if (dist < 3.0 * size[j])
                value = integrate_inverse_distance(A, B, C, centroids[i], 1);
            else if (dist < 8.0 * size[j])
                value = integrate_inverse_distance(A, B, C, centroids[i], 0);
            else
                value = area[j] / dist;
            matrix_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = inv4pi * value;
        }
    }
    if (opts_.method == Method::direct)
    {
        lu_.compute(matrix_);
        const double rcond = lu_.rcond();
        if (!(rcond > 1e-13))
            throw SingularSystemError(
                fmt::format("panel system is singular (reciprocal condition {:.3g})", rcond));
    }
}

Eigen::MatrixXd PanelSolver::solve(const Eigen::MatrixXd& boundary_values) const
{
    if (boundary_values.rows() != matrix_.rows())
        throw DomainError(fmt::format("panel solve: {} boundary values for {} panels",
                                      boundary_values.rows(), matrix_.rows()));
    if (opts_.method == Method::direct)
        return lu_.solve(boundary_values);

    Eigen::BiCGSTAB<Eigen::MatrixXd, Eigen::IdentityPreconditioner> solver;
    solver.setTolerance(opts_.tolerance);
    solver.setMaxIterations(opts_.max_iterations);
    solver.compute(matrix_);
    Eigen::MatrixXd out(boundary_values.rows(), boundary_values.cols());
    for (Eigen::Index c = 0; c < boundary_values.cols(); ++c)
    {
        out.col(c) = solver.solve(boundary_values.col(c));
        if (solver.info() != Eigen::Success)
            throw NonConvergenceError(fmt::format(
                "BiCGSTAB stopped after {} iterations with residual {:.3g} (target {:.3g})",
                solver.iterations(), solver.error(), opts_.tolerance));
    }
    return out;
}

PanelQuadrature panel_quadrature(const PanelMesh& mesh)
{
    PanelQuadrature q;
    const auto n = static_cast<Eigen::Index>(mesh.size() * rule7.size());
    q.nodes.resize(3, n);
    q.weight.resize(n);
    q.panel.resize(static_cast<std::size_t>(n));
    Eigen::Index k = 0;
    for (std::size_t t = 0; t < mesh.size(); ++t)
    {
        const Eigen::Vector3d A = mesh.vertex(t, 0), B = mesh.vertex(t, 1), C = mesh.vertex(t, 2);
        const double area = mesh.area(t);
        for (const auto& r : rule7)
        {
            q.nodes.col(k) = r.l1 * A + r.l2 * B + r.l3 * C;
            q.weight(k) = r.w * area * inv4pi;
            q.panel[static_cast<std::size_t>(k)] = static_cast<int>(t);
            ++k;
        }
    }
    return q;
}

PanelCharges::PanelCharges(const PanelMesh& mesh, const Eigen::VectorXd& sigma)
{
    if (static_cast<std::size_t>(sigma.size()) != mesh.size())
        throw DomainError("panel charges: density size does not match the mesh");
    const PanelQuadrature quad = panel_quadrature(mesh);
    nodes_ = quad.nodes;
    q_.resize(quad.weight.size());
    for (Eigen::Index k = 0; k < q_.size(); ++k)
        q_(k) = quad.weight(k) * sigma(quad.panel[static_cast<std::size_t>(k)]);
    total_ = 0.0;
    for (std::size_t t = 0; t < mesh.size(); ++t)
        total_ += sigma(static_cast<Eigen::Index>(t)) * mesh.area(t);
}

void PanelCharges::accumulate(const Eigen::Vector3d& p, double weight, Derivatives order,
                              FieldValue& out) const
{
    double value = 0.0;
    Eigen::Vector3d grad = Eigen::Vector3d::Zero();
    Eigen::Matrix3d hess = Eigen::Matrix3d::Zero();
    for (Eigen::Index k = 0; k < q_.size(); ++k)
    {
        const Eigen::Vector3d d = p - nodes_.col(k);
        const double r2 = d.squaredNorm();
        const double inv = 1.0 / std::sqrt(r2);
        const double q = q_(k);
        value += q * inv;
        if (order == Derivatives::none)
            continue;
        const double inv3 = inv * inv * inv;
        grad.noalias() -= (q * inv3) * d;
        if (order == Derivatives::hessian)
        {
            const double inv5 = inv3 * inv * inv;
            hess.noalias() += (3.0 * q * inv5) * (d * d.transpose());
            hess.diagonal().array() -= q * inv3;
        }
    }
    out.value += weight * value;
    if (order != Derivatives::none)
        out.gradient += weight * grad;
    if (order == Derivatives::hessian)
        out.hessian += weight * hess;
}

} // namespace microtrap::fields
