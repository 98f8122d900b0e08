#include "microtrap/fields/trap_field.hpp"

#include "microtrap/errors.hpp"
#include "microtrap/units.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <map>
#include <mutex>
#include <tuple>

namespace microtrap::fields
{
namespace
{
using constants::pi;
constexpr double inv2pi = 0.5 / pi;

struct SignedPolygon
{
    const Polygon* polygon;
    double sign;
};

// Planar potential continued below the host plane: phi(p) = 2 host - phi(R p),
// R reflecting about the rim plane.
void continue_below(double host, Derivatives order, FieldValue& v)
{
    v.value = 2.0 * host - v.value;
    v.gradient = Eigen::Vector3d(-v.gradient.x(), v.gradient.y(), -v.gradient.z());
    if (order == Derivatives::hessian)
    {
        const Eigen::Matrix3d r = Eigen::Vector3d(1.0, -1.0, 1.0).asDiagonal();
        v.hessian = -r * v.hessian * r;
    }
}

} // namespace

struct TrapField::Impl
{
    TrapLayout layout;
    std::vector<std::string> labels;
    std::size_t fill = 0;
    std::vector<std::vector<SignedPolygon>> parts; // per non-fill label
    std::shared_ptr<const PanelSolver> solver;
    std::size_t host = 0;

    // Lazily computed perturbation densities (panels x labels, fill column last).
    mutable std::once_flag density_once;
    mutable Eigen::MatrixXd density;
    mutable std::once_flag quadrature_once;
    mutable PanelQuadrature quadrature;
    mutable Eigen::MatrixXd node_charge; // quadrature nodes x labels

    // Inside the mirror depression, where the planar formula must be continued.
    [[nodiscard]] bool below_rim(const Eigen::Vector3d& p) const
    {
        if (!layout.mirror)
            return false;
        const MirrorSpec& m = layout.mirror->spec;
        return p.y() < m.rim_height() && m.axial_distance(p) < m.aperture_radius;
    }

    [[nodiscard]] Eigen::Vector3d reflect(const Eigen::Vector3d& p) const
    {
        return {p.x(), 2.0 * layout.mirror->spec.rim_height() - p.y(), p.z()};
    }

    FieldValue planar(std::size_t label, const Eigen::Vector3d& p, Derivatives order) const
    {
        if (below_rim(p))
        {
            FieldValue v = planar(label, reflect(p), order);
            continue_below(label == host ? 1.0 : 0.0, order, v);
            return v;
        }
        FieldValue v;
        if (label == fill)
        {
            v.value = 1.0;
            for (std::size_t i = 0; i < parts.size(); ++i)
                for (const auto& sp : parts[i])
                    accumulate_solid_angle(*sp.polygon, p, -sp.sign * inv2pi, order, v);
            return v;
        }
        for (const auto& sp : parts[label])
            accumulate_solid_angle(*sp.polygon, p, sp.sign * inv2pi, order, v);
        return v;
    }

    const Eigen::MatrixXd& densities() const
    {
        std::call_once(density_once, [this] {
            const PanelMesh& mesh = solver->mesh();
            const auto n = static_cast<Eigen::Index>(mesh.size());
            const auto nl = static_cast<Eigen::Index>(labels.size());
            const MirrorSpec& m = layout.mirror->spec;
            const double rim = m.rim_height();
            Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, nl - 1);
            for (Eigen::Index j = 0; j < n; ++j)
            {
                if (mesh.region[static_cast<std::size_t>(j)] != PanelMesh::cap)
                    continue;
                Eigen::Vector3d q = mesh.centroid(static_cast<std::size_t>(j));
                q.y() = std::max(2.0 * rim - q.y(), rim + 1e-6);
                for (Eigen::Index i = 0; i + 1 < nl; ++i)
                {
                    const double host_value = static_cast<std::size_t>(i) == host ? 1.0 : 0.0;
                    rhs(j, i) = planar(static_cast<std::size_t>(i), q, Derivatives::none).value -
                                host_value;
                }
            }
            density.resize(n, nl);
            density.leftCols(nl - 1) = solver->solve(rhs);
            density.col(nl - 1) = -density.leftCols(nl - 1).rowwise().sum();
        });
        return density;
    }

    void quadrature_charges() const
    {
        std::call_once(quadrature_once, [this] {
            quadrature = panel_quadrature(solver->mesh());
            const Eigen::MatrixXd& s = densities();
            node_charge.resize(quadrature.weight.size(), s.cols());
            for (Eigen::Index k = 0; k < quadrature.weight.size(); ++k)
                node_charge.row(k) =
                    quadrature.weight(k) * s.row(quadrature.panel[static_cast<std::size_t>(k)]);
        });
    }
};

std::shared_ptr<const PanelSolver> mirror_solver(const MirrorSpec& m, const MirrorMeshOptions& opts)
{
    using Key = std::tuple<double, double, double, double, double, double, int, double>;
    static std::mutex mutex;
    static std::map<Key, std::shared_ptr<const PanelSolver>> cache;
    const Key key{m.roc,        m.aperture_radius, m.sag,          m.vertex.x(),
                  m.vertex.y(), m.vertex.z(),      opts.cap_rings, opts.plane_extent};
    std::lock_guard lock(mutex);
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(key, std::make_shared<const PanelSolver>(mirror_mesh(m, opts))).first;
    return it->second;
}

TrapField::TrapField(TrapLayout layout, FieldOptions opts)
{
    layout.validate();
    auto impl = std::make_shared<Impl>();
    impl->layout = std::move(layout);
    impl->labels = impl->layout.labels();
    impl->fill = impl->labels.size() - 1;
    impl->parts.resize(impl->fill);
    for (const auto& e : impl->layout.electrodes)
    {
        const auto it = std::find(impl->labels.begin(), impl->labels.end(), e.label);
        impl->parts[static_cast<std::size_t>(it - impl->labels.begin())].push_back({&e.polygon, 1.0});
    }
    if (impl->layout.loading_slot)
    {
        // The slot is cut out of whichever electrode contains its centroid.
        const Polygon& slot = *impl->layout.loading_slot;
        const Eigen::Vector2d c = slot.centroid();
        for (const auto& e : impl->layout.electrodes)
        {
            if (e.polygon.contains(c) && std::abs(e.polygon.layer() - slot.layer()) < 1e-12)
            {
                const auto it = std::find(impl->labels.begin(), impl->labels.end(), e.label);
                impl->parts[static_cast<std::size_t>(it - impl->labels.begin())].push_back(
                    {&slot, -1.0});
                break;
            }
        }
    }
    if (impl->layout.mirror)
    {
        const auto it = std::find(impl->labels.begin(), impl->labels.end(), impl->layout.mirror->host);
        impl->host = static_cast<std::size_t>(it - impl->labels.begin());
        impl->solver = mirror_solver(impl->layout.mirror->spec, opts.mesh);
    }
    impl_ = std::move(impl);
}

const TrapLayout& TrapField::layout() const { return impl_->layout; }
const std::vector<std::string>& TrapField::labels() const { return impl_->labels; }
bool TrapField::has_mirror() const { return static_cast<bool>(impl_->solver); }

std::size_t TrapField::index(std::string_view label) const
{
    const auto& l = impl_->labels;
    const auto it = std::find(l.begin(), l.end(), label);
    if (it == l.end())
        throw DomainError(fmt::format("unknown electrode label '{}'", label));
    return static_cast<std::size_t>(it - l.begin());
}

FieldValue TrapField::basis(std::size_t label, const Eigen::Vector3d& p, Derivatives order) const
{
    if (label >= size())
        throw DomainError(fmt::format("electrode index {} out of range", label));
    FieldValue v = impl_->planar(label, p, order);
    if (impl_->solver)
    {
        const PanelCharges charges(impl_->solver->mesh(),
                                   impl_->densities().col(static_cast<Eigen::Index>(label)));
        charges.accumulate(p, 1.0, order, v);
    }
    return v;
}

void TrapField::basis_all(const Eigen::Vector3d& p, Eigen::VectorXd* values,
                          Eigen::Matrix3Xd* gradients) const
{
    const auto n = static_cast<Eigen::Index>(size());
    const Derivatives order = gradients ? Derivatives::gradient : Derivatives::none;
    if (values)
        values->resize(n);
    if (gradients)
        gradients->resize(3, n);
    FieldValue fill;
    fill.value = 1.0;
    for (std::size_t i = 0; i + 1 < size(); ++i)
    {
        const FieldValue v = impl_->planar(i, p, order);
        fill.value -= v.value;
        fill.gradient -= v.gradient;
        if (values)
            (*values)(static_cast<Eigen::Index>(i)) = v.value;
        if (gradients)
            gradients->col(static_cast<Eigen::Index>(i)) = v.gradient;
    }
    if (values)
        (*values)(n - 1) = fill.value;
    if (gradients)
        gradients->col(n - 1) = fill.gradient;
    if (!impl_->solver)
        return;

    impl_->quadrature_charges();
    const auto& nodes = impl_->quadrature.nodes;
    const Eigen::Index m = nodes.cols();
    Eigen::VectorXd k0(m);
    Eigen::Matrix3Xd k1(3, gradients ? m : 0);
    for (Eigen::Index k = 0; k < m; ++k)
    {
        const Eigen::Vector3d d = p - nodes.col(k);
        const double inv = 1.0 / d.norm();
        k0(k) = inv;
        if (gradients)
            k1.col(k) = -inv * inv * inv * d;
    }
    if (values)
        values->noalias() += impl_->node_charge.transpose() * k0;
    if (gradients)
        gradients->noalias() += k1 * impl_->node_charge;
}

BoundPotential TrapField::bind(const Eigen::VectorXd& voltages) const
{
    if (static_cast<std::size_t>(voltages.size()) != size())
        throw DomainError(fmt::format("voltage vector has {} entries for {} electrodes",
                                      voltages.size(), size()));
    BoundPotential b;
    b.field_ = impl_;
    const double vfill = voltages(static_cast<Eigen::Index>(impl_->fill));
    b.offset_ = vfill;
    if (impl_->layout.mirror)
        b.host_ = voltages(static_cast<Eigen::Index>(impl_->host));
    Eigen::VectorXd relative = voltages.array() - vfill;
    for (std::size_t i = 0; i < impl_->parts.size(); ++i)
    {
        const double w = relative(static_cast<Eigen::Index>(i));
        if (w == 0.0)
            continue;
        for (const auto& sp : impl_->parts[i])
            b.terms_.push_back({sp.polygon, w * sp.sign * inv2pi});
    }
    if (impl_->solver)
    {
        // One combined right-hand side: the planar part of this potential,
        // relative to the host voltage, at the reflected cap centroids.
        const PanelMesh& mesh = impl_->solver->mesh();
        const double rim = impl_->layout.mirror->spec.rim_height();
        const double host = voltages(static_cast<Eigen::Index>(impl_->host));
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.size()));
        for (std::size_t j = 0; j < mesh.size(); ++j)
        {
            if (mesh.region[j] != PanelMesh::cap)
                continue;
            Eigen::Vector3d q = mesh.centroid(j);
            q.y() = std::max(2.0 * rim - q.y(), rim + 1e-6);
            rhs(static_cast<Eigen::Index>(j)) = b.evaluate(q).value - host;
        }
        b.charges_ = PanelCharges(mesh, impl_->solver->solve(rhs));
    }
    return b;
}

Eigen::VectorXd TrapField::rf_voltages(double amplitude) const
{
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < size(); ++i)
        if (impl_->layout.is_rf(impl_->labels[i]))
            v(static_cast<Eigen::Index>(i)) = amplitude;
    return v;
}

FieldValue BoundPotential::evaluate(const Eigen::Vector3d& p, Derivatives order) const
{
    FieldValue v;
    v.value = offset_;
    const bool below = field_ && field_->below_rim(p);
    const Eigen::Vector3d q = below ? field_->reflect(p) : p;
    for (const auto& t : terms_)
        accumulate_solid_angle(*t.polygon, q, t.weight, order, v);
    if (below)
        continue_below(host_, order, v);
    if (!charges_.empty())
        charges_.accumulate(p, 1.0, order, v);
    return v;
}

Eigen::Vector3d BoundPotential::e_field(const Eigen::Vector3d& p) const
{
    return -constants::um_per_m * evaluate(p, Derivatives::gradient).gradient;
}

double basis_potential(const TrapLayout& layout, std::string_view label, const Eigen::Vector3d& p)
{
    const TrapField field(layout);
    return field.basis(field.index(label), p).value;
}

double total_potential(const TrapField& field, const Eigen::VectorXd& voltages,
                       const Eigen::Vector3d& p)
{
    return field.bind(voltages).potential(p);
}

Eigen::Vector3d e_field(const TrapField& field, const Eigen::VectorXd& voltages,
                        const Eigen::Vector3d& p)
{
    return field.bind(voltages).e_field(p);
}

} // namespace microtrap::fields
