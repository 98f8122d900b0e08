#pragma once

#include "microtrap/fields/layout.hpp"
#include "microtrap/fields/panel.hpp"
#include "microtrap/fields/polygon.hpp"

#include <Eigen/Core>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace microtrap::fields
{
struct FieldOptions
{
    MirrorMeshOptions mesh;
};

class BoundPotential;

/// Basis potentials of a layout: electrode i at 1 V, all others grounded.
///
/// Planar electrodes use the exact gapless solid-angle formula. A mirror is a
/// perturbation of that solution: the planar potential is continued into the
/// depression by odd reflection about the host potential, and a panel-method
/// single layer on the cap and the surrounding plane cancels the resulting
/// mismatch on the cap. Immutable after construction; evaluation is thread safe.
class TrapField
{
public:
    explicit TrapField(TrapLayout layout, FieldOptions opts = {});

    [[nodiscard]] const TrapLayout& layout() const;
    [[nodiscard]] const std::vector<std::string>& labels() const;
    [[nodiscard]] std::size_t size() const { return labels().size(); }
    /// Throws DomainError for unknown labels.
    [[nodiscard]] std::size_t index(std::string_view label) const;
    [[nodiscard]] bool has_mirror() const;

    /// Basis potential of one electrode; gradient per um.
    [[nodiscard]] FieldValue basis(std::size_t label, const Eigen::Vector3d& p,
                                   Derivatives order = Derivatives::none) const;

    /// All basis values and gradients (3 x size) at p.
    void basis_all(const Eigen::Vector3d& p, Eigen::VectorXd* values,
                   Eigen::Matrix3Xd* gradients) const;

    /// Throws DomainError when the voltage count does not match size().
    [[nodiscard]] BoundPotential bind(const Eigen::VectorXd& voltages) const;

    /// Voltage vector with `amplitude` on every rf label and 0 elsewhere.
    [[nodiscard]] Eigen::VectorXd rf_voltages(double amplitude) const;

    struct Impl;

private:
    std::shared_ptr<const Impl> impl_;
};

/// Potential for a fixed voltage vector (volts; gradient in V/um).
class BoundPotential
{
public:
    [[nodiscard]] FieldValue evaluate(const Eigen::Vector3d& p,
                                      Derivatives order = Derivatives::none) const;
    [[nodiscard]] double potential(const Eigen::Vector3d& p) const { return evaluate(p).value; }
    /// Electric field in V/m.
    [[nodiscard]] Eigen::Vector3d e_field(const Eigen::Vector3d& p) const;

private:
    friend class TrapField;
    std::shared_ptr<const TrapField::Impl> field_;
    struct Term
    {
        const Polygon* polygon;
        double weight;
    };
    std::vector<Term> terms_;
    double offset_ = 0.0;
    double host_ = 0.0; // mirror host voltage
    PanelCharges charges_;
};

/// Convenience wrappers that build a TrapField for a single evaluation.
[[nodiscard]] double basis_potential(const TrapLayout& layout, std::string_view label,
                                     const Eigen::Vector3d& p);
[[nodiscard]] double total_potential(const TrapField& field, const Eigen::VectorXd& voltages,
                                     const Eigen::Vector3d& p);
[[nodiscard]] Eigen::Vector3d e_field(const TrapField& field, const Eigen::VectorXd& voltages,
                                      const Eigen::Vector3d& p);

/// Shared factorization for a mirror mesh; repeated layouts with the same
/// mirror reuse it.
[[nodiscard]] std::shared_ptr<const PanelSolver> mirror_solver(const MirrorSpec& mirror,
                                                               const MirrorMeshOptions& opts);

} // namespace microtrap::fields
