#include "microtrap/photometry/lineshape.hpp"

#include "microtrap/errors.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <unsupported/Eigen/LevenbergMarquardt>

namespace microtrap::photometry
{
namespace
{
double lorentzian(double amplitude, double width, double d)
{
    const double w2 = width * width;
    return amplitude * w2 / (d * d + w2);
}

// Parameters: centre, carrier width, [sideband width], carrier amplitude, sideband amplitude.
struct Model
{
    bool shared;
    double offset;

    [[nodiscard]] Eigen::Index size() const { return shared ? 4 : 5; }
    [[nodiscard]] double wc(const Eigen::VectorXd& p) const { return p(1); }
    [[nodiscard]] double ws(const Eigen::VectorXd& p) const { return shared ? p(1) : p(2); }
    [[nodiscard]] Eigen::Index ac() const { return shared ? 2 : 3; }
    [[nodiscard]] Eigen::Index as() const { return shared ? 3 : 4; }

    [[nodiscard]] Lineshape lineshape(const Eigen::VectorXd& p) const
    {
        return {p(0), std::abs(wc(p)), p(ac()), offset, std::abs(ws(p)), p(as())};
    }
};

struct Residual : Eigen::DenseFunctor<double>
{
    Model model;
    const Eigen::VectorXd& x;
    const Eigen::VectorXd& y;

    Residual(Model m, const Eigen::VectorXd& x_, const Eigen::VectorXd& y_)
        : Eigen::DenseFunctor<double>(static_cast<int>(m.size()), static_cast<int>(x_.size())),
          model(m), x(x_), y(y_)
    {
    }

    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& f) const
    {
        const double wc = model.wc(p), ws = model.ws(p);
        for (Eigen::Index i = 0; i < x.size(); ++i)
        {
            const double d = x(i) - p(0);
            f(i) = lorentzian(p(model.ac()), wc, d) +
                   lorentzian(p(model.as()), ws, d - model.offset) - y(i);
        }
        return 0;
    }

    int df(const Eigen::VectorXd& p, Eigen::MatrixXd& j) const
    {
        const double wc = model.wc(p), ws = model.ws(p);
        const double ac = p(model.ac()), as = p(model.as());
        for (Eigen::Index i = 0; i < x.size(); ++i)
        {
            const double dc = x(i) - p(0);
            const double ds = dc - model.offset;
            const double qc = dc * dc + wc * wc;
            const double qs = ds * ds + ws * ws;
            const double gc = wc * wc / qc;
            const double gs = ws * ws / qs;
            j(i, 0) = 2.0 * ac * gc * dc / qc + 2.0 * as * gs * ds / qs;
            const double dwc = 2.0 * ac * wc * dc * dc / (qc * qc);
            const double dws = 2.0 * as * ws * ds * ds / (qs * qs);
            if (model.shared)
                j(i, 1) = dwc + dws;
            else
            {
                j(i, 1) = dwc;
                j(i, 2) = dws;
            }
            j(i, model.ac()) = gc;
            j(i, model.as()) = gs;
        }
        return 0;
    }
};

bool converged(Eigen::LevenbergMarquardtSpace::Status s)
{
    using namespace Eigen::LevenbergMarquardtSpace;
    switch (s)
    {
    case RelativeReductionTooSmall:
    case RelativeErrorTooSmall:
    case RelativeErrorAndReductionTooSmall:
    case CosinusTooSmall:
    case FtolTooSmall:
    case XtolTooSmall:
    case GtolTooSmall:
        return true;
    default:
        return false;
    }
}

// Half width at half maximum around sample k, at least one sample spacing.
double half_width(const Eigen::VectorXd& x, const Eigen::VectorXd& y, Eigen::Index k)
{
    const double half = 0.5 * y(k);
    Eigen::Index lo = k, hi = k;
    while (lo > 0 && y(lo) > half)
        --lo;
    while (hi + 1 < y.size() && y(hi) > half)
        ++hi;
    const double spacing = (x(x.size() - 1) - x(0)) / static_cast<double>(x.size() - 1);
    return std::max(0.5 * (x(hi) - x(lo)), spacing);
}

} // namespace

void Lineshape::validate() const
{
    if (!(carrier_width > 0.0) || !(sideband_width > 0.0))
        throw DomainError("lineshape widths must be positive");
    if (carrier_amplitude < 0.0 || sideband_amplitude < 0.0)
        throw DomainError("lineshape amplitudes must be non-negative");
}

double eval_lineshape(const Lineshape& m, double detuning)
{
    const double d = detuning - m.carrier_center;
    return lorentzian(m.carrier_amplitude, m.carrier_width, d) +
           lorentzian(m.sideband_amplitude, m.sideband_width, d - m.sideband_offset);
}

LineshapeFit fit_lineshape(const std::vector<SpectrumSample>& samples, const FitOptions& opts)
{
    if (samples.size() < 8)
        throw DomainError(fmt::format("lineshape fit needs at least 8 samples, got {}", samples.size()));
    std::vector<SpectrumSample> sorted = samples;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.detuning < b.detuning; });
    const auto n = static_cast<Eigen::Index>(sorted.size());
    Eigen::VectorXd x(n), y(n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        x(i) = sorted[static_cast<std::size_t>(i)].detuning;
        y(i) = sorted[static_cast<std::size_t>(i)].counts;
    }
    const double scale = y.cwiseAbs().maxCoeff();
    if (!(scale > 0.0))
        throw DomainError("lineshape fit needs nonzero counts");
    y /= scale;

    Eigen::Index peak = 0;
    y.maxCoeff(&peak);
    const double center = x(peak);
    if (x(0) >= center || x(n - 1) <= center + opts.sideband_offset)
        throw DomainError(fmt::format(
            "samples span [{}, {}] MHz but must bracket the carrier at {} and its sideband at {}",
            x(0), x(n - 1), center, center + opts.sideband_offset));

    const Model model{opts.shared_width, opts.sideband_offset};
    const double width = half_width(x, y, peak);
    Eigen::VectorXd p(model.size());
    p(0) = center;
    p(1) = width;
    if (!model.shared)
        p(2) = width;
    p(model.ac()) = y(peak);
    Eigen::Index side = 0;
    (x.array() - center - opts.sideband_offset).abs().minCoeff(&side);
    p(model.as()) = std::max(y(side) - lorentzian(y(peak), width, x(side) - center), 0.01 * y(peak));

    Residual f(model, x, y);
    Eigen::LevenbergMarquardt<Residual> lm(f);
    lm.setXtol(opts.tolerance);
    lm.setFtol(opts.tolerance);
    lm.setGtol(0.0);
    lm.setMaxfev(opts.max_evaluations);
    const auto status = lm.minimize(p);
    if (!converged(status))
        throw NonConvergenceError(
            fmt::format("lineshape fit did not converge (status {})", static_cast<int>(status)));

    Eigen::VectorXd r(n);
    f(p, r);
    Eigen::MatrixXd j(n, model.size());
    f.df(p, j);
    const Eigen::MatrixXd normal = j.transpose() * j;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    const double dof = static_cast<double>(n - model.size());
    const double sigma2 = dof > 0.0 ? r.squaredNorm() / dof : 0.0;
    Eigen::MatrixXd cov = sigma2 * ldlt.solve(Eigen::MatrixXd::Identity(model.size(), model.size()));

    // Undo the intensity normalization on amplitudes.
    Eigen::VectorXd unit = Eigen::VectorXd::Ones(model.size());
    unit(model.ac()) = scale;
    unit(model.as()) = scale;
    p = p.cwiseProduct(unit);
    cov = unit.asDiagonal() * cov * unit.asDiagonal();
    p(1) = std::abs(p(1));
    if (!model.shared)
        p(2) = std::abs(p(2));

    LineshapeFit fit;
    fit.model = model.lineshape(p);
    fit.parameters = model.shared
                         ? std::vector<std::string>{"carrier_center", "width", "carrier_amplitude",
                                                    "sideband_amplitude"}
                         : std::vector<std::string>{"carrier_center", "carrier_width",
                                                    "sideband_width", "carrier_amplitude",
                                                    "sideband_amplitude"};
    fit.values = p;
    fit.covariance = cov;
    const double ac = p(model.ac()), as = p(model.as());
    fit.ratio = as / ac;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(model.size());
    g(model.ac()) = -as / (ac * ac);
    g(model.as()) = 1.0 / ac;
    fit.ratio_sigma = std::sqrt(std::max(g.dot(cov * g), 0.0));
    fit.residual_rms = scale * std::sqrt(r.squaredNorm() / static_cast<double>(n));
    fit.evaluations = static_cast<int>(lm.nfev());

    fit.degenerate = fit.model.carrier_width + fit.model.sideband_width >= opts.sideband_offset ||
                     !(ldlt.rcond() > 1e-14) || as < 0.0;
    return fit;
}

} // namespace microtrap::photometry
