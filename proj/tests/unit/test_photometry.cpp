#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "microtrap/errors.hpp"
#include "microtrap/photometry/enhancement.hpp"
#include "microtrap/photometry/lineshape.hpp"
#include "microtrap/photometry/micromotion.hpp"
#include "microtrap/units.hpp"

#include <cmath>
#include <random>

using namespace microtrap;
using namespace microtrap::photometry;

namespace
{
Lineshape truth()
{
    Lineshape m;
    m.carrier_center = 1.7;
    m.carrier_width = 10.8;
    m.sideband_width = 10.8;
    m.carrier_amplitude = 4200.0;
    m.sideband_amplitude = 0.06 * 4200.0;
    return m;
}

std::vector<SpectrumSample> sample(const Lineshape& m, double lo = -80.0, double hi = 120.0,
                                   double step = 2.0)
{
    std::vector<SpectrumSample> s;
    for (double d = lo; d <= hi + 1e-9; d += step)
        s.push_back({d, eval_lineshape(m, d)});
    return s;
}
} // namespace

TEST_CASE("lineshape evaluation")
{
    Lineshape m = truth();
    const double tail = m.sideband_amplitude * m.sideband_width * m.sideband_width /
                        (m.sideband_offset * m.sideband_offset + m.sideband_width * m.sideband_width);
    CHECK(eval_lineshape(m, m.carrier_center) == doctest::Approx(m.carrier_amplitude + tail));
    m.sideband_amplitude = 0.0;
    for (double d : {1.0, 5.0, 30.0})
        CHECK(eval_lineshape(m, m.carrier_center + d) ==
              doctest::Approx(eval_lineshape(m, m.carrier_center - d)));
    CHECK(eval_lineshape(m, m.carrier_center + m.carrier_width) ==
          doctest::Approx(0.5 * m.carrier_amplitude));
}

TEST_CASE("noiseless round trip")
{
    const Lineshape m = truth();
    const auto fit = fit_lineshape(sample(m));
    CHECK_FALSE(fit.degenerate);
    CHECK(fit.model.carrier_center == doctest::Approx(m.carrier_center).epsilon(1e-6));
    CHECK(fit.model.carrier_width == doctest::Approx(m.carrier_width).epsilon(1e-6));
    CHECK(fit.model.carrier_amplitude == doctest::Approx(m.carrier_amplitude).epsilon(1e-6));
    CHECK(fit.model.sideband_amplitude == doctest::Approx(m.sideband_amplitude).epsilon(1e-6));
    CHECK(fit.ratio == doctest::Approx(0.06).epsilon(1e-6));
    CHECK(fit.covariance.rows() == static_cast<Eigen::Index>(fit.parameters.size()));
}

TEST_CASE("separate widths")
{
    Lineshape m = truth();
    m.sideband_width = 7.5;
    m.sideband_amplitude = 0.2 * m.carrier_amplitude;
    FitOptions o;
    o.shared_width = false;
    const auto fit = fit_lineshape(sample(m, -80.0, 120.0, 1.0), o);
    CHECK(fit.model.sideband_width == doctest::Approx(7.5).epsilon(1e-6));
    CHECK(fit.ratio == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(fit.parameters.size() == 5);
}

TEST_CASE("ratio is invariant under intensity rescaling")
{
    std::mt19937_64 rng(7);
    std::normal_distribution<double> noise(0.0, 0.03);
    auto s = sample(truth());
    for (auto& x : s)
        x.counts *= 1.0 + noise(rng);
    const auto a = fit_lineshape(s);
    for (auto& x : s)
        x.counts *= 37.5;
    const auto b = fit_lineshape(s);
    CHECK(b.ratio == doctest::Approx(a.ratio).epsilon(1e-8));
    CHECK(b.ratio_sigma == doctest::Approx(a.ratio_sigma).epsilon(1e-6));
}

TEST_CASE("noisy fits cover the truth within two sigma")
{
    std::mt19937_64 rng(20260101);
    std::normal_distribution<double> noise(0.0, 1.0);
    const Lineshape m = truth();
    const auto clean = sample(m);
    const double sigma = 0.05 * m.carrier_amplitude;
    int covered = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t)
    {
        auto s = clean;
        for (auto& x : s)
            x.counts += sigma * noise(rng);
        const auto fit = fit_lineshape(s);
        if (std::abs(fit.ratio - 0.06) <= 2.0 * fit.ratio_sigma)
            ++covered;
    }
    // Two-sided 2 sigma covers 95.4%.
    CHECK(covered >= 180);
}

TEST_CASE("fit input errors and degenerate flag")
{
    auto s = sample(truth());
    CHECK_THROWS_AS((void)fit_lineshape({s.begin(), s.begin() + 7}), DomainError);
    // Only the carrier side is sampled.
    CHECK_THROWS_AS((void)fit_lineshape(sample(truth(), -40.0, 20.0, 2.0)), DomainError);

    Lineshape wide = truth();
    wide.carrier_width = 40.0;
    wide.sideband_width = 40.0;
    const auto fit = fit_lineshape(sample(wide, -150.0, 200.0, 2.0));
    CHECK(fit.degenerate);
}

TEST_CASE("Bessel ratio inversion")
{
    CHECK(modulation_index(0.0) == 0.0);
    CHECK_THROWS_AS((void)modulation_index(-1e-3), DomainError);
    CHECK_THROWS_AS((void)modulation_index(1.0), DomainError);
    CHECK_THROWS_AS((void)modulation_index(2.0), DomainError);

    // Small-angle series R = (beta/2)^2.
    const double beta = 0.05;
    CHECK(modulation_index(beta * beta / 4.0) == doctest::Approx(beta).epsilon(1e-3));

    double last = -1.0;
    for (double r = 1e-4; r < 0.999; r += 0.01)
    {
        const double b = modulation_index(r);
        CHECK(b > last);
        last = b;
        CHECK(std::abs(sideband_ratio(b) - r) <= 1e-9 * r);
    }
    CHECK(modulation_index(0.06) == doctest::Approx(0.476).epsilon(2e-3));
}

TEST_CASE("micromotion projection")
{
    fields::DriveParams d;
    const Eigen::Vector3d e(0.0, 0.0, 1000.0);
    const double full = d.ion_charge * 1000.0 / (d.ion_mass * d.rf_frequency * d.rf_frequency);
    CHECK(micromotion_projection(d, e, beam_direction(0.0)) == doctest::Approx(full));
    CHECK(micromotion_projection(d, e, beam_direction(constants::pi / 2.0)) ==
          doctest::Approx(0.0).scale(full));
    CHECK(micromotion_projection(d, e, beam_direction(constants::pi / 4.0)) ==
          doctest::Approx(full / std::sqrt(2.0)));
    CHECK(micromotion_projection(d, e, 3.0 * beam_direction(0.3)) ==
          doctest::Approx(micromotion_projection(d, e, beam_direction(0.3))));
    CHECK_THROWS_AS((void)micromotion_projection(d, e, Eigen::Vector3d::Zero()), DomainError);
    CHECK(modulation_index_from_amplitude(397e-9 / (2.0 * constants::pi)) == doctest::Approx(1.0));
}

TEST_CASE("enhancement of baseline data is flat")
{
    AxialScan s;
    for (int k = 0; k <= 40; ++k)
    {
        s.z.push_back(-200.0 + 10.0 * k);
        s.counts.push_back(1500.0);
    }
    const auto p = enhancement_profile(s, s);
    CHECK(p.baseline == doctest::Approx(1500.0));
    for (double v : p.relative)
        CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("injected peak is recovered")
{
    AxialScan raw, reference, response;
    for (int k = 0; k <= 80; ++k)
    {
        const double z = -400.0 + 10.0 * k;
        // Detector response falls off away from z = -50 um.
        const double resp = 1.0 - 0.3 * std::pow((z + 50.0) / 400.0, 2);
        const double enh = 1.0 + 0.9 * std::exp(-std::pow((z - 30.0) / 40.0, 2));
        raw.z.push_back(z);
        raw.counts.push_back(800.0 * resp * enh);
        response.z.push_back(z);
        response.counts.push_back(resp);
        if (std::abs(z) >= 300.0)
        {
            reference.z.push_back(z);
            reference.counts.push_back(800.0 * resp);
        }
    }
    // The far scan mixes both sides of the mirror and is not evenly spaced.
    const auto q = enhancement_profile(raw, reference, response);
    // A reference that includes the peak inflates the baseline.
    const auto p = enhancement_profile(raw, raw, response);
    CHECK(q.peak == doctest::Approx(1.9).epsilon(1e-6));
    CHECK(q.peak_z == doctest::Approx(30.0));
    CHECK(p.peak_z == doctest::Approx(30.0));
    CHECK(p.peak < q.peak);

    AxialScan bad_response = response;
    bad_response.counts[3] = 0.0;
    CHECK_THROWS_AS((void)enhancement_profile(raw, raw, bad_response), DomainError);
    AxialScan unsorted = raw;
    std::swap(unsorted.z[1], unsorted.z[2]);
    CHECK_THROWS_AS((void)enhancement_profile(unsorted, raw), DomainError);
    CHECK_THROWS_AS((void)raw(1000.0), DomainError);
}
