#include "microtrap/optimize/ga.hpp"

#include "microtrap/errors.hpp"
#include "microtrap/parallel.hpp"
#include "microtrap/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <random>

namespace microtrap::optimize
{
using fields::EdgePoint;

void EdgeGenome::validate(double span, double box) const
{
    for (std::size_t i = 0; i < points.size(); ++i)
    {
        const EdgePoint& p = points[i];
        if (!(p.s >= 0.0 && p.s < span))
            throw DomainError(fmt::format("edge point s = {} outside [0, {})", p.s, span));
        if (i > 0 && !(p.s > points[i - 1].s))
            throw DomainError("edge points must be strictly increasing in s");
        if (!(std::abs(p.offset) <= box))
            throw DomainError(fmt::format("edge offset {} outside +-{} um", p.offset, box));
    }
}

fields::RailDesign apply_genome(const EdgeGenome& g, const fields::RailDesign& base)
{
    fields::RailDesign d = base;
    d.edge_points = g.points;
    return d;
}

fields::TrapLayout interpolate_edge(const EdgeGenome& g, const fields::RailDesign& base)
{
    g.validate(base.edge_span, std::numeric_limits<double>::infinity());
    return fields::build_layout(apply_genome(g, base));
}

void GAConfig::validate() const
{
    if (population < 2)
        throw DomainError("GA population must be at least 2");
    if (generations < 0 || elites < 0 || elites >= population || tournament < 1 ||
        max_resamples < 0 || max_points < 0 || threads < 1)
        throw DomainError("GA counts out of range");
    if (!(mutation_scale >= 0.0 && offset_box > 0.0 && span > 0.0))
        throw DomainError("GA scales must be positive");
    for (const double p : {mutation_rate, crossover_rate, insertion_rate, deletion_rate})
        if (!(p >= 0.0 && p <= 1.0))
            throw DomainError("GA rates must lie in [0, 1]");
}

namespace
{
struct Individual
{
    EdgeGenome genome;
    FitnessReport report;
};

bool better(const Individual& a, const Individual& b)
{
    if (a.report.feasible() != b.report.feasible())
        return a.report.feasible();
    return a.report.fitness < b.report.fitness;
}

class Breeder
{
public:
    Breeder(const GAConfig& cfg, const Evaluator& evaluate, const std::vector<Individual>& parents)
        : cfg_(cfg), evaluate_(evaluate), parents_(parents)
    {
    }

    Individual child(int generation, int index) const
    {
        std::mt19937_64 rng(splitmix64(cfg_.seed ^ splitmix64((static_cast<std::uint64_t>(generation) << 32) |
                                                             static_cast<std::uint64_t>(index))));
        const Individual* first = nullptr;
        for (int attempt = 0; attempt <= cfg_.max_resamples; ++attempt)
        {
            const Individual& a = pick(rng);
            const Individual& b = pick(rng);
            first = &a;
            EdgeGenome g = a.genome;
            if (generation > 0 && uniform(rng) < cfg_.crossover_rate)
                g = crossover(a.genome, b.genome, rng);
            mutate(g, rng);
            try
            {
                g.validate(cfg_.span, cfg_.offset_box);
            }
            catch (const DomainError&)
            {
                continue;
            }
            FitnessReport r = evaluate_(g);
            if (r.feasible())
                return {std::move(g), std::move(r)};
        }
        return *first;
    }

private:
    static double uniform(std::mt19937_64& rng)
    {
        return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    }

    const Individual& pick(std::mt19937_64& rng) const
    {
        std::uniform_int_distribution<std::size_t> any(0, parents_.size() - 1);
        std::size_t best = any(rng);
        for (int k = 1; k < cfg_.tournament; ++k)
        {
            const std::size_t other = any(rng);
            if (better(parents_[other], parents_[best]))
                best = other;
        }
        return parents_[best];
    }

    EdgeGenome crossover(const EdgeGenome& a, const EdgeGenome& b, std::mt19937_64& rng) const
    {
        const double cut = cfg_.span * uniform(rng);
        EdgeGenome c;
        for (const auto& p : a.points)
            if (p.s < cut)
                c.points.push_back(p);
        for (const auto& p : b.points)
            if (p.s >= cut)
                c.points.push_back(p);
        return c;
    }

    void mutate(EdgeGenome& g, std::mt19937_64& rng) const
    {
        std::normal_distribution<double> gauss(0.0, cfg_.mutation_scale);
        auto& pts = g.points;
        if (!pts.empty() && cfg_.mutation_scale > 0.0)
        {
            bool any = false;
            for (auto& p : pts)
                if (uniform(rng) < cfg_.mutation_rate)
                {
                    p.offset = std::clamp(p.offset + gauss(rng), -cfg_.offset_box, cfg_.offset_box);
                    any = true;
                }
            if (!any)
            {
                auto& p = pts[std::uniform_int_distribution<std::size_t>(0, pts.size() - 1)(rng)];
                p.offset = std::clamp(p.offset + gauss(rng), -cfg_.offset_box, cfg_.offset_box);
            }
        }
        if (uniform(rng) < cfg_.insertion_rate && static_cast<int>(pts.size()) < cfg_.max_points)
        {
            // The new point sits on the current curve, so insertion alone
            // leaves the edge unchanged.
            const double s = cfg_.span * uniform(rng);
            const bool taken = std::any_of(pts.begin(), pts.end(),
                                           [&](const EdgePoint& p) { return p.s == s; });
            if (!taken)
            {
                const ClampedSpline delta = fields::edge_perturbation(pts, cfg_.span);
                pts.push_back({s, delta.empty() ? 0.0 : delta(s)});
                std::sort(pts.begin(), pts.end(),
                          [](const auto& x, const auto& y) { return x.s < y.s; });
            }
        }
        if (uniform(rng) < cfg_.deletion_rate && !pts.empty())
            pts.erase(pts.begin() +
                      static_cast<std::ptrdiff_t>(
                          std::uniform_int_distribution<std::size_t>(0, pts.size() - 1)(rng)));
    }

    const GAConfig& cfg_;
    const Evaluator& evaluate_;
    const std::vector<Individual>& parents_;
};

GenerationLog summarize(int generation, const std::vector<Individual>& pop)
{
    GenerationLog log;
    log.generation = generation;
    std::vector<double> f;
    for (const auto& ind : pop)
        if (ind.report.feasible())
            f.push_back(ind.report.fitness);
    log.feasible = static_cast<int>(f.size());
    if (f.empty())
    {
        log.best = log.median = std::numeric_limits<double>::infinity();
        return log;
    }
    std::sort(f.begin(), f.end());
    log.best = f.front();
    const std::size_t m = f.size() / 2;
    log.median = f.size() % 2 ? f[m] : 0.5 * (f[m - 1] + f[m]);
    return log;
}

} // namespace

GAResult run_ga(const EdgeGenome& seed, const Evaluator& evaluate, const GAConfig& cfg)
{
    cfg.validate();
    seed.validate(cfg.span, cfg.offset_box);
    GAResult result;
    result.seed = cfg.seed;

    const auto n = static_cast<std::size_t>(cfg.population);
    std::vector<Individual> pop(n);
    pop[0] = {seed, evaluate(seed)};
    {
        const std::vector<Individual> origin{pop[0]};
        const Breeder breeder(cfg, evaluate, origin);
        parallel_for(n - 1, cfg.threads,
                     [&](std::size_t i) { pop[i + 1] = breeder.child(0, static_cast<int>(i + 1)); });
    }
    std::stable_sort(pop.begin(), pop.end(), better);
    result.history.push_back(summarize(0, pop));

    for (int gen = 1; gen <= cfg.generations; ++gen)
    {
        std::vector<Individual> next(n);
        const auto elites = static_cast<std::size_t>(cfg.elites);
        std::copy(pop.begin(), pop.begin() + static_cast<std::ptrdiff_t>(elites), next.begin());
        const Breeder breeder(cfg, evaluate, pop);
        parallel_for(n - elites, cfg.threads, [&](std::size_t i) {
            next[elites + i] = breeder.child(gen, static_cast<int>(elites + i));
        });
        std::stable_sort(next.begin(), next.end(), better);
        pop = std::move(next);
        result.history.push_back(summarize(gen, pop));
    }

    for (const auto& ind : pop)
    {
        if (!ind.report.feasible())
            continue;
        const bool seen = std::any_of(result.candidates.begin(), result.candidates.end(),
                                      [&](const Candidate& c) { return c.genome == ind.genome; });
        if (!seen)
            result.candidates.push_back({ind.genome, ind.report});
    }
    if (result.candidates.empty())
        throw NoFeasibleCandidateError(
            fmt::format("no feasible candidate after {} generations", cfg.generations));
    return result;
}

GAResult run_ga(const fields::RailDesign& base, const fields::DriveParams& drive,
                const GAConfig& cfg, const FitnessOptions& opts)
{
    GAConfig c = cfg;
    c.span = base.edge_span;
    EdgeGenome seed{base.edge_points};
    std::sort(seed.points.begin(), seed.points.end(),
              [](const auto& x, const auto& y) { return x.s < y.s; });
    const Evaluator eval = [&](const EdgeGenome& g) {
        try
        {
            return fitness(interpolate_edge(g, base), drive, opts);
        }
        catch (const DomainError& e)
        {
            FitnessReport r;
            r.constraint_violations.push_back(e.what());
            return r;
        }
    };
    return run_ga(seed, eval, c);
}

double decay_distance(const FitnessReport& r, double fraction)
{
    const auto& z = r.profile_z;
    const auto& e = r.profile_field;
    if (z.empty())
        return std::numeric_limits<double>::infinity();
    const auto peak = static_cast<std::size_t>(std::max_element(e.begin(), e.end()) - e.begin());
    const double level = fraction * e[peak];
    for (std::size_t j = peak + 1; j < z.size(); ++j)
        if (e[j] <= level)
        {
            const double t = (e[j - 1] - level) / (e[j - 1] - e[j]);
            return std::abs(z[j - 1] + t * (z[j] - z[j - 1]));
        }
    return std::numeric_limits<double>::infinity();
}

const Candidate& select_final(const std::vector<Candidate>& candidates, int top_k)
{
    if (candidates.empty())
        throw NoFeasibleCandidateError("no candidates to select from");
    std::vector<const Candidate*> order;
    for (const auto& c : candidates)
        order.push_back(&c);
    std::stable_sort(order.begin(), order.end(), [](const Candidate* a, const Candidate* b) {
        return a->report.fitness < b->report.fitness;
    });
    order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(1, top_k))));
    const Candidate* best = order.front();
    double best_d = decay_distance(best->report);
    for (std::size_t i = 1; i < order.size(); ++i)
    {
        const double d = decay_distance(order[i]->report);
        if (d < best_d)
        {
            best = order[i];
            best_d = d;
        }
    }
    return *best;
}

} // namespace microtrap::optimize
