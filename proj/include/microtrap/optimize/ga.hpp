#pragma once

#include "microtrap/fields/rail_design.hpp"
#include "microtrap/optimize/fitness.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace microtrap::optimize
{
/// Control points of the inner rf edge perturbation, ascending in s.
struct EdgeGenome
{
    std::vector<fields::EdgePoint> points;

    /// Throws DomainError unless 0 <= s < span, s strictly increasing and
    /// |offset| <= box.
    void validate(double span, double box) const;
    bool operator==(const EdgeGenome&) const = default;
};

/// Base design with the genome as its edge perturbation.
[[nodiscard]] fields::RailDesign apply_genome(const EdgeGenome& g, const fields::RailDesign& base);

/// Layout with the spline edge through the genome's points; the outer edge
/// follows at constant width. Throws SelfIntersectionError on fold-back.
[[nodiscard]] fields::TrapLayout interpolate_edge(const EdgeGenome& g,
                                                  const fields::RailDesign& base);

struct GAConfig
{
    int population = 32;
    int generations = 100;
    double mutation_scale = 0.5;   // um, Gaussian offset mutation
    double mutation_rate = 0.3;    // per-point probability; at least one point mutates
    double crossover_rate = 0.7;
    int elites = 2;
    int tournament = 2;
    double insertion_rate = 0.1;
    double deletion_rate = 0.1;
    int max_resamples = 10;        // infeasible children redrawn this many times
    int max_points = 8;
    double offset_box = 10.0;      // um
    double span = 600.0;           // s range of control points
    std::uint64_t seed = 1;
    int threads = 1;

    void validate() const;
};

struct Candidate
{
    EdgeGenome genome;
    FitnessReport report;
};

struct GenerationLog
{
    int generation = 0;
    double best = 0.0;
    double median = 0.0;
    int feasible = 0;
};

struct GAResult
{
    std::vector<Candidate> candidates; // distinct feasible genomes, ascending fitness
    std::vector<GenerationLog> history;
    std::uint64_t seed = 0;
};

using Evaluator = std::function<FitnessReport(const EdgeGenome&)>;

/// Elitist GA with tournament selection, one-point crossover on the control
/// point list (cut at an s value), Gaussian offset mutation, and neutral
/// insertion/deletion of points. Children that are infeasible are redrawn up
/// to max_resamples times and otherwise replaced by a clone of their first
/// parent. Each child draws from its own seeded stream, so the result does
/// not depend on `threads`. Throws NoFeasibleCandidateError when the seed
/// genome and every offspring are infeasible.
[[nodiscard]] GAResult run_ga(const EdgeGenome& seed, const Evaluator& evaluate,
                              const GAConfig& cfg);

/// GA over the edge of a rail design, starting from its own edge points.
[[nodiscard]] GAResult run_ga(const fields::RailDesign& base, const fields::DriveParams& drive,
                              const GAConfig& cfg, const FitnessOptions& opts = {});

/// Distance from the mirror centre at which |E_rf| along the profile first
/// falls to `fraction` of its peak beyond the peak; infinity if never.
[[nodiscard]] double decay_distance(const FitnessReport& r, double fraction = 0.1);

/// Among the top_k candidates by fitness, the one with the shortest decay
/// distance; ties go to the lower fitness. Throws NoFeasibleCandidateError
/// when empty.
[[nodiscard]] const Candidate& select_final(const std::vector<Candidate>& candidates,
                                            int top_k = 5);

} // namespace microtrap::optimize
