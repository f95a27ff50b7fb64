#include "mwreg/mrf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mwreg/maxflow.hpp"
#include "mwreg/parallel.hpp"

namespace mwreg {

WeightMatrix::WeightMatrix(std::vector<WeightVector> columns) : columns_(std::move(columns))
{
    if (columns_.empty())
        throw std::invalid_argument("weight matrix needs at least one class column");
    for (const auto& c : columns_) {
        if (!(c.pairwise >= 0.0))
            throw std::invalid_argument("pairwise weight must be >= 0");
    }
}

MetricMask WeightMatrix::active_metrics() const
{
    MetricMask m{};
    for (const auto& c : columns_)
        for (int k = 0; k < kNumMetrics; ++k)
            m[k] = m[k] || c.metric[k] != 0.0;
    return m;
}

double WeightMatrix::pairwise_weight() const
{
    double s = 0.0;
    for (const auto& c : columns_)
        s += c.pairwise;
    return columns_.empty() ? 0.0 : s / static_cast<double>(columns_.size());
}

double label_distance(const DisplacementLabelSet& labels, std::size_t l, std::size_t m)
{
    const double d = l1_norm(labels.vectors[l] - labels.vectors[m]);
    return labels.max_step_mm > 0.0 ? d / labels.max_step_mm : d;
}

EnergyModel::EnergyModel(const ControlGrid& grid, const DisplacementLabelSet& labels, std::vector<double> unary,
                         double pairwise_weight)
    : nodes_(grid.node_count()), labels_(labels.size()), edges_(grid.edges), unary_(std::move(unary)),
      pairwise_weight_(pairwise_weight)
{
    distance_.resize(labels_ * labels_);
    for (std::size_t l = 0; l < labels_; ++l)
        for (std::size_t m = 0; m < labels_; ++m)
            distance_[l * labels_ + m] = label_distance(labels, l, m);
    finish();
}

EnergyModel::EnergyModel(std::size_t nodes, std::vector<std::pair<int, int>> edges, std::vector<double> distances,
                         std::vector<double> unary, double pairwise_weight)
    : nodes_(nodes), edges_(std::move(edges)), distance_(std::move(distances)), unary_(std::move(unary)),
      pairwise_weight_(pairwise_weight)
{
    if (nodes_ == 0 || unary_.size() % nodes_ != 0)
        throw std::invalid_argument("unary table size is not a multiple of the node count");
    labels_ = unary_.size() / nodes_;
    if (distance_.size() != labels_ * labels_)
        throw std::invalid_argument("label distance table has the wrong size");
    finish();
}

void EnergyModel::finish()
{
    if (unary_.size() != nodes_ * labels_)
        throw std::invalid_argument("unary table size does not match nodes x labels");
    if (!(pairwise_weight_ >= 0.0))
        throw std::invalid_argument("pairwise weight must be >= 0");
    adjacency_.assign(nodes_, {});
    for (const auto& [a, b] : edges_) {
        if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= nodes_ || static_cast<std::size_t>(b) >= nodes_)
            throw std::invalid_argument("edge references a node outside the model");
        adjacency_[static_cast<std::size_t>(a)].push_back(b);
        adjacency_[static_cast<std::size_t>(b)].push_back(a);
    }
}

double EnergyModel::energy(const Labeling& d) const
{
    if (d.size() != nodes_)
        throw std::invalid_argument("labeling length does not match model");
    double e = 0.0;
    for (std::size_t i = 0; i < nodes_; ++i)
        e += unary(i, static_cast<std::size_t>(d[i]));
    for (const auto& [a, b] : edges_)
        e += pairwise(static_cast<std::size_t>(d[static_cast<std::size_t>(a)]),
                      static_cast<std::size_t>(d[static_cast<std::size_t>(b)]));
    return e;
}

SolveResult solve_exact(const EnergyModel& model, std::size_t max_configurations)
{
    const std::size_t n = model.nodes();
    const std::size_t L = model.labels();
    double configs = 1.0;
    for (std::size_t i = 0; i < n; ++i)
        configs *= static_cast<double>(L);
    if (configs > static_cast<double>(max_configurations))
        throw std::invalid_argument("instance too large for exhaustive search (" + std::to_string(configs) +
                                    " labelings)");
    Labeling cur(n, 0);
    SolveResult best;
    best.energy = std::numeric_limits<double>::infinity();
    for (;;) {
        const double e = model.energy(cur);
        if (e < best.energy) {
            best.energy = e;
            best.labeling = cur;
        }
        std::size_t k = 0;
        while (k < n && ++cur[k] == static_cast<int>(L)) {
            cur[k] = 0;
            ++k;
        }
        if (k == n)
            break;
    }
    best.trace = {best.energy};
    return best;
}

namespace {

bool improves(double candidate, double current)
{
    return candidate < current - 1e-12 * (1.0 + std::abs(current));
}

// One expansion move of label alpha; returns the proposed labeling.
Labeling expansion_move(const EnergyModel& model, const Labeling& cur, int alpha)
{
    const std::size_t n = model.nodes();
    std::vector<double> keep(n), take(n); // cost of x=0 (keep) / x=1 (switch to alpha)
    for (std::size_t i = 0; i < n; ++i) {
        keep[i] = model.unary(i, static_cast<std::size_t>(cur[i]));
        take[i] = model.unary(i, static_cast<std::size_t>(alpha));
    }
    MaxFlow graph(static_cast<int>(n));
    const auto a = static_cast<std::size_t>(alpha);
    for (const auto& [p, q] : model.edges()) {
        const auto fp = static_cast<std::size_t>(cur[static_cast<std::size_t>(p)]);
        const auto fq = static_cast<std::size_t>(cur[static_cast<std::size_t>(q)]);
        const double e00 = model.pairwise(fp, fq);
        const double e01 = model.pairwise(fp, a);
        const double e10 = model.pairwise(a, fq);
        const double e11 = 0.0;
        // E = e00 + (e10-e00) x_p + (e11-e10) x_q + (e01+e10-e00-e11)(1-x_p) x_q
        take[static_cast<std::size_t>(p)] += e10 - e00;
        take[static_cast<std::size_t>(q)] += e11 - e10;
        const double cap = std::max(0.0, e01 + e10 - e00 - e11);
        graph.add_edge(p, q, cap);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double lo = std::min(keep[i], take[i]);
        // source->i is cut when i takes alpha; i->sink when it keeps its label.
        graph.add_terminal(static_cast<int>(i), take[i] - lo, keep[i] - lo);
    }
    graph.solve();
    Labeling next = cur;
    for (std::size_t i = 0; i < n; ++i) {
        if (!graph.in_source_set(static_cast<int>(i)))
            next[i] = alpha;
    }
    return next;
}

void check_labeling(const EnergyModel& model, const Labeling& d)
{
    if (d.size() != model.nodes())
        throw std::invalid_argument("initial labeling length does not match model");
    for (int l : d) {
        if (l < 0 || static_cast<std::size_t>(l) >= model.labels())
            throw std::invalid_argument("initial labeling has an out-of-range label");
    }
}

} // namespace

SolveResult solve_icm(const EnergyModel& model, Labeling init, int max_iterations)
{
    check_labeling(model, init);
    SolveResult r;
    r.labeling = std::move(init);
    r.energy = model.energy(r.labeling);
    r.trace.push_back(r.energy);
    const auto& nbrs = model.neighbours();
    for (int it = 0; it < max_iterations; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < model.nodes(); ++i) {
            auto local = [&](std::size_t l) {
                double e = model.unary(i, l);
                for (int j : nbrs[i])
                    e += model.pairwise(l, static_cast<std::size_t>(r.labeling[static_cast<std::size_t>(j)]));
                return e;
            };
            const auto cur = static_cast<std::size_t>(r.labeling[i]);
            double best = local(cur);
            std::size_t arg = cur;
            for (std::size_t l = 0; l < model.labels(); ++l) {
                const double e = local(l);
                if (improves(e, best)) {
                    best = e;
                    arg = l;
                }
            }
            if (arg != cur) {
                r.labeling[i] = static_cast<int>(arg);
                changed = true;
            }
        }
        ++r.sweeps;
        if (!changed)
            break;
        const double e = model.energy(r.labeling);
        r.trace.push_back(e);
        r.energy = e;
    }
    r.energy = model.energy(r.labeling);
    return r;
}

SolveResult solve_expansion(const EnergyModel& model, Labeling init, const ExpansionOptions& opts)
{
    check_labeling(model, init);
    SolveResult r;
    r.labeling = std::move(init);
    r.energy = model.energy(r.labeling);
    r.trace.push_back(r.energy);
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        bool accepted = false;
        for (std::size_t alpha = 0; alpha < model.labels(); ++alpha) {
            Labeling next = expansion_move(model, r.labeling, static_cast<int>(alpha));
            const double e = model.energy(next);
            if (improves(e, r.energy)) {
                r.labeling = std::move(next);
                r.energy = e;
                r.trace.push_back(e);
                accepted = true;
            }
        }
        ++r.sweeps;
        if (!accepted)
            break;
    }
    if (opts.icm_polish) {
        SolveResult polished = solve_icm(model, r.labeling);
        if (improves(polished.energy, r.energy)) {
            r.labeling = std::move(polished.labeling);
            r.energy = polished.energy;
            r.trace.push_back(r.energy);
        }
    }
    return r;
}

ClassId dominant_class(const MaskPatch& patch, std::size_t num_classes)
{
    std::array<std::size_t, 256> counts{};
    for (auto v : patch.values)
        ++counts[v];
    std::size_t best = 0;
    const std::size_t limit = std::min<std::size_t>(std::max<std::size_t>(num_classes, 1), 256);
    for (std::size_t c = 1; c < limit; ++c) {
        if (counts[c] > counts[best])
            best = c;
    }
    return static_cast<ClassId>(best);
}

std::vector<double> combine_unaries(const UnaryFeatureTable& table, const WeightVector& w)
{
    std::vector<double> out(table.nodes() * table.labels());
    for (std::size_t i = 0; i < table.nodes(); ++i)
        for (std::size_t l = 0; l < table.labels(); ++l) {
            const double* f = table.features(i, l);
            double s = 0.0;
            for (int k = 0; k < kNumMetrics; ++k)
                s += w.metric[k] * f[k];
            out[i * table.labels() + l] = s;
        }
    return out;
}

std::vector<ClassId> dominant_classes(const SegMask& source_mask, const ControlGrid& grid,
                                      const DisplacementLabelSet& labels, const Index3& half_extent,
                                      std::size_t num_classes, bool displaced)
{
    const std::size_t L = labels.size();
    std::vector<ClassId> out(grid.node_count() * L);
    parallel_for(grid.node_count(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const Vec3 p = grid.position(static_cast<int>(i));
            if (!displaced) {
                const ClassId c = dominant_class(extract_patch(source_mask, p, half_extent), num_classes);
                std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(i * L), L, c);
                continue;
            }
            for (std::size_t l = 0; l < L; ++l)
                out[i * L + l] = dominant_class(extract_patch(source_mask, p + labels.vectors[l], half_extent), num_classes);
        }
    });
    return out;
}

std::vector<double> combine_unaries(const UnaryFeatureTable& table, const WeightMatrix& w,
                                    const std::vector<ClassId>& dominant)
{
    if (dominant.size() != table.nodes() * table.labels())
        throw std::invalid_argument("dominant class table does not match the feature table");
    std::vector<double> out(dominant.size());
    for (std::size_t i = 0; i < table.nodes(); ++i)
        for (std::size_t l = 0; l < table.labels(); ++l) {
            const std::size_t k = i * table.labels() + l;
            if (dominant[k] >= w.classes())
                throw std::invalid_argument("no weight column for class " + std::to_string(dominant[k]));
            const WeightVector& col = w.column(dominant[k]);
            const double* f = table.features(i, l);
            double s = 0.0;
            for (int m = 0; m < kNumMetrics; ++m)
                s += col.metric[m] * f[m];
            out[k] = s;
        }
    return out;
}

} // namespace mwreg
