#include "mwreg/lssvm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mwreg/parallel.hpp"
#include "mwreg/volume_io.hpp"

namespace mwreg {

ParamVector to_params(const WeightVector& w)
{
    ParamVector p{};
    for (int k = 0; k < kNumMetrics; ++k)
        p[k] = w.metric[k];
    p[kNumMetrics] = w.pairwise;
    return p;
}

WeightVector from_params(const ParamVector& p)
{
    WeightVector w;
    for (int k = 0; k < kNumMetrics; ++k)
        w.metric[k] = p[k];
    w.pairwise = p[kNumMetrics];
    return w;
}

double dot(const ParamVector& a, const ParamVector& b)
{
    double s = 0.0;
    for (int k = 0; k < kParamDim; ++k)
        s += a[k] * b[k];
    return s;
}

WeightVector default_w0()
{
    WeightVector w;
    w.metric = {0.1, 10.0, 10.0, 10.0};
    w.pairwise = 1.0;
    return w;
}

TrainingInstance prepare_instance(const TrainSample& sample, ClassId c, const TrainingConfig& config)
{
    const int f = config.downsample_factor;
    const Volume source = downsample(sample.source, f);
    const Volume target = downsample(sample.target, f);
    const SegMask source_mask = downsample(sample.source_mask, f);
    const SegMask target_mask = downsample(sample.target_mask, f);

    TrainingInstance inst;
    inst.id = sample.id;
    inst.class_id = c;
    inst.grid = build_grid(target.geometry(), config.grid_spacing_mm, config.grid_margin);
    inst.labels = build_label_set(config.max_step_fraction * config.grid_spacing_mm, config.labels_per_axis);
    UnaryTableOptions opts;
    opts.half_extent = patch_half_extent_for(target.geometry(), config.grid_spacing_mm);
    opts.mi_bins = config.mi_bins;
    inst.features = build_unary_table(source, target, inst.grid, inst.labels, opts);
    inst.loss = build_loss_table(source_mask, target_mask, inst.grid, inst.labels, c);
    inst.feature_scale = 1.0 / static_cast<double>(inst.grid.node_count());
    return inst;
}

ParamVector joint_feature_map(const TrainingInstance& inst, const Labeling& d)
{
    if (d.size() != inst.grid.node_count())
        throw std::invalid_argument("labeling length does not match grid");
    ParamVector psi{};
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double* f = inst.features.features(i, static_cast<std::size_t>(d[i]));
        for (int k = 0; k < kNumMetrics; ++k)
            psi[k] += f[k];
    }
    for (const auto& [a, b] : inst.grid.edges)
        psi[kNumMetrics] += label_distance(inst.labels, static_cast<std::size_t>(d[static_cast<std::size_t>(a)]),
                                           static_cast<std::size_t>(d[static_cast<std::size_t>(b)]));
    for (double& v : psi)
        v *= inst.feature_scale;
    return psi;
}

EnergyModel class_energy_model(const TrainingInstance& inst, const WeightVector& w)
{
    return augmented_model(inst, w, 0.0);
}

EnergyModel augmented_model(const TrainingInstance& inst, const WeightVector& w, double loss_scale)
{
    if (!(w.pairwise >= 0.0))
        throw std::invalid_argument("pairwise weight must be >= 0");
    std::vector<double> unary = combine_unaries(inst.features, w);
    for (std::size_t k = 0; k < unary.size(); ++k)
        unary[k] = inst.feature_scale * unary[k] + loss_scale * inst.loss.values[k];
    return EnergyModel(inst.grid, inst.labels, std::move(unary), inst.feature_scale * w.pairwise);
}

double instance_loss(const TrainingInstance& inst, const Labeling& d) { return inst.loss.evaluate(d); }

Labeling solve_augmented(const TrainingInstance& inst, const WeightVector& w, double loss_scale, const Labeling& init,
                         const InferenceOptions& opts)
{
    const EnergyModel model = augmented_model(inst, w, loss_scale);
    double configs = 1.0;
    for (std::size_t i = 0; i < model.nodes() && configs <= static_cast<double>(opts.exact_limit); ++i)
        configs *= static_cast<double>(model.labels());
    if (opts.exact_limit > 0 && configs <= static_cast<double>(opts.exact_limit))
        return solve_exact(model, opts.exact_limit).labeling;
    return solve_expansion(model, init, opts.expansion).labeling;
}

Labeling impute_latent(const TrainingInstance& inst, const WeightVector& w, double eta, const InferenceOptions& opts,
                       const Labeling* warm_start)
{
    if (!(eta >= 0.0))
        throw std::invalid_argument("eta must be >= 0");
    const Labeling init = warm_start ? *warm_start : zero_labeling(inst.grid, inst.labels);
    return solve_augmented(inst, w, eta, init, opts);
}

ViolatedConstraint most_violated(const TrainingInstance& inst, const WeightVector& w, const InferenceOptions& opts,
                                 const Labeling* warm_start)
{
    const Labeling init = warm_start ? *warm_start : zero_labeling(inst.grid, inst.labels);
    ViolatedConstraint v;
    v.labeling = solve_augmented(inst, w, -1.0, init, opts);
    v.constraint.psi = joint_feature_map(inst, v.labeling);
    v.constraint.loss = instance_loss(inst, v.labeling);
    return v;
}

bool SampleWorkingSet::add(const Constraint& c)
{
    for (const auto& k : constraints) {
        bool same = true;
        for (int j = 0; j < kParamDim && same; ++j)
            same = std::abs(k.psi[j] - c.psi[j]) <= 1e-12;
        if (same)
            return false;
    }
    constraints.push_back(c);
    return true;
}

double slack(const SampleWorkingSet& ws, const WeightVector& w)
{
    const ParamVector p = to_params(w);
    double xi = 0.0;
    for (const auto& k : ws.constraints)
        xi = std::max(xi, dot(p, ws.psi_hat) - dot(p, k.psi) + k.loss);
    return xi;
}

double ssvm_objective(const std::vector<SampleWorkingSet>& sets, const WeightVector& w, const Hyperparams& hp)
{
    const ParamVector p = to_params(w);
    const ParamVector p0 = to_params(hp.w0);
    double reg = 0.0;
    for (int k = 0; k < kParamDim; ++k)
        reg += 0.5 * p[k] * p[k] + hp.alpha * (p[k] - p0[k]) * (p[k] - p0[k]);
    double xi = 0.0;
    for (const auto& ws : sets)
        xi += slack(ws, w);
    return reg + (sets.empty() ? 0.0 : hp.C / static_cast<double>(sets.size()) * xi);
}

// Dual coordinate ascent. Each sample owns a simplex of multipliers summing
// to C/N: one per stored constraint (a_k = psi_hat - psi_k, b_k = loss_k)
// plus one for xi_i >= 0 (a = 0, b = 0). The multiplier of w_p >= 0 is kept
// at its closed-form optimum, which amounts to clipping w_p at zero.
SsvmResult ssvm_step(const std::vector<SampleWorkingSet>& sets, const Hyperparams& hp)
{
    if (!(hp.C > 0.0) || !(hp.alpha >= 0.0))
        throw std::invalid_argument("ssvm_step needs C > 0 and alpha >= 0");
    const double lambda = 1.0 + 2.0 * hp.alpha;
    const ParamVector p0 = to_params(hp.w0);
    const std::size_t N = sets.size();
    const double budget = N ? hp.C / static_cast<double>(N) : 0.0;

    struct Block {
        std::vector<ParamVector> a;
        std::vector<double> b;
        std::vector<double> mu;
    };
    std::vector<Block> blocks(N);
    for (std::size_t i = 0; i < N; ++i) {
        Block& blk = blocks[i];
        blk.a.push_back(ParamVector{});
        blk.b.push_back(0.0);
        blk.mu.push_back(budget);
        for (const auto& c : sets[i].constraints) {
            ParamVector a{};
            for (int k = 0; k < kParamDim; ++k)
                a[k] = sets[i].psi_hat[k] - c.psi[k];
            blk.a.push_back(a);
            blk.b.push_back(c.loss);
            blk.mu.push_back(0.0);
        }
    }

    // z = 2 alpha w0 - sum mu a ; w = z / lambda with w_p clipped at 0.
    ParamVector z{};
    for (int k = 0; k < kParamDim; ++k)
        z[k] = 2.0 * hp.alpha * p0[k];
    auto weights = [&] {
        ParamVector w{};
        for (int k = 0; k < kParamDim; ++k)
            w[k] = z[k] / lambda;
        w[kNumMetrics] = std::max(0.0, w[kNumMetrics]);
        return w;
    };

    SsvmResult res;
    ParamVector w = weights();
    for (int it = 0; it < hp.max_qp_iterations; ++it) {
        double worst = 0.0;
        for (Block& blk : blocks) {
            const std::size_t m = blk.mu.size();
            if (m < 2)
                continue;
            // A few pair updates per block per sweep.
            for (std::size_t rep = 0; rep < m; ++rep) {
                std::size_t up = 0, dn = 0;
                double g_up = -std::numeric_limits<double>::infinity();
                double g_dn = std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < m; ++k) {
                    const double g = dot(w, blk.a[k]) + blk.b[k];
                    if (g > g_up) {
                        g_up = g;
                        up = k;
                    }
                    if (blk.mu[k] > 0.0 && g < g_dn) {
                        g_dn = g;
                        dn = k;
                    }
                }
                const double gap = g_up - g_dn;
                worst = std::max(worst, gap);
                if (up == dn || gap <= hp.qp_tol)
                    break;
                ParamVector da{};
                double norm2 = 0.0;
                for (int k = 0; k < kParamDim; ++k) {
                    da[k] = blk.a[up][k] - blk.a[dn][k];
                    norm2 += da[k] * da[k];
                }
                double t = norm2 > 0.0 ? gap * lambda / norm2 : blk.mu[dn];
                t = std::min(t, blk.mu[dn]);
                blk.mu[up] += t;
                blk.mu[dn] -= t;
                if (blk.mu[dn] < 1e-15 * budget)
                    blk.mu[dn] = 0.0;
                for (int k = 0; k < kParamDim; ++k)
                    z[k] -= t * da[k];
                w = weights();
            }
        }
        res.iterations = it + 1;
        if (worst <= hp.qp_tol) {
            res.converged = true;
            break;
        }
    }

    res.w = from_params(w);
    double obj = 0.0;
    for (int k = 0; k < kParamDim; ++k)
        obj += 0.5 * w[k] * w[k] + hp.alpha * (w[k] - p0[k]) * (w[k] - p0[k]);
    for (const auto& ws : sets) {
        res.slacks.push_back(slack(ws, res.w));
        obj += budget * res.slacks.back();
    }
    if (!std::isfinite(obj))
        throw std::runtime_error("ssvm_step: non-finite objective");
    res.objective = obj;
    return res;
}

namespace {

struct PoolEntry {
    Labeling labeling;
    Constraint constraint;
};

// Every labeling met so far for one sample. Each is a valid candidate for
// both the imputation minimum and the most-violated maximum, so the
// objective is evaluated against the best of them.
struct SamplePool {
    std::vector<PoolEntry> entries;

    void add(const TrainingInstance& inst, const Labeling& d)
    {
        Constraint c{joint_feature_map(inst, d), instance_loss(inst, d)};
        for (const auto& e : entries) {
            bool same = true;
            for (int k = 0; k < kParamDim && same; ++k)
                same = std::abs(e.constraint.psi[k] - c.psi[k]) <= 1e-12;
            if (same && std::abs(e.constraint.loss - c.loss) <= 1e-12)
                return;
        }
        entries.push_back({d, c});
    }
};

struct OuterState {
    double objective = 0.0;
    double mean_loss = 0.0;
    std::vector<Labeling> imputed;
    std::vector<Labeling> violators;
};

} // namespace

TrainReport cccp_train(const std::vector<TrainingInstance>& instances, const Hyperparams& hp,
                       const InferenceOptions& opts, const TrainLogger& log)
{
    if (instances.empty())
        throw std::invalid_argument("cccp_train needs at least one sample");
    const std::size_t N = instances.size();
    const double budget = hp.C / static_cast<double>(N);
    std::vector<SamplePool> pools(N);

    // Outer objective at w: imputation and most-violated solves, each
    // compared against every labeling already in the pool.
    auto evaluate = [&](const WeightVector& w, const OuterState& prev) {
        OuterState st;
        st.imputed.resize(N);
        st.violators.resize(N);
        std::vector<double> terms(N), losses(N);
        const ParamVector p = to_params(w);
        parallel_for(N, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                const TrainingInstance& inst = instances[i];
                SamplePool& pool = pools[i];
                const Labeling* warm = prev.imputed.empty() ? nullptr : &prev.imputed[i];
                pool.add(inst, impute_latent(inst, w, hp.eta, opts, warm));
                std::size_t best_min = 0;
                double min_term = std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < pool.entries.size(); ++k) {
                    const Constraint& c = pool.entries[k].constraint;
                    const double v = dot(p, c.psi) + hp.eta * c.loss;
                    if (v < min_term) {
                        min_term = v;
                        best_min = k;
                    }
                }
                st.imputed[i] = pool.entries[best_min].labeling;
                losses[i] = pool.entries[best_min].constraint.loss;

                pool.add(inst, most_violated(inst, w, opts, &st.imputed[i]).labeling);
                if (!prev.violators.empty())
                    pool.add(inst, most_violated(inst, w, opts, &prev.violators[i]).labeling);
                std::size_t best_max = 0;
                double max_term = -std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < pool.entries.size(); ++k) {
                    const Constraint& c = pool.entries[k].constraint;
                    const double v = c.loss - dot(p, c.psi);
                    if (v > max_term) {
                        max_term = v;
                        best_max = k;
                    }
                }
                st.violators[i] = pool.entries[best_max].labeling;
                terms[i] = max_term + min_term;
            }
        });
        const ParamVector p0 = to_params(hp.w0);
        double reg = 0.0;
        for (int k = 0; k < kParamDim; ++k)
            reg += 0.5 * p[k] * p[k] + hp.alpha * (p[k] - p0[k]) * (p[k] - p0[k]);
        double sum = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            sum += terms[i];
            st.mean_loss += losses[i] / static_cast<double>(N);
        }
        st.objective = reg + budget * sum;
        return st;
    };

    TrainReport report;
    report.class_id = instances.front().class_id;
    WeightVector w = hp.w0;
    OuterState state = evaluate(w, OuterState{});

    for (int t = 0; t < hp.max_outer; ++t) {
        // Convex part: cutting planes on the SSVM with the imputed deformations fixed.
        std::vector<SampleWorkingSet> sets(N);
        for (std::size_t i = 0; i < N; ++i) {
            sets[i].psi_hat = joint_feature_map(instances[i], state.imputed[i]);
            for (const auto& e : pools[i].entries)
                sets[i].add(e.constraint);
        }
        WeightVector inner_w = ssvm_step(sets, hp).w;
        int inner = 1;
        for (; inner < hp.max_inner; ++inner) {
            std::vector<ViolatedConstraint> found(N);
            parallel_for(N, [&](std::size_t b, std::size_t e) {
                for (std::size_t i = b; i < e; ++i)
                    found[i] = most_violated(instances[i], inner_w, opts, &state.violators[i]);
            });
            bool grown = false;
            for (std::size_t i = 0; i < N; ++i) {
                const ParamVector q = to_params(inner_w);
                const Constraint& c = found[i].constraint;
                const double violation = dot(q, sets[i].psi_hat) - dot(q, c.psi) + c.loss;
                pools[i].add(instances[i], found[i].labeling);
                if (violation > slack(sets[i], inner_w) + hp.cut_tol && sets[i].add(c))
                    grown = true;
            }
            if (!grown)
                break;
            inner_w = ssvm_step(sets, hp).w;
        }
        std::size_t total = 0;
        for (const auto& s : sets)
            total += s.constraints.size();

        OuterRecord rec;
        rec.iter = t;
        rec.objective = state.objective;
        rec.mean_imputed_loss = state.mean_loss;
        rec.constraints_total = total;
        rec.inner_iterations = inner;
        rec.w = w;
        report.records.push_back(rec);
        if (log)
            log(rec);

        // Inference is approximate, so the new iterate is only accepted if
        // the objective does not go up; otherwise the step is halved.
        bool accepted = false;
        OuterState next;
        WeightVector next_w;
        const ParamVector from = to_params(w), to = to_params(inner_w);
        for (double beta = 1.0; beta >= 1.0 / 16.0; beta *= 0.5) {
            ParamVector mix{};
            for (int k = 0; k < kParamDim; ++k)
                mix[k] = from[k] + beta * (to[k] - from[k]);
            next_w = from_params(mix);
            next = evaluate(next_w, state);
            if (next.objective <= state.objective) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            report.converged = true;
            break;
        }
        const double decrease = state.objective - next.objective;
        w = next_w;
        state = std::move(next);
        if (decrease < hp.epsilon) {
            OuterRecord last;
            last.iter = t + 1;
            last.objective = state.objective;
            last.mean_imputed_loss = state.mean_loss;
            last.w = w;
            report.records.push_back(last);
            if (log)
                log(last);
            report.converged = true;
            break;
        }
    }
    report.w = w;
    return report;
}

TrainReport train_class(const std::vector<TrainSample>& samples, ClassId c, const TrainingConfig& config,
                        const Hyperparams& hp, const TrainLogger& log)
{
    std::vector<TrainingInstance> instances;
    instances.reserve(samples.size());
    for (const auto& s : samples)
        instances.push_back(prepare_instance(s, c, config));
    return cccp_train(instances, hp, config.inference, log);
}

WeightMatrix assemble_weight_matrix(const std::vector<std::pair<ClassId, WeightVector>>& per_class,
                                    std::size_t num_classes)
{
    std::vector<WeightVector> cols(num_classes);
    std::vector<bool> seen(num_classes, false);
    for (const auto& [c, w] : per_class) {
        if (c >= num_classes)
            throw std::invalid_argument("weight vector for undeclared class " + std::to_string(c));
        cols[c] = w;
        seen[c] = true;
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (!seen[c])
            throw std::invalid_argument("missing weight vector for class " + std::to_string(c));
    }
    return WeightMatrix(std::move(cols));
}

} // namespace mwreg
