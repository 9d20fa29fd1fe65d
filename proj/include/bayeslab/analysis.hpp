#pragma once

// Exhaustive checks of Pareto and balanced-Pareto optimality, value-difference
// bounds, evidence-ratio monitoring and self-optimization experiments.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "bayeslab/mixture.hpp"
#include "bayeslab/models.hpp"
#include "bayeslab/policies.hpp"
#include "bayeslab/valuation.hpp"

namespace bayeslab {

inline constexpr double kDominanceThreshold = 1e-9;

/// extract_policy_table: materialize an agent's choices on every percept
/// history shorter than m. Histories the agent cannot condition on (zero
/// probability under its model) keep action 0, as do their extensions.
inline PolicyTable extract_policy_table(Agent& agent, const Alphabet& alphabet, std::size_t m,
                                        std::uint64_t cap = enumeration_cap()) {
    PolicyTable table(alphabet.percept_count(), m);
    if (table.entry_count() > cap)
        throw BudgetExceeded("extract_policy_table: " + std::to_string(table.entry_count()) + " entries exceed the cap");
    std::vector<std::size_t> xs;
    std::function<void(const History&)> visit = [&](const History& h) {
        Action y;
        try {
            y = agent.act(h);
        } catch (const UndefinedConditional&) {
            return;
        }
        table.set(xs, y);
        if (h.size() + 1 >= table.depth_count()) return;
        for (std::size_t x = 0; x < alphabet.percept_count(); ++x) {
            xs.push_back(x);
            visit(h.extended(y, alphabet.percept(x)));
            xs.pop_back();
        }
    };
    visit(History{});
    return table;
}

/// V_nu^p for every class member, from the empty history.
inline std::vector<double> class_values(const WeightedClass& cls, const PolicyTable& p, std::size_t m) {
    std::vector<double> v(cls.size());
    for (std::size_t i = 0; i < cls.size(); ++i) v[i] = value_of_policy(cls.env(i), p, 1, m).value;
    return v;
}

inline double weighted_sum(const WeightedClass& cls, std::span<const double> v) {
    double s = 0.0;
    for (std::size_t i = 0; i < cls.size(); ++i) s += cls.weight(i) * v[i];
    return s;
}

/// a >= b everywhere (within the threshold) and a > b somewhere (beyond it).
inline bool pareto_dominates(std::span<const double> a, std::span<const double> b) {
    bool strict = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i] - kDominanceThreshold) return false;
        if (a[i] > b[i] + kDominanceThreshold) strict = true;
    }
    return strict;
}

struct ParetoVerdict {
    std::vector<double> subject_values;
    bool dominated = false;
    std::optional<std::uint64_t> witness_id;
    std::optional<PolicyTable> witness;
    std::vector<double> witness_values;
    std::uint64_t policies_checked = 0;
};

/// pareto_check: compares subject against every deterministic policy of horizon m.
inline ParetoVerdict pareto_check(const WeightedClass& cls, const PolicyTable& subject, std::size_t m,
                                  std::uint64_t cap = enumeration_cap()) {
    const auto& al = cls.alphabet();
    const auto policies = enumerate_policies(al.actions, al.percept_count(), m, cap);
    ParetoVerdict verdict;
    verdict.subject_values = class_values(cls, subject, m);
    double best_weighted = -1.0;
    policies.for_each([&](std::uint64_t id, const PolicyTable& p) {
        const auto v = class_values(cls, p, m);
        ++verdict.policies_checked;
        if (!pareto_dominates(v, verdict.subject_values)) return;
        verdict.dominated = true;
        const double w = weighted_sum(cls, v);
        if (!verdict.witness_id || strictly_better(w, best_weighted)) {
            best_weighted = w;
            verdict.witness_id = id;
            verdict.witness = p;
            verdict.witness_values = v;
        }
    });
    return verdict;
}

struct BalanceReport {
    std::vector<double> subject_values;
    std::vector<double> rival_values;
    std::vector<double> deltas;            // Delta_nu = V_nu^subject - V_nu^rival
    double delta = 0.0;                    // sum_nu w_nu Delta_nu
    std::vector<std::size_t> loss_set;     // L: Delta_nu > 0
    std::vector<std::size_t> gain_set;     // H: the rest
    double delta_loss = 0.0;               // Delta_L = sum_L w Delta
    double delta_gain = 0.0;               // Delta_H = |sum_H w Delta|
    bool nonnegative = false;              // Delta >= -1e-9 and Delta_H <= Delta_L + 1e-9
    bool gain_bound_holds = false;         // |Delta_eta| <= max_L Delta_lambda / w_eta, and the w_lambda/w_eta form for |L| = 1
};

inline BalanceReport balance_from_values(const WeightedClass& cls, std::vector<double> subject, std::vector<double> rival) {
    BalanceReport r;
    r.subject_values = std::move(subject);
    r.rival_values = std::move(rival);
    r.deltas.resize(cls.size());
    double max_loss = 0.0;
    for (std::size_t i = 0; i < cls.size(); ++i) {
        const double d = r.subject_values[i] - r.rival_values[i];
        r.deltas[i] = d;
        r.delta += cls.weight(i) * d;
        if (d > 0.0) {
            r.loss_set.push_back(i);
            r.delta_loss += cls.weight(i) * d;
            max_loss = std::max(max_loss, d);
        } else {
            r.gain_set.push_back(i);
        }
    }
    double gain_signed = 0.0;
    for (auto i : r.gain_set) gain_signed += cls.weight(i) * r.deltas[i];
    r.delta_gain = std::abs(gain_signed);
    r.nonnegative = r.delta >= -kDominanceThreshold && r.delta_gain <= r.delta_loss + kDominanceThreshold;
    r.gain_bound_holds = true;
    for (auto eta : r.gain_set) {
        const double gain = std::abs(r.deltas[eta]);
        if (gain > max_loss / cls.weight(eta) + kDominanceThreshold) r.gain_bound_holds = false;
        if (r.loss_set.size() == 1) {
            const auto lambda = r.loss_set.front();
            if (gain > cls.weight(lambda) / cls.weight(eta) * std::abs(r.deltas[lambda]) + kDominanceThreshold)
                r.gain_bound_holds = false;
        }
    }
    return r;
}

/// balanced_delta: per-environment value differences between subject (p^xi) and a rival.
inline BalanceReport balanced_delta(const WeightedClass& cls, const PolicyTable& subject, const PolicyTable& rival,
                                    std::size_t m) {
    return balance_from_values(cls, class_values(cls, subject, m), class_values(cls, rival, m));
}

struct GapRow {
    std::size_t horizon = 0;          // m (or cycle k)
    std::size_t env = 0;
    double optimal_average = 0.0;     // V*_nu / m
    double subject_average = 0.0;     // V_nu^subject / m
    double gap = 0.0;                 // difference of the two averages
    double std_error = 0.0;           // 0 for exact rows
    std::optional<double> bound;      // Delta / (w_nu m), when computed
    std::size_t replicates = 0;       // 0 for exact rows
};

using GapTable = std::vector<GapRow>;

/// gap_bound_check: 0 <= V*_nu - V_nu^{p^xi} <= Delta / w_nu, with Delta taken
/// from the enumerated rival minimizing sum_nu w_nu (V*_nu - V_nu^rival).
inline GapTable gap_bound_check(const WeightedClass& cls, std::size_t m, std::uint64_t cap = enumeration_cap()) {
    const auto& al = cls.alphabet();
    BayesAgent agent(cls, FiniteHorizon{m});
    const auto subject = extract_policy_table(agent, al, m, cap);
    const auto subject_values = class_values(cls, subject, m);
    std::vector<double> optimal(cls.size());
    for (std::size_t i = 0; i < cls.size(); ++i) optimal[i] = optimal_value(cls.env(i), 1, m).value;

    double best_delta = std::numeric_limits<double>::infinity();
    enumerate_policies(al.actions, al.percept_count(), m, cap).for_each([&](std::uint64_t, const PolicyTable& p) {
        const auto v = class_values(cls, p, m);
        double d = 0.0;
        for (std::size_t i = 0; i < cls.size(); ++i) d += cls.weight(i) * (optimal[i] - v[i]);
        best_delta = std::min(best_delta, d);
    });

    const double scale = m > 0 ? 1.0 / static_cast<double>(m) : 1.0;
    GapTable table;
    for (std::size_t i = 0; i < cls.size(); ++i) {
        GapRow row;
        row.horizon = m;
        row.env = i;
        row.optimal_average = optimal[i] * scale;
        row.subject_average = subject_values[i] * scale;
        row.gap = (optimal[i] - subject_values[i]) * scale;
        row.bound = best_delta / cls.weight(i) * scale;
        table.push_back(row);
    }
    return table;
}

/// A row is within bound when 0 <= gap <= bound (up to 1e-9).
inline bool gap_within_bound(const GapRow& r) {
    return r.gap >= -kDominanceThreshold && (!r.bound || r.gap <= *r.bound + kDominanceThreshold);
}

// ---------------------------------------------------------------------------
// Self-optimization experiments

struct ExperimentOptions {
    std::size_t replicates = 100;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::uint64_t exact_node_cap = 1'000'000;  // exact agent evaluation when the tree is this small
};

/// Builds a fresh agent for horizon m with the given seed.
using AgentBuilder = std::function<std::unique_ptr<Agent>(std::size_t m, std::uint64_t seed)>;

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `threads` workers; fn writes only to slot i.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += threads) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline double tree_size(std::size_t percepts, std::size_t m) {
    double total = 0.0, level = 1.0;
    for (std::size_t d = 0; d <= m; ++d, level *= static_cast<double>(percepts)) total += level;
    return total;
}

}  // namespace detail

/// convergence_experiment: per horizon m and class member nu, the average-value
/// gap (V*_nu - V_nu^agent) / m. Exact when the agent is deterministic and the
/// history tree is small, otherwise a Monte Carlo mean over replicates.
inline GapTable convergence_experiment(const std::vector<EnvironmentSpec>& specs, const WeightedClass& cls,
                                       const std::vector<std::size_t>& m_grid, const AgentBuilder& build,
                                       const ExperimentOptions& opt = {}) {
    for (std::size_t i = 0; i < specs.size(); ++i)
        if (!check_ergodic(specs[i]))
            throw ValidationError("environments[" + std::to_string(i) + "]: MDP is not ergodic");
    const auto& al = cls.alphabet();

    struct Item {
        std::size_t m_index, env;
    };
    std::vector<Item> items;
    for (std::size_t mi = 0; mi < m_grid.size(); ++mi)
        for (std::size_t e = 0; e < cls.size(); ++e) items.push_back({mi, e});

    GapTable table(items.size());
    // Parallel over (m, env); replicates inside an item run sequentially so the
    // reduction order is fixed.
    detail::parallel_for(items.size(), opt.threads, [&](std::size_t idx) {
        const auto [mi, e] = items[idx];
        const std::size_t m = m_grid[mi];
        const Environment& env = cls.env(e);
        GapRow row;
        row.horizon = m;
        row.env = e;
        const double optimal = optimal_value(env, 1, m).value;
        const std::uint64_t item_seed = substream(substream(opt.seed, m), e);
        auto probe = build(m, substream(item_seed, 0));
        double agent_value = 0.0;
        if (probe->deterministic() && detail::tree_size(al.percept_count(), m) <= static_cast<double>(opt.exact_node_cap)) {
            Agent& a = *probe;
            agent_value = expected_return(env, as_stochastic([&a](const History& h) { return a.act(h); }, al.actions), 1, m).value;
        } else {
            double sum = 0.0, sum_sq = 0.0;
            for (std::size_t r = 0; r < opt.replicates; ++r) {
                const std::uint64_t rep_seed = substream(item_seed, r + 1);
                auto agent = build(m, rep_seed);
                Rng rng(substream(rep_seed, 0xE5));
                const double v = run_episode(env, *agent, m, rng).reward_sum;
                sum += v;
                sum_sq += v * v;
            }
            const double n = static_cast<double>(opt.replicates);
            agent_value = sum / n;
            const double var = opt.replicates > 1 ? std::max(0.0, (sum_sq - n * agent_value * agent_value) / (n - 1.0)) : 0.0;
            row.std_error = std::sqrt(var / n) / static_cast<double>(m);
            row.replicates = opt.replicates;
        }
        row.optimal_average = optimal / static_cast<double>(m);
        row.subject_average = agent_value / static_cast<double>(m);
        row.gap = row.optimal_average - row.subject_average;
        table[idx] = row;
    });
    return table;
}

// ---------------------------------------------------------------------------

struct MartingaleRecord {
    std::size_t cycle = 0;
    Action action{};
    Percept percept{};
    double z_previous = 1.0;        // z_{k-1}
    double expected_next = 1.0;     // E[z_k | history, action]
    double z = 1.0;                 // realized z_k
    std::vector<double> posterior;  // w_{k+1}^nu after the percept
    bool holds = true;              // expected_next <= z_previous + 1e-12
};

inline constexpr double kMartingaleSlack = 1e-12;

/// martingale_trace: simulate n cycles against class member `truth`, recording
/// the evidence ratio and its exact conditional expectation at every cycle.
inline std::vector<MartingaleRecord> martingale_trace(const WeightedClass& cls, std::size_t truth, Agent& agent,
                                                      std::size_t n, Rng& rng) {
    if (truth >= cls.size()) throw DomainError("martingale_trace: true environment index out of range");
    const Environment& mu = cls.env(truth);
    std::vector<MartingaleRecord> trace;
    trace.reserve(n);
    auto state = initial_posterior(cls);
    for (std::size_t k = 1; k <= n; ++k) {
        MartingaleRecord rec;
        rec.cycle = k;
        rec.action = agent.act(state.history);
        rec.z_previous = evidence_ratio(cls, truth, state).value;
        rec.expected_next = conditional_z_expectation(cls, truth, state, rec.action);
        rec.holds = rec.expected_next <= rec.z_previous + kMartingaleSlack;
        rec.percept = sample_percept(mu, state.history, rec.action, rng);
        try {
            state = update_posterior(state, cls, rec.action, rec.percept);
            rec.z = evidence_ratio(cls, truth, state).value;
        } catch (const UndefinedConditional&) {
            throw UndefinedConditional("martingale_trace: zero-probability history at cycle " + std::to_string(k));
        }
        rec.posterior = posterior_weights(cls, state);
        trace.push_back(std::move(rec));
    }
    return trace;
}

/// Weighted average delta(m) = sum_nu w_nu delta_nu(m) of per-environment gap sequences.
inline std::vector<double> average_gap_sequence(const WeightedClass& cls, const std::vector<std::vector<double>>& gaps) {
    if (gaps.size() != cls.size()) throw DomainError("average_gap_sequence: one sequence per environment required");
    const std::size_t len = gaps.empty() ? 0 : gaps[0].size();
    std::vector<double> avg(len, 0.0);
    for (std::size_t t = 0; t < len; ++t)
        for (std::size_t i = 0; i < cls.size(); ++i) avg[t] += cls.weight(i) * gaps[i].at(t);
    return avg;
}

}  // namespace bayeslab
