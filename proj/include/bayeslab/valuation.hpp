#pragma once

// Exact values and expectimax planning: finite-horizon V_km, discounted and
// normalized V_kgamma, deterministic policy tables and their enumeration.

#include <cmath>
#include <cstdlib>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "bayeslab/core.hpp"
#include "bayeslab/discount.hpp"

namespace bayeslab {

struct IncompletePolicy : DomainError {
    using DomainError::DomainError;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;
inline constexpr std::uint64_t kDefaultNodeBudget = 100'000'000;

namespace detail {
inline std::uint64_t env_cap(const char* name, std::uint64_t fallback) {
    if (const char* v = std::getenv(name)) {
        char* end = nullptr;
        const unsigned long long n = std::strtoull(v, &end, 10);
        if (end != v && *end == '\0' && n > 0) return n;
    }
    return fallback;
}
}  // namespace detail

/// Enumeration cap; BAYESLAB_ENUMERATION_CAP overrides the default of 10^6.
inline std::uint64_t enumeration_cap() { return detail::env_cap("BAYESLAB_ENUMERATION_CAP", kDefaultEnumerationCap); }
/// Expectimax node budget; BAYESLAB_NODE_BUDGET overrides the default.
inline std::uint64_t node_budget() { return detail::env_cap("BAYESLAB_NODE_BUDGET", kDefaultNodeBudget); }

/// Two action values count as tied when they differ by at most this (relative) amount.
inline bool strictly_better(double candidate, double incumbent) {
    return candidate > incumbent + 1e-12 * std::max(1.0, std::abs(incumbent));
}

enum class Normalization { raw, per_tail };

inline const char* to_string(Normalization n) { return n == Normalization::raw ? "raw" : "per_tail"; }

struct ValueReport {
    double value = 0.0;
    Normalization normalization = Normalization::raw;
    std::size_t truncation_depth = 0;  // last cycle included in the sum
    double truncation_error = 0.0;     // bound on |reported - untruncated|
};

/// Deterministic chronological policy: action at cycle k as a function of the
/// percept history x_{<k}, stored per depth d = k-1 in base-|X| order.
class PolicyTable {
  public:
    PolicyTable(std::size_t percepts, std::size_t horizon, Action fill = {})
        : percepts_(percepts), horizon_(horizon) {
        if (percepts == 0) throw DomainError("policy table: empty percept alphabet");
        std::size_t width = 1;
        for (std::size_t d = 0; d < std::max<std::size_t>(horizon, 1); ++d) {
            levels_.emplace_back(width, fill);
            width *= percepts;
        }
    }

    std::size_t percepts() const { return percepts_; }
    std::size_t horizon() const { return horizon_; }
    std::size_t depth_count() const { return levels_.size(); }
    std::size_t entry_count() const {
        std::size_t n = 0;
        for (const auto& l : levels_) n += l.size();
        return n;
    }

    Action at(std::span<const std::size_t> percept_history) const {
        if (percept_history.size() >= levels_.size())
            throw IncompletePolicy("policy table undefined at depth " + std::to_string(percept_history.size()));
        return levels_[percept_history.size()][slot(percept_history)];
    }

    void set(std::span<const std::size_t> percept_history, Action y) {
        if (percept_history.size() >= levels_.size())
            throw IncompletePolicy("policy table undefined at depth " + std::to_string(percept_history.size()));
        levels_[percept_history.size()][slot(percept_history)] = y;
    }

    /// Flat entry access, depth-major.
    Action& entry(std::size_t i) {
        for (auto& l : levels_) {
            if (i < l.size()) return l[i];
            i -= l.size();
        }
        throw DomainError("policy table entry out of range");
    }

    const std::vector<std::vector<Action>>& levels() const { return levels_; }

    friend bool operator==(const PolicyTable&, const PolicyTable&) = default;

  private:
    std::size_t slot(std::span<const std::size_t> xs) const {
        std::size_t s = 0;
        for (auto x : xs) {
            if (x >= percepts_) throw DomainError("policy table: percept index out of range");
            s = s * percepts_ + x;
        }
        return s;
    }

    std::size_t percepts_;
    std::size_t horizon_;
    std::vector<std::vector<Action>> levels_;
};

/// Percept indices of a history under an alphabet.
inline std::vector<std::size_t> percept_indices(const Alphabet& al, const History& h) {
    std::vector<std::size_t> xs;
    xs.reserve(h.size());
    for (const auto& s : h.steps()) {
        auto x = al.index_of(s.percept);
        if (!x) throw DomainError("history percept outside the alphabet");
        xs.push_back(*x);
    }
    return xs;
}

/// All deterministic chronological policies for |Y| actions, |X| percepts and
/// horizon m, in odometer order (policy id = base-|Y| number of its entries).
class PolicyEnumerator {
  public:
    PolicyEnumerator(std::size_t actions, std::size_t percepts, std::size_t horizon,
                     std::uint64_t cap = enumeration_cap())
        : actions_(actions), percepts_(percepts), horizon_(horizon) {
        if (actions == 0 || percepts == 0) throw DomainError("enumerate_policies: empty alphabet");
        const std::size_t entries = PolicyTable(percepts, horizon).entry_count();
        const double log10_count = static_cast<double>(entries) * std::log10(static_cast<double>(actions));
        if (log10_count > std::log10(static_cast<double>(cap)) + 1e-12) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "enumerate_policies: about 10^%.2f policies exceed the cap of %llu",
                          log10_count, static_cast<unsigned long long>(cap));
            throw BudgetExceeded(buf);
        }
        count_ = 1;
        for (std::size_t i = 0; i < entries; ++i) count_ *= actions;
    }

    std::uint64_t count() const { return count_; }

    /// Calls fn(id, table) for every policy.
    template <typename Fn>
    void for_each(Fn&& fn) const {
        PolicyTable table(percepts_, horizon_);
        const std::size_t entries = table.entry_count();
        for (std::uint64_t id = 0; id < count_; ++id) {
            fn(id, static_cast<const PolicyTable&>(table));
            for (std::size_t i = 0; i < entries; ++i) {
                Action& a = table.entry(i);
                if (++a.index < actions_) break;
                a.index = 0;
            }
        }
    }

    PolicyTable policy(std::uint64_t id) const {
        PolicyTable table(percepts_, horizon_);
        for (std::size_t i = 0; i < table.entry_count(); ++i) {
            table.entry(i).index = static_cast<std::size_t>(id % actions_);
            id /= actions_;
        }
        return table;
    }

  private:
    std::size_t actions_, percepts_, horizon_;
    std::uint64_t count_ = 0;
};

inline PolicyEnumerator enumerate_policies(std::size_t actions, std::size_t percepts, std::size_t horizon,
                                           std::uint64_t cap = enumeration_cap()) {
    return PolicyEnumerator(actions, percepts, horizon, cap);
}

// ---------------------------------------------------------------------------
// Policy evaluation

namespace detail {

inline double table_value(const Environment& env, const PolicyTable& p, const Belief& b, std::vector<std::size_t>& xs,
                          std::size_t cycle, std::size_t last) {
    if (cycle > last) return 0.0;
    const Action y = p.at(xs);
    env.check_action(y);
    const auto& al = env.alphabet();
    double v = 0.0;
    for (std::size_t x = 0; x < al.percept_count(); ++x) {
        const double q = b.prob(y, x);
        if (q == 0.0) continue;
        xs.push_back(x);
        v += q * (al.percept(x).reward + table_value(env, p, *b.next(y, x), xs, cycle + 1, last));
        xs.pop_back();
    }
    return v;
}

}  // namespace detail

/// value_of_policy: exact V_km of a policy table from history h (|h| = k-1).
inline ValueReport value_of_policy(const Environment& env, const PolicyTable& p, std::size_t k, std::size_t m,
                                   const History& h = {}) {
    if (h.size() + 1 != k) throw DomainError("value_of_policy: history length must be k-1");
    if (k > m + 1) throw DomainError("value_of_policy: cycle beyond horizon");
    if (p.percepts() != env.alphabet().percept_count()) throw DomainError("value_of_policy: policy alphabet mismatch");
    if (p.depth_count() < m && k <= m) throw IncompletePolicy("value_of_policy: policy table shorter than horizon");
    auto xs = percept_indices(env.alphabet(), h);
    auto b = env.belief(h);
    return {detail::table_value(env, p, *b, xs, k, m), Normalization::raw, m, 0.0};
}

/// Probabilistic chronological policy: action distribution given the history.
using StochasticPolicy = std::function<std::vector<double>(const History&)>;
/// Deterministic chronological policy.
using DeterministicPolicy = std::function<Action(const History&)>;

inline StochasticPolicy as_stochastic(DeterministicPolicy p, std::size_t actions) {
    return [p = std::move(p), actions](const History& h) {
        std::vector<double> dist(actions, 0.0);
        dist.at(p(h).index) = 1.0;
        return dist;
    };
}

inline StochasticPolicy uniform_policy(std::size_t actions) {
    return [actions](const History&) { return std::vector<double>(actions, 1.0 / static_cast<double>(actions)); };
}

inline DeterministicPolicy table_policy(PolicyTable table, Alphabet alphabet) {
    return [t = std::move(table), al = std::move(alphabet)](const History& h) { return t.at(percept_indices(al, h)); };
}

namespace detail {

/// sum over cycles cycle..last of weight(i) * r_i under env and policy.
inline double weighted_return(const Environment& env, const StochasticPolicy& policy, const std::vector<double>& weight,
                              const Belief& b, const History& h, std::size_t cycle, std::size_t last) {
    if (cycle > last) return 0.0;
    const auto& al = env.alphabet();
    const auto dist = policy(h);
    if (dist.size() != al.actions) throw DomainError("policy action distribution has wrong size");
    const double g = weight[cycle];
    double v = 0.0;
    for (std::size_t a = 0; a < al.actions; ++a) {
        if (dist[a] == 0.0) continue;
        double qa = 0.0;
        for (std::size_t x = 0; x < al.percept_count(); ++x) {
            const double q = b.prob(Action{a}, x);
            if (q == 0.0) continue;
            const Percept px = al.percept(x);
            qa += q * (g * px.reward +
                       weighted_return(env, policy, weight, *b.next(Action{a}, x), h.extended(Action{a}, px), cycle + 1, last));
        }
        v += dist[a] * qa;
    }
    return v;
}

inline std::vector<double> unit_weights(std::size_t last) { return std::vector<double>(last + 2, 1.0); }

/// Scaled weights gamma_i / s_k for cycles k..last+1 (zero before k).
inline std::vector<double> discount_weights(const DiscountSequence& d, std::size_t k, std::size_t last) {
    std::vector<double> w(last + 2, 0.0);
    for (std::size_t i = k; i <= last + 1; ++i) w[i] = d.scaled_gamma(i, k);
    return w;
}

}  // namespace detail

/// Exact V_km of an arbitrary (possibly stochastic) policy.
inline ValueReport expected_return(const Environment& env, const StochasticPolicy& policy, std::size_t k, std::size_t m,
                                   const History& h = {}) {
    if (h.size() + 1 != k) throw DomainError("expected_return: history length must be k-1");
    env.check_history(h);
    auto b = env.belief(h);
    return {detail::weighted_return(env, policy, detail::unit_weights(m), *b, h, k, m), Normalization::raw, m, 0.0};
}

/// discounted_value_of_policy: V_kgamma = (1/Gamma_k) E[sum gamma_i r_i],
/// truncated after cycle m_t where r_max Gamma_{m_t+1} / Gamma_k <= eps.
inline ValueReport discounted_value_of_policy(const Environment& env, const StochasticPolicy& policy, std::size_t k,
                                              const DiscountSequence& d, double eps, const History& h = {}) {
    if (h.size() + 1 != k) throw DomainError("discounted_value_of_policy: history length must be k-1");
    env.check_history(h);
    const std::size_t mt = truncation_depth(d, k, eps, env.r_max());
    auto b = env.belief(h);
    const double raw = detail::weighted_return(env, policy, detail::discount_weights(d, k, mt), *b, h, k, mt);
    return {raw / d.scaled_tail(k, k), Normalization::per_tail, mt, env.r_max() * d.tail_ratio(mt + 1, k)};
}

// ---------------------------------------------------------------------------
// Expectimax

/// Expectimax over beliefs: value(b, i) = max_y sum_x p(x) (w_i r_x + value(b', i+1)),
/// zero after `last`. Memoizes on (belief key, cycle) when the belief provides a
/// key; results only depend on absolute cycles, so one instance can serve many roots.
class Expectimax {
  public:
    struct Result {
        double value = 0.0;
        Action action{};
    };

    Expectimax(const Environment& env, std::vector<double> weights, std::size_t last, std::uint64_t budget = node_budget())
        : env_(&env), weights_(std::move(weights)), last_(last), budget_(budget) {
        if (weights_.size() < last_ + 1) throw DomainError("expectimax: weight table shorter than horizon");
    }

    static Expectimax finite(const Environment& env, std::size_t m) { return Expectimax(env, detail::unit_weights(m), m); }

    /// Rewards weighted by gamma_i / s_k (see DiscountSequence::scaled_gamma);
    /// divide root values by d.scaled_tail(k, k) to normalize.
    static Expectimax discounted(const Environment& env, const DiscountSequence& d, std::size_t k, std::size_t last) {
        return Expectimax(env, detail::discount_weights(d, k, last), last);
    }

    Result solve(const Belief& b, std::size_t cycle) {
        if (cycle > last_) return {};
        auto key = b.key();
        if (key) {
            key->push_back(static_cast<std::int64_t>(cycle));
            if (auto it = memo_.find(*key); it != memo_.end()) return it->second;
        }
        if (++expanded_ > budget_) throw BudgetExceeded("expectimax: node budget of " + std::to_string(budget_) + " exceeded");
        const auto& al = env_->alphabet();
        const double g = weights_[cycle];
        Result best{-1.0, Action{0}};
        for (std::size_t a = 0; a < al.actions; ++a) {
            double q = 0.0;
            for (std::size_t x = 0; x < al.percept_count(); ++x) {
                const double p = b.prob(Action{a}, x);
                if (p == 0.0) continue;
                q += p * (g * al.rewards[x % al.rewards.size()] + solve(*b.next(Action{a}, x), cycle + 1).value);
            }
            if (a == 0 || strictly_better(q, best.value)) best = {q, Action{a}};
        }
        if (key) memo_.emplace(std::move(*key), best);
        return best;
    }

    Result solve(const History& h) { return solve(*env_->belief(h), h.next_cycle()); }

    std::uint64_t expanded() const { return expanded_; }
    std::size_t last_cycle() const { return last_; }

  private:
    struct KeyHash {
        std::size_t operator()(const BeliefKey& k) const {
            std::uint64_t h = 0x84222325cbf29ce4ULL;
            for (auto v : k) h = mix64(h ^ static_cast<std::uint64_t>(v));
            return static_cast<std::size_t>(h);
        }
    };

    const Environment* env_;
    std::vector<double> weights_;
    std::size_t last_;
    std::uint64_t budget_;
    std::uint64_t expanded_ = 0;
    std::unordered_map<BeliefKey, Result, KeyHash> memo_;
};

namespace detail {
inline void check_finite_root(const History& h, std::size_t k, std::size_t m, const char* op) {
    if (h.size() + 1 != k) throw DomainError(std::string(op) + ": history length must be k-1");
    if (k > m + 1) throw DomainError(std::string(op) + ": cycle beyond horizon");
}
}  // namespace detail

/// optimal_value: V*_km by expectimax from history h.
inline ValueReport optimal_value(const Environment& env, std::size_t k, std::size_t m, const History& h = {}) {
    detail::check_finite_root(h, k, m, "optimal_value");
    env.check_history(h);
    auto planner = Expectimax::finite(env, m);
    return {planner.solve(*env.belief(h), k).value, Normalization::raw, m, 0.0};
}

/// optimal_action: expectimax arg max at cycle k, lowest index on ties.
inline Action optimal_action(const Environment& env, std::size_t k, std::size_t m, const History& h = {}) {
    detail::check_finite_root(h, k, m, "optimal_action");
    if (k > m) throw DomainError("optimal_action: no decision left after the horizon");
    env.check_history(h);
    auto planner = Expectimax::finite(env, m);
    return planner.solve(*env.belief(h), k).action;
}

inline ValueReport discounted_optimal_value(const Environment& env, std::size_t k, const DiscountSequence& d, double eps,
                                            const History& h = {}) {
    if (h.size() + 1 != k) throw DomainError("discounted_optimal_value: history length must be k-1");
    env.check_history(h);
    const std::size_t mt = truncation_depth(d, k, eps, env.r_max());
    auto planner = Expectimax::discounted(env, d, k, mt);
    return {planner.solve(*env.belief(h), k).value / d.scaled_tail(k, k), Normalization::per_tail, mt,
            env.r_max() * d.tail_ratio(mt + 1, k)};
}

/// discounted_optimal_action: expectimax over the eps-truncated horizon.
inline Action discounted_optimal_action(const Environment& env, std::size_t k, const DiscountSequence& d, double eps,
                                        const History& h = {}) {
    if (h.size() + 1 != k) throw DomainError("discounted_optimal_action: history length must be k-1");
    env.check_history(h);
    const std::size_t mt = truncation_depth(d, k, eps, env.r_max());
    auto planner = Expectimax::discounted(env, d, k, mt);
    return planner.solve(*env.belief(h), k).action;
}

}  // namespace bayeslab
