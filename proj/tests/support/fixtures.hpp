#pragma once

// Random instances and independent reference computations shared by the unit
// and acceptance suites. Nothing here calls the planners or value functions
// under test.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "bayeslab/bayeslab.hpp"

namespace fixtures {

using namespace bayeslab;

/// General (non-Markov) chronological environment: the percept distribution
/// is a pseudo-random function of the whole history and the action, with some
/// structural zeros.
class RandomTableEnvironment final : public Environment {
  public:
    RandomTableEnvironment(Alphabet alphabet, std::uint64_t seed, double zero_rate = 0.2)
        : Environment(std::move(alphabet)), seed_(seed), zero_rate_(zero_rate) {}

    double conditional(const History& h, Action y, std::size_t x) const override {
        return distribution(h, y)[x];
    }

    std::vector<double> distribution(const History& h, Action y) const {
        const auto& al = alphabet();
        std::uint64_t key = mix64(seed_);
        for (const auto& s : h.steps()) {
            key = mix64(key ^ (s.action.index * 0x9e37u + 1));
            key = mix64(key ^ (*al.index_of(s.percept) * 0x7f4au + 7));
        }
        key = mix64(key ^ (y.index + 0x51u));
        Rng rng(key);
        const std::size_t n = al.percept_count();
        std::vector<double> p(n);
        double sum = 0.0;
        for (auto& v : p) {
            v = rng.uniform() < zero_rate_ ? 0.0 : 0.05 + rng.uniform();
            sum += v;
        }
        if (sum == 0.0) {
            p[rng.below(n)] = 1.0;
            return p;
        }
        for (auto& v : p) v /= sum;
        return p;
    }

  private:
    std::uint64_t seed_;
    double zero_rate_;
};

/// Alphabet with |Y| actions and |X| percepts: one observation, |X| reward levels in [0,1].
inline Alphabet small_alphabet(std::size_t actions, std::size_t percepts) {
    std::vector<double> levels;
    for (std::size_t i = 0; i < percepts; ++i)
        levels.push_back(percepts == 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(percepts - 1));
    return Alphabet{actions, 1, levels, 1.0};
}

inline std::vector<double> random_weights(std::size_t n, Rng& rng) {
    std::vector<double> w(n);
    double sum = 0.0;
    for (auto& v : w) {
        v = 0.1 + rng.uniform();
        sum += v;
    }
    for (auto& v : w) v /= sum;
    return w;
}

/// Random class of 1..max_envs general environments on a random small alphabet.
struct RandomClass {
    WeightedClass cls;
    std::size_t actions, percepts;
};

inline RandomClass random_class(std::uint64_t seed, std::size_t max_envs = 3, std::size_t max_actions = 3,
                                std::size_t max_percepts = 3) {
    Rng rng(seed);
    const std::size_t n = 1 + rng.below(max_envs);
    const std::size_t ya = 1 + rng.below(max_actions);
    const std::size_t xp = 1 + rng.below(max_percepts);
    const auto al = small_alphabet(ya, xp);
    std::vector<EnvironmentPtr> envs;
    for (std::size_t i = 0; i < n; ++i)
        envs.push_back(std::make_shared<RandomTableEnvironment>(al, rng.next_u64(), i % 2 ? 0.3 : 0.0));
    return {WeightedClass(std::move(envs), random_weights(n, rng)), ya, xp};
}

/// Random class with a fixed alphabet.
inline WeightedClass random_class_fixed(std::uint64_t seed, std::size_t envs, std::size_t actions, std::size_t percepts,
                                        double zero_rate = 0.2) {
    Rng rng(seed);
    const auto al = small_alphabet(actions, percepts);
    std::vector<EnvironmentPtr> list;
    for (std::size_t i = 0; i < envs; ++i)
        list.push_back(std::make_shared<RandomTableEnvironment>(al, rng.next_u64(), zero_rate));
    return WeightedClass(std::move(list), random_weights(envs, rng));
}

/// Random MDP spec with `states` states, `actions` actions and rewards in {0, 0.5, 1}.
inline MdpSpec random_mdp_spec(Rng& rng, std::size_t states, std::size_t actions, double zero_rate = 0.3) {
    MdpSpec spec;
    spec.states = states;
    spec.actions = actions;
    spec.transitions = Tensor3(actions, std::vector<std::vector<double>>(states, std::vector<double>(states, 0.0)));
    spec.rewards = spec.transitions;
    for (std::size_t a = 0; a < actions; ++a)
        for (std::size_t s = 0; s < states; ++s) {
            auto& row = spec.transitions[a][s];
            double sum = 0.0;
            for (auto& p : row) {
                p = rng.uniform() < zero_rate ? 0.0 : 0.05 + rng.uniform();
                sum += p;
            }
            if (sum == 0.0) {
                row[rng.below(states)] = 1.0;
            } else {
                for (auto& p : row) p /= sum;
            }
            for (auto& r : spec.rewards[a][s]) r = 0.5 * static_cast<double>(rng.below(3));
        }
    return spec;
}

// ---------------------------------------------------------------------------
// Reference computations

/// Probability of every percept index, straight from env.prob.
inline std::vector<double> percept_distribution(const Environment& env, const History& h, Action y) {
    const auto& al = env.alphabet();
    std::vector<double> p(al.percept_count());
    for (std::size_t x = 0; x < p.size(); ++x) p[x] = env.prob(h, y, al.percept(x));
    return p;
}

/// Expected r_k + ... + r_m of a deterministic table policy by plain recursion over histories.
inline double reference_value(const Environment& env, const PolicyTable& p, std::size_t m, const History& h = {},
                              std::vector<std::size_t> xs = {}) {
    if (h.size() >= m) return 0.0;
    const auto& al = env.alphabet();
    std::size_t slot = 0;
    for (auto x : xs) slot = slot * al.percept_count() + x;
    const Action y = p.levels()[xs.size()][slot];
    double total = 0.0;
    for (std::size_t x = 0; x < al.percept_count(); ++x) {
        const Percept px = al.percept(x);
        const double pr = env.prob(h, y, px);
        if (pr == 0.0) continue;
        auto next = xs;
        next.push_back(x);
        total += pr * (px.reward + reference_value(env, p, m, h.extended(y, px), next));
    }
    return total;
}

/// Max over every deterministic table policy of reference_value.
inline double reference_optimal(const Environment& env, std::size_t m) {
    const auto& al = env.alphabet();
    double best = 0.0;
    enumerate_policies(al.actions, al.percept_count(), m).for_each([&](std::uint64_t, const PolicyTable& p) {
        best = std::max(best, reference_value(env, p, m));
    });
    return best;
}

/// xi(h) = sum_nu w_nu nu(h), each nu(h) as a product of one-step probabilities.
inline double reference_mixture_probability(const WeightedClass& cls, const History& h) {
    std::vector<Action> ys;
    std::vector<Percept> xs;
    for (const auto& s : h.steps()) {
        ys.push_back(s.action);
        xs.push_back(s.percept);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < cls.size(); ++i) total += cls.weight(i) * sequence_probability(cls.env(i), {}, ys, xs);
    return total;
}

/// Numeric tail sum of gamma_i for i >= k: direct terms to `terms`, then the integral bound midpoint.
inline double reference_tail(const std::function<double(double)>& gamma, std::size_t k, std::size_t terms,
                             const std::function<double(double)>& integral_from) {
    double s = 0.0;
    const std::size_t end = k + terms;
    for (std::size_t i = end; i-- > k;) s += gamma(static_cast<double>(i));
    // sum_{i>=end} gamma_i lies between integral_from(end) and integral_from(end) + gamma(end)
    return s + integral_from(static_cast<double>(end)) + 0.5 * gamma(static_cast<double>(end));
}

/// Every history of length `depth` with positive probability under env, with
/// every action sequence.
inline void for_each_history(const Environment& env, std::size_t depth, const std::function<void(const History&)>& fn,
                             const History& h = {}) {
    fn(h);
    if (h.size() >= depth) return;
    const auto& al = env.alphabet();
    for (std::size_t a = 0; a < al.actions; ++a)
        for (std::size_t x = 0; x < al.percept_count(); ++x) {
            const Percept px = al.percept(x);
            if (env.prob(h, Action{a}, px) == 0.0) continue;
            for_each_history(env, depth, fn, h.extended(Action{a}, px));
        }
}

/// Deterministic bandit class {arm 0 pays, arm 1 pays}.
inline WeightedClass paying_arm_class(double w0 = 0.5) {
    auto a = make_bandit(BanditSpec{{1.0, 0.0}});
    auto b = make_bandit(BanditSpec{{0.0, 1.0}});
    return WeightedClass({a, b}, {w0, 1.0 - w0});
}

inline WeightedClass arm_pair_class(double good = 0.9, double bad = 0.1) {
    auto a = make_bandit(BanditSpec{{good, bad}});
    auto b = make_bandit(BanditSpec{{bad, good}});
    return WeightedClass::uniform({a, b});
}

}  // namespace fixtures
