#pragma once

// Concrete environment kinds: stationary MDPs, Bernoulli bandits and i.i.d.
// percept processes, all realized as finite-state Markov environments.

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "bayeslab/core.hpp"

namespace bayeslab {

using Tensor3 = std::vector<std::vector<std::vector<double>>>;

/// Stationary MDP. Transition T[a][s][s'] and reward r[a][s][s']; the percept
/// after a transition is (s', r[a][s][s']).
struct MdpSpec {
    std::size_t states = 1;
    std::size_t actions = 1;
    Tensor3 transitions;
    Tensor3 rewards;
    std::size_t initial_state = 0;
    double r_max = 1.0;

    void validate() const {
        if (states == 0 || actions == 0) throw ValidationError("mdp: empty state or action set");
        if (initial_state >= states) throw ValidationError("mdp: initial_state out of range");
        if (transitions.size() != actions) throw ValidationError("transitions: expected one matrix per action");
        if (rewards.size() != actions) throw ValidationError("rewards: expected one matrix per action");
        for (std::size_t a = 0; a < actions; ++a) {
            if (transitions[a].size() != states || rewards[a].size() != states)
                throw ValidationError("transitions[" + std::to_string(a) + "]: expected one row per state");
            for (std::size_t s = 0; s < states; ++s) {
                const std::string where = "[" + std::to_string(a) + "][" + std::to_string(s) + "]";
                const auto& row = transitions[a][s];
                if (row.size() != states || rewards[a][s].size() != states)
                    throw ValidationError("transitions" + where + ": expected " + std::to_string(states) + " entries");
                double sum = 0.0;
                for (double p : row) {
                    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("transitions" + where + ": entry outside [0,1]");
                    sum += p;
                }
                if (std::abs(sum - 1.0) > kNormalizationTolerance)
                    throw ValidationError("transitions" + where + ": row sums to " + std::to_string(sum));
                for (double r : rewards[a][s])
                    if (!(r >= 0.0 && r <= r_max)) throw ValidationError("rewards" + where + ": reward outside [0, r_max]");
            }
        }
    }

    /// Distinct rewards on transitions of positive probability.
    std::vector<double> reward_levels() const {
        std::vector<double> levels;
        for (std::size_t a = 0; a < actions; ++a)
            for (std::size_t s = 0; s < states; ++s)
                for (std::size_t t = 0; t < states; ++t)
                    if (transitions[a][s][t] > 0.0) levels.push_back(rewards[a][s][t]);
        return merge_reward_levels({}, levels);
    }
};

/// Bernoulli bandit: one state, arm i pays 1 with probability arms[i], else 0.
struct BanditSpec {
    std::vector<double> arms;
    double r_max = 1.0;

    void validate() const {
        if (arms.empty()) throw ValidationError("arms: at least one arm required");
        for (std::size_t i = 0; i < arms.size(); ++i)
            if (!(arms[i] >= 0.0 && arms[i] <= 1.0))
                throw ValidationError("arms[" + std::to_string(i) + "]: probability outside [0,1]");
        if (r_max < 1.0) throw ValidationError("bandit: r_max must be at least 1");
    }
};

struct IidOutcome {
    Percept percept;
    double probability = 0.0;
};

/// History- and action-independent percept distribution.
struct IidSpec {
    std::size_t actions = 1;
    std::size_t observations = 1;
    std::vector<IidOutcome> outcomes;
    double r_max = 1.0;

    void validate() const {
        if (actions == 0 || observations == 0) throw ValidationError("iid: empty action or observation set");
        double sum = 0.0;
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            const auto& o = outcomes[i];
            const std::string where = "outcomes[" + std::to_string(i) + "]";
            if (!(o.probability >= 0.0 && o.probability <= 1.0)) throw ValidationError(where + ": probability outside [0,1]");
            if (o.percept.observation >= observations) throw ValidationError(where + ": observation out of range");
            if (!(o.percept.reward >= 0.0 && o.percept.reward <= r_max)) throw ValidationError(where + ": reward outside [0, r_max]");
            sum += o.probability;
        }
        if (std::abs(sum - 1.0) > kNormalizationTolerance)
            throw ValidationError("outcomes: probabilities sum to " + std::to_string(sum));
    }

    std::vector<double> reward_levels() const {
        std::vector<double> levels;
        for (const auto& o : outcomes)
            if (o.probability > 0.0) levels.push_back(o.percept.reward);
        return merge_reward_levels({}, levels);
    }
};

/// Environment whose conditional depends only on a finite state that is a
/// function of the last percept (or the initial state before any percept).
class MarkovEnvironment final : public Environment {
  public:
    /// table[s][a][x]: probability of percept index x in state s under action a.
    /// successor[x]: state entered after percept x.
    MarkovEnvironment(Alphabet alphabet, std::size_t states, Tensor3 table, std::vector<std::size_t> successor,
                      std::size_t initial)
        : Environment(std::move(alphabet)),
          states_(states),
          table_(std::move(table)),
          successor_(std::move(successor)),
          initial_(initial) {
        const auto& al = this->alphabet();
        if (initial_ >= states_ || table_.size() != states_ || successor_.size() != al.percept_count())
            throw ValidationError("markov environment: inconsistent dimensions");
        for (std::size_t s = 0; s < states_; ++s) {
            if (table_[s].size() != al.actions) throw ValidationError("markov environment: inconsistent dimensions");
            for (const auto& row : table_[s]) {
                if (row.size() != al.percept_count()) throw ValidationError("markov environment: inconsistent dimensions");
                double sum = 0.0;
                for (double p : row) sum += p;
                if (std::abs(sum - 1.0) > kNormalizationTolerance)
                    throw ValidationError("markov environment: percept distribution does not sum to 1");
            }
        }
        for (auto s : successor_)
            if (s >= states_) throw ValidationError("markov environment: successor state out of range");
    }

    std::size_t states() const { return states_; }
    std::size_t initial_state() const { return initial_; }
    std::size_t successor(std::size_t x) const { return successor_[x]; }
    std::span<const std::size_t> successors() const { return successor_; }
    double table(std::size_t s, Action a, std::size_t x) const { return table_[s][a.index][x]; }

    std::size_t state_after(const History& h) const {
        return h.empty() ? initial_ : successor_[percept_index(h.back().percept)];
    }

    double conditional(const History& h, Action y, std::size_t x) const override {
        return table_[state_after(h)][y.index][x];
    }

    std::unique_ptr<Belief> belief(const History& h) const override {
        return std::make_unique<StateBelief>(*this, state_after(h));
    }

  private:
    class StateBelief final : public Belief {
      public:
        StateBelief(const MarkovEnvironment& env, std::size_t s) : env_(&env), s_(s) {}
        double prob(Action y, std::size_t x) const override { return env_->table_[s_][y.index][x]; }
        std::unique_ptr<Belief> next(Action, std::size_t x) const override {
            return std::make_unique<StateBelief>(*env_, env_->successor_[x]);
        }
        std::optional<BeliefKey> key() const override { return BeliefKey{static_cast<std::int64_t>(s_)}; }

      private:
        const MarkovEnvironment* env_;
        std::size_t s_;
    };

    std::size_t states_;
    Tensor3 table_;
    std::vector<std::size_t> successor_;
    std::size_t initial_;
};

inline Alphabet mdp_alphabet(const MdpSpec& spec) {
    return Alphabet{spec.actions, spec.states, spec.reward_levels(), spec.r_max};
}

/// mdp_as_env with an explicit (possibly larger) shared alphabet.
inline std::shared_ptr<const MarkovEnvironment> make_mdp(const MdpSpec& spec, const Alphabet& alphabet) {
    spec.validate();
    if (alphabet.actions != spec.actions || alphabet.observations != spec.states)
        throw ValidationError("mdp: alphabet does not match state/action counts");
    const std::size_t levels = alphabet.rewards.size();
    Tensor3 table(spec.states, std::vector<std::vector<double>>(spec.actions, std::vector<double>(alphabet.percept_count(), 0.0)));
    for (std::size_t a = 0; a < spec.actions; ++a)
        for (std::size_t s = 0; s < spec.states; ++s)
            for (std::size_t t = 0; t < spec.states; ++t) {
                const double p = spec.transitions[a][s][t];
                if (p == 0.0) continue;
                auto x = alphabet.index_of({t, spec.rewards[a][s][t]});
                if (!x) throw ValidationError("mdp: reward level missing from alphabet");
                table[s][a][*x] += p;
            }
    std::vector<std::size_t> successor(alphabet.percept_count());
    for (std::size_t x = 0; x < successor.size(); ++x) successor[x] = x / levels;
    return std::make_shared<MarkovEnvironment>(alphabet, spec.states, std::move(table), std::move(successor),
                                               spec.initial_state);
}

inline std::shared_ptr<const MarkovEnvironment> make_mdp(const MdpSpec& spec) {
    spec.validate();
    return make_mdp(spec, mdp_alphabet(spec));
}

inline Alphabet bandit_alphabet(const BanditSpec& spec) { return Alphabet{spec.arms.size(), 1, {0.0, 1.0}, spec.r_max}; }

/// bandit_as_env: single state; percept (0, 1) with probability p_i, (0, 0) otherwise.
inline std::shared_ptr<const MarkovEnvironment> make_bandit(const BanditSpec& spec, const Alphabet& alphabet) {
    spec.validate();
    if (alphabet.actions != spec.arms.size() || alphabet.observations != 1)
        throw ValidationError("bandit: alphabet does not match arm count");
    auto lose = alphabet.index_of({0, 0.0});
    auto win = alphabet.index_of({0, 1.0});
    if (!lose || !win) throw ValidationError("bandit: alphabet lacks reward levels 0 and 1");
    Tensor3 table(1, std::vector<std::vector<double>>(spec.arms.size(), std::vector<double>(alphabet.percept_count(), 0.0)));
    for (std::size_t a = 0; a < spec.arms.size(); ++a) {
        table[0][a][*win] = spec.arms[a];
        table[0][a][*lose] = 1.0 - spec.arms[a];
    }
    return std::make_shared<MarkovEnvironment>(alphabet, 1, std::move(table),
                                               std::vector<std::size_t>(alphabet.percept_count(), 0), 0);
}

inline std::shared_ptr<const MarkovEnvironment> make_bandit(const BanditSpec& spec) {
    spec.validate();
    return make_bandit(spec, bandit_alphabet(spec));
}

inline Alphabet iid_alphabet(const IidSpec& spec) {
    auto levels = spec.reward_levels();
    if (levels.empty()) levels = {0.0};
    return Alphabet{spec.actions, spec.observations, levels, spec.r_max};
}

inline std::shared_ptr<const MarkovEnvironment> make_iid(const IidSpec& spec, const Alphabet& alphabet) {
    spec.validate();
    if (alphabet.actions != spec.actions || alphabet.observations != spec.observations)
        throw ValidationError("iid: alphabet does not match action/observation counts");
    std::vector<double> dist(alphabet.percept_count(), 0.0);
    for (const auto& o : spec.outcomes) {
        if (o.probability == 0.0) continue;
        auto x = alphabet.index_of(o.percept);
        if (!x) throw ValidationError("iid: reward level missing from alphabet");
        dist[*x] += o.probability;
    }
    Tensor3 table(1, std::vector<std::vector<double>>(spec.actions, dist));
    return std::make_shared<MarkovEnvironment>(alphabet, 1, std::move(table),
                                               std::vector<std::size_t>(alphabet.percept_count(), 0), 0);
}

inline std::shared_ptr<const MarkovEnvironment> make_iid(const IidSpec& spec) {
    spec.validate();
    return make_iid(spec, iid_alphabet(spec));
}

/// True iff the union graph (s -> s' whenever some action has T[a][s][s'] > 0)
/// is strongly connected.
inline bool check_ergodic(const MdpSpec& spec) {
    const std::size_t n = spec.states;
    auto reaches_all = [&](bool reverse) {
        std::vector<char> seen(n, 0);
        std::vector<std::size_t> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const std::size_t s = stack.back();
            stack.pop_back();
            for (std::size_t t = 0; t < n; ++t) {
                if (seen[t]) continue;
                bool edge = false;
                for (std::size_t a = 0; a < spec.actions && !edge; ++a)
                    edge = reverse ? spec.transitions[a][t][s] > 0.0 : spec.transitions[a][s][t] > 0.0;
                if (edge) {
                    seen[t] = 1;
                    stack.push_back(t);
                }
            }
        }
        return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
    };
    return reaches_all(false) && reaches_all(true);
}

using EnvironmentSpec = std::variant<MdpSpec, BanditSpec, IidSpec>;

inline void validate(const EnvironmentSpec& spec) {
    std::visit([](const auto& s) { s.validate(); }, spec);
}

/// Bandits and i.i.d. processes are single-state, hence trivially ergodic.
inline bool check_ergodic(const EnvironmentSpec& spec) {
    if (const auto* mdp = std::get_if<MdpSpec>(&spec)) return check_ergodic(*mdp);
    return true;
}

/// Alphabet of a single specification, before merging reward levels across a class.
inline Alphabet spec_alphabet(const EnvironmentSpec& spec) {
    struct {
        Alphabet operator()(const MdpSpec& s) const { return mdp_alphabet(s); }
        Alphabet operator()(const BanditSpec& s) const { return bandit_alphabet(s); }
        Alphabet operator()(const IidSpec& s) const { return iid_alphabet(s); }
    } visitor;
    validate(spec);
    return std::visit(visitor, spec);
}

inline std::shared_ptr<const MarkovEnvironment> make_environment(const EnvironmentSpec& spec, const Alphabet& alphabet) {
    struct {
        const Alphabet& al;
        std::shared_ptr<const MarkovEnvironment> operator()(const MdpSpec& s) const { return make_mdp(s, al); }
        std::shared_ptr<const MarkovEnvironment> operator()(const BanditSpec& s) const { return make_bandit(s, al); }
        std::shared_ptr<const MarkovEnvironment> operator()(const IidSpec& s) const { return make_iid(s, al); }
    } visitor{alphabet};
    return std::visit(visitor, spec);
}

}  // namespace bayeslab
