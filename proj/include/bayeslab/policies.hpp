#pragma once

// Agents: Bayes-optimal on the mixture, informed, explore-then-exploit (finite
// horizon and discounted), uniform random and table-driven; plus the
// simulation loop.

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "bayeslab/core.hpp"
#include "bayeslab/discount.hpp"
#include "bayeslab/mixture.hpp"
#include "bayeslab/models.hpp"
#include "bayeslab/valuation.hpp"

namespace bayeslab {

struct FiniteHorizon {
    std::size_t horizon = 1;
};

struct DiscountedPlanning {
    DiscountSequence discount = DiscountSequence::quadratic();
    double eps = 0.01;
};

using PlanningMode = std::variant<FiniteHorizon, DiscountedPlanning>;

/// Chronological action chooser.
class Agent {
  public:
    virtual ~Agent() = default;
    virtual Action act(const History& h) = 0;
    /// True when act() is a fixed function of the history alone.
    virtual bool deterministic() const { return true; }
};

/// informed_act: the optimal action for a known environment.
inline Action informed_act(const Environment& env, const PlanningMode& mode, const History& h) {
    if (const auto* f = std::get_if<FiniteHorizon>(&mode)) return optimal_action(env, h.next_cycle(), f->horizon, h);
    const auto& d = std::get<DiscountedPlanning>(mode);
    return discounted_optimal_action(env, h.next_cycle(), d.discount, d.eps, h);
}

class InformedAgent final : public Agent {
  public:
    InformedAgent(EnvironmentPtr env, PlanningMode mode) : env_(std::move(env)), mode_(mode) {}
    Action act(const History& h) override { return informed_act(*env_, mode_, h); }

  private:
    EnvironmentPtr env_;
    PlanningMode mode_;
};

/// The Bayes-optimal agent p^xi: replans on the mixture conditioned on the
/// realized history every cycle.
class BayesAgent final : public Agent {
  public:
    BayesAgent(WeightedClass cls, PlanningMode mode)
        : mixture_(make_mixture(std::move(cls))), mode_(mode), state_(initial_posterior(mixture_->weighted_class())) {}

    const WeightedClass& weighted_class() const { return mixture_->weighted_class(); }
    const MixtureEnvironment& mixture() const { return *mixture_; }
    const PlanningMode& mode() const { return mode_; }

    /// Action for an arbitrary history.
    Action act(const History& h) override { return informed_act(*mixture_, mode_, h); }

    /// bayes_act: action for the agent's own realized history.
    Action act() { return act(state_.history); }

    void observe(Action y, const Percept& x) { state_ = update_posterior(state_, mixture_->weighted_class(), y, x); }

    const PosteriorState& state() const { return state_; }
    const History& history() const { return state_.history; }
    std::vector<double> posterior() const { return posterior_weights(mixture_->weighted_class(), state_); }

  private:
    std::shared_ptr<const MixtureEnvironment> mixture_;
    PlanningMode mode_;
    PosteriorState state_;
};

inline Action bayes_act(BayesAgent& agent) { return agent.act(); }

/// Uniformly random actions; the action at cycle k depends only on (seed, k).
class RandomAgent final : public Agent {
  public:
    RandomAgent(std::size_t actions, std::uint64_t seed) : actions_(actions), seed_(seed) {}
    Action act(const History& h) override { return Action{Rng(substream(seed_, h.size())).below(actions_)}; }
    bool deterministic() const override { return false; }

  private:
    std::size_t actions_;
    std::uint64_t seed_;
};

class TableAgent final : public Agent {
  public:
    TableAgent(PolicyTable table, Alphabet alphabet) : table_(std::move(table)), alphabet_(std::move(alphabet)) {}
    Action act(const History& h) override { return table_.at(percept_indices(alphabet_, h)); }

  private:
    PolicyTable table_;
    Alphabet alphabet_;
};

// ---------------------------------------------------------------------------
// Explore-then-exploit

/// Transition counts N[a][s][s'] and reward sums R[a][s][s'].
struct TransitionCounts {
    Tensor3 counts;
    Tensor3 reward_sums;

    TransitionCounts(std::size_t actions, std::size_t states)
        : counts(actions, std::vector<std::vector<double>>(states, std::vector<double>(states, 0.0))),
          reward_sums(counts) {}

    void add(Action a, std::size_t from, std::size_t to, double reward) {
        counts.at(a.index).at(from).at(to) += 1.0;
        reward_sums[a.index][from][to] += reward;
    }
};

/// estimate_transition: frequency estimate of T with empirical mean rewards;
/// unvisited (s,a) rows are uniform and unvisited rewards r_max/2.
inline MdpSpec estimate_transition(const TransitionCounts& n, double r_max, std::size_t initial_state = 0) {
    MdpSpec spec;
    spec.actions = n.counts.size();
    spec.states = spec.actions ? n.counts[0].size() : 0;
    spec.r_max = r_max;
    spec.initial_state = initial_state;
    spec.transitions = n.counts;
    spec.rewards = n.counts;
    for (std::size_t a = 0; a < spec.actions; ++a)
        for (std::size_t s = 0; s < spec.states; ++s) {
            const auto& row = n.counts[a][s];
            double total = 0.0;
            for (double c : row) {
                if (c < 0.0) throw DomainError("estimate_transition: negative count");
                total += c;
            }
            auto& t = spec.transitions[a][s];
            std::size_t last_positive = 0;
            for (std::size_t s2 = 0; s2 < spec.states; ++s2) {
                const double c = row[s2];
                t[s2] = total > 0.0 ? c / total : 1.0 / static_cast<double>(spec.states);
                if (t[s2] > 0.0) last_positive = s2;
                spec.rewards[a][s][s2] = c > 0.0 ? n.reward_sums[a][s][s2] / c : r_max / 2.0;
            }
            // exact unit row sum under left-to-right summation
            double head = 0.0;
            for (std::size_t s2 = 0; s2 < last_positive; ++s2) head += t[s2];
            t[last_positive] = 1.0 - head;
        }
    return spec;
}

namespace detail {

inline std::size_t state_before(const History& h, std::size_t i, std::size_t initial) {
    return i == 0 ? initial : h[i - 1].percept.observation;
}

inline TransitionCounts count_transitions(const History& h, std::size_t begin, std::size_t end, std::size_t actions,
                                          std::size_t states, std::size_t initial) {
    TransitionCounts n(actions, states);
    for (std::size_t i = begin; i < end; ++i) {
        const auto& step = h[i];
        const std::size_t from = state_before(h, i, initial);
        if (from >= states || step.percept.observation >= states || step.action.index >= actions)
            throw DomainError("explore-then-exploit: percept is not an MDP state of the expected size");
        n.add(step.action, from, step.percept.observation, step.percept.reward);
    }
    return n;
}

/// Prefix of steps used to build the current estimate, and the planner over it.
struct EstimateCache {
    std::vector<Step> prefix;
    std::shared_ptr<const MarkovEnvironment> model;
    std::optional<Expectimax> planner;
};

}  // namespace detail

/// k0 = ceil(m^{2/3}), computed exactly as the least k with k^3 >= m^2.
inline std::size_t exploration_cutoff(std::size_t m) {
    const double guess = std::ceil(std::cbrt(static_cast<double>(m) * static_cast<double>(m)));
    auto k = static_cast<unsigned long long>(guess);
    const unsigned long long m2 = static_cast<unsigned long long>(m) * m;
    while (k > 0 && (k - 1) * (k - 1) * (k - 1) >= m2) --k;
    while (k * k * k < m2) ++k;
    return static_cast<std::size_t>(std::max<unsigned long long>(k, 1));
}

/// Finite-horizon explore-then-exploit agent: uniformly random actions in
/// cycles 1..k0-1, then optimal actions for the MDP estimated from those cycles.
class EteAgent final : public Agent {
  public:
    EteAgent(std::size_t actions, std::size_t states, double r_max, std::size_t horizon, std::uint64_t seed,
             std::size_t initial_state = 0)
        : actions_(actions), states_(states), r_max_(r_max), horizon_(horizon), k0_(exploration_cutoff(horizon)),
          initial_(initial_state), explorer_(actions, seed) {}

    std::size_t horizon() const { return horizon_; }
    std::size_t cutoff() const { return k0_; }
    bool deterministic() const override { return false; }

    /// ete_act.
    Action act(const History& h) override {
        const std::size_t k = h.next_cycle();
        if (k > horizon_) throw DomainError("ete_act: cycle beyond horizon");
        if (k < k0_) return explorer_.act(h);
        const std::size_t explored = k0_ - 1;
        if (!cache_.model || !std::equal(cache_.prefix.begin(), cache_.prefix.end(), h.steps().begin(),
                                         h.steps().begin() + static_cast<std::ptrdiff_t>(explored))) {
            auto counts = detail::count_transitions(h, 0, explored, actions_, states_, initial_);
            cache_.prefix.assign(h.steps().begin(), h.steps().begin() + static_cast<std::ptrdiff_t>(explored));
            cache_.model = make_mdp(estimate_transition(counts, r_max_, initial_));
            cache_.planner.emplace(Expectimax::finite(*cache_.model, horizon_));
        }
        const std::size_t s = detail::state_before(h, h.size(), initial_);
        if (s >= states_) throw DomainError("ete_act: percept is not an MDP state of the expected size");
        return cache_.planner->solve(*cache_.model->belief(state_history(s)), k).action;
    }

    /// The MDP estimated from the exploration prefix of h.
    MdpSpec estimate(const History& h) const {
        const std::size_t explored = std::min(h.size(), k0_ - 1);
        return estimate_transition(detail::count_transitions(h, 0, explored, actions_, states_, initial_), r_max_, initial_);
    }

  private:
    /// A one-step history whose last percept is state s, used only to seed the
    /// belief of the estimated model.
    History state_history(std::size_t s) const {
        const auto& al = cache_.model->alphabet();
        return History({Step{Action{0}, Percept{s, al.rewards.front()}}});
    }

    std::size_t actions_, states_;
    double r_max_;
    std::size_t horizon_, k0_, initial_;
    RandomAgent explorer_;
    detail::EstimateCache cache_;
};

inline Action ete_act(EteAgent& agent, const History& h) { return agent.act(h); }

/// Exploration length Delta(k) = ceil(sqrt(k)).
inline std::size_t exploration_window(std::size_t k) {
    auto d = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(k))));
    while (d > 0 && (d - 1) * (d - 1) >= k) --d;
    while (d * d < k) ++d;
    return std::max<std::size_t>(d, 1);
}

/// Discounted explore-then-exploit: on (re)start at cycle k explores for
/// Delta(k) cycles, then follows the discounted-optimal policy of the MDP
/// estimated from that window.
class DiscountedEteAgent final : public Agent {
  public:
    DiscountedEteAgent(std::size_t actions, std::size_t states, double r_max, DiscountSequence discount, double eps,
                       std::uint64_t seed, std::size_t start_cycle = 1, std::size_t initial_state = 0)
        : actions_(actions), states_(states), r_max_(r_max), discount_(discount), eps_(eps), initial_(initial_state),
          explorer_(actions, seed) {
        restart(start_cycle);
    }

    /// Begin a new exploration window at cycle k.
    void restart(std::size_t k) {
        if (k == 0) throw DomainError("discounted ete: cycles start at 1");
        start_ = k;
        window_ = exploration_window(k);
        cache_ = {};
    }

    std::size_t start() const { return start_; }
    std::size_t window() const { return window_; }
    bool deterministic() const override { return false; }

    /// False for discounts with finite effective horizon, where exploration
    /// never becomes negligible.
    bool premise_holds() const { return discount_.has_unbounded_effective_horizon(); }
    std::optional<std::string> warning() const {
        if (premise_holds()) return std::nullopt;
        return "discount " + discount_.describe() + " has finite effective horizon; convergence premise fails";
    }

    /// discounted_ete_act.
    Action act(const History& h) override {
        const std::size_t k = h.next_cycle();
        if (k < start_) throw DomainError("discounted ete: history precedes the exploration start");
        if (k < start_ + window_) return explorer_.act(h);
        const std::size_t from = start_ - 1, to = start_ - 1 + window_;
        if (!cache_.model || !std::equal(cache_.prefix.begin(), cache_.prefix.end(),
                                         h.steps().begin() + static_cast<std::ptrdiff_t>(from),
                                         h.steps().begin() + static_cast<std::ptrdiff_t>(to))) {
            auto counts = detail::count_transitions(h, from, to, actions_, states_, initial_);
            cache_.prefix.assign(h.steps().begin() + static_cast<std::ptrdiff_t>(from),
                                 h.steps().begin() + static_cast<std::ptrdiff_t>(to));
            cache_.model = make_mdp(estimate_transition(counts, r_max_, initial_));
        }
        const std::size_t s = detail::state_before(h, h.size(), initial_);
        if (s >= states_) throw DomainError("discounted ete: percept is not an MDP state of the expected size");
        const auto& al = cache_.model->alphabet();
        const std::size_t mt = truncation_depth(discount_, k, eps_, r_max_);
        auto planner = Expectimax::discounted(*cache_.model, discount_, k, mt);
        const History seed_history({Step{Action{0}, Percept{s, al.rewards.front()}}});
        return planner.solve(*cache_.model->belief(seed_history), k).action;
    }

  private:
    std::size_t actions_, states_;
    double r_max_;
    DiscountSequence discount_;
    double eps_;
    std::size_t initial_;
    RandomAgent explorer_;
    std::size_t start_ = 1, window_ = 1;
    detail::EstimateCache cache_;
};

inline Action discounted_ete_act(DiscountedEteAgent& agent, const History& h) { return agent.act(h); }

// ---------------------------------------------------------------------------

struct Episode {
    History trajectory;
    double reward_sum = 0.0;
};

/// run_episode: n interaction cycles of agent against env from the empty history.
inline Episode run_episode(const Environment& env, Agent& agent, std::size_t n, Rng& rng) {
    Episode e;
    for (std::size_t k = 1; k <= n; ++k) {
        const Action y = agent.act(e.trajectory);
        const Percept x = sample_percept(env, e.trajectory, y, rng);
        e.trajectory = e.trajectory.extended(y, x);
        e.reward_sum += x.reward;
    }
    return e;
}

}  // namespace bayeslab
