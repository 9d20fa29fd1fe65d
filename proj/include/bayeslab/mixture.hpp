#pragma once

// Bayes mixture xi = sum_nu w_nu nu over a finite class, posterior weights
// accumulated in log space, and the evidence ratio z = xi(h) / mu(h).

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "bayeslab/core.hpp"
#include "bayeslab/models.hpp"

namespace bayeslab {

inline constexpr double kWeightSumTolerance = 1e-12;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Finite environment class M with prior weights w_nu > 0 summing to one.
class WeightedClass {
  public:
    WeightedClass(std::vector<EnvironmentPtr> environments, std::vector<double> weights)
        : envs_(std::move(environments)), weights_(std::move(weights)) {
        if (envs_.empty()) throw ValidationError("class: at least one environment required");
        if (envs_.size() != weights_.size()) throw ValidationError("class: one weight per environment required");
        double sum = 0.0;
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            if (!envs_[i]) throw ValidationError("class: null environment");
            if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i]))
                throw ValidationError("weights[" + std::to_string(i) + "]: must be positive");
            if (!(envs_[i]->alphabet() == envs_[0]->alphabet()))
                throw ValidationError("environments[" + std::to_string(i) + "]: alphabet differs from environments[0]");
            sum += weights_[i];
        }
        if (std::abs(sum - 1.0) > kWeightSumTolerance)
            throw ValidationError("weights: sum to " + std::to_string(sum) + ", expected 1");
        log_weights_.reserve(weights_.size());
        for (double w : weights_) log_weights_.push_back(std::log(w));
    }

    /// Uniform prior over the given environments.
    static WeightedClass uniform(std::vector<EnvironmentPtr> environments) {
        const std::size_t n = environments.size();
        return WeightedClass(std::move(environments), std::vector<double>(n, 1.0 / static_cast<double>(n)));
    }

    std::size_t size() const { return envs_.size(); }
    const Environment& env(std::size_t i) const { return *envs_.at(i); }
    const EnvironmentPtr& env_ptr(std::size_t i) const { return envs_.at(i); }
    const std::vector<EnvironmentPtr>& environments() const { return envs_; }
    double weight(std::size_t i) const { return weights_.at(i); }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& log_weights() const { return log_weights_; }
    const Alphabet& alphabet() const { return envs_[0]->alphabet(); }

  private:
    std::vector<EnvironmentPtr> envs_;
    std::vector<double> weights_;
    std::vector<double> log_weights_;
};

/// log sum_i exp(v_i), -inf for an all -inf input. Fixed summation order.
inline double log_sum_exp(std::span<const double> v) {
    double hi = kNegInf;
    for (double x : v) hi = std::max(hi, x);
    if (hi == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - hi);
    return hi + std::log(s);
}

/// Normalized posterior from per-environment log evidence, max-shifted.
inline std::vector<double> posterior_from_log_evidence(const WeightedClass& cls, std::span<const double> log_evidence) {
    std::vector<double> joint(cls.size());
    for (std::size_t i = 0; i < cls.size(); ++i) joint[i] = cls.log_weights()[i] + log_evidence[i];
    double hi = kNegInf;
    for (double x : joint) hi = std::max(hi, x);
    if (hi == kNegInf) throw UndefinedConditional("history has probability zero under every environment of the class");
    double sum = 0.0;
    for (double& x : joint) {
        x = (x == kNegInf) ? 0.0 : std::exp(x - hi);
        sum += x;
    }
    for (double& x : joint) x /= sum;
    return joint;
}

/// Running posterior: log nu(y x_{<k}) for each class member along a realized history.
struct PosteriorState {
    std::vector<double> log_evidence;
    History history;

    std::size_t cycle() const { return history.next_cycle(); }
};

inline PosteriorState initial_posterior(const WeightedClass& cls) {
    return PosteriorState{std::vector<double>(cls.size(), 0.0), History{}};
}

/// update_posterior: fold one more (action, percept) into the evidence.
inline PosteriorState update_posterior(const PosteriorState& state, const WeightedClass& cls, Action y, const Percept& x) {
    PosteriorState next{state.log_evidence, state.history.extended(y, x)};
    bool alive = false;
    for (std::size_t i = 0; i < cls.size(); ++i) {
        if (next.log_evidence[i] != kNegInf) {
            const double p = cls.env(i).prob(state.history, y, x);
            next.log_evidence[i] = p > 0.0 ? next.log_evidence[i] + std::log(p) : kNegInf;
        }
        alive = alive || next.log_evidence[i] != kNegInf;
    }
    if (!alive) throw UndefinedConditional("percept has probability zero under every environment of the class");
    return next;
}

inline std::vector<double> posterior_weights(const WeightedClass& cls, const PosteriorState& state) {
    return posterior_from_log_evidence(cls, state.log_evidence);
}

inline PosteriorState posterior_state(const WeightedClass& cls, const History& h) {
    PosteriorState s{std::vector<double>(cls.size()), h};
    for (std::size_t i = 0; i < cls.size(); ++i) s.log_evidence[i] = log_history_probability(cls.env(i), h);
    return s;
}

/// w_k^nu = w_nu nu(h) / xi(h).
inline std::vector<double> posterior_weights(const WeightedClass& cls, const History& h) {
    return posterior_weights(cls, posterior_state(cls, h));
}

/// log xi(h) from accumulated evidence.
inline double log_mixture_evidence(const WeightedClass& cls, std::span<const double> log_evidence) {
    std::vector<double> joint(cls.size());
    for (std::size_t i = 0; i < cls.size(); ++i) joint[i] = cls.log_weights()[i] + log_evidence[i];
    return log_sum_exp(joint);
}

struct EvidenceRatio {
    double value = 1.0;
    std::size_t cycle = 1;  // z_{cycle-1}
};

inline EvidenceRatio evidence_ratio(const WeightedClass& cls, std::size_t truth, const PosteriorState& state) {
    if (truth >= cls.size()) throw DomainError("true environment index out of range");
    const double log_mu = state.log_evidence[truth];
    if (log_mu == kNegInf) throw UndefinedConditional("history has probability zero under the true environment");
    return {std::exp(log_mixture_evidence(cls, state.log_evidence) - log_mu), state.cycle()};
}

/// z_{k-1} = xi(h) / mu(h) = w_mu / w_k^mu.
inline EvidenceRatio evidence_ratio(const WeightedClass& cls, std::size_t truth, const History& h) {
    return evidence_ratio(cls, truth, posterior_state(cls, h));
}

/// E_mu[z_k | h, y]: exact sum over percepts with positive mu-probability.
inline double conditional_z_expectation(const WeightedClass& cls, std::size_t truth, const PosteriorState& state, Action y) {
    if (truth >= cls.size()) throw DomainError("true environment index out of range");
    if (state.log_evidence[truth] == kNegInf)
        throw UndefinedConditional("history has probability zero under the true environment");
    const Environment& mu = cls.env(truth);
    mu.check_action(y);
    const std::size_t n = mu.alphabet().percept_count();
    std::vector<double> next(cls.size());
    double expectation = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
        const double pmu = mu.conditional(state.history, y, x);
        if (pmu <= 0.0) continue;
        for (std::size_t i = 0; i < cls.size(); ++i) {
            const double p = (i == truth) ? pmu : cls.env(i).conditional(state.history, y, x);
            next[i] = (p > 0.0 && state.log_evidence[i] != kNegInf) ? state.log_evidence[i] + std::log(p) : kNegInf;
        }
        expectation += pmu * std::exp(log_mixture_evidence(cls, next) - next[truth]);
    }
    return expectation;
}

inline double conditional_z_expectation(const WeightedClass& cls, std::size_t truth, const History& h, Action y) {
    return conditional_z_expectation(cls, truth, posterior_state(cls, h), y);
}

// ---------------------------------------------------------------------------

namespace detail {

/// Per-member lookup tables for mixtures whose members are all Markov.
/// The posterior is a function of, per member, how often each distinct
/// positive probability value has been realized, which gives a canonical
/// (path-independent) memo key and evidence sum.
struct MarkovMixtureTables {
    struct Member {
        const MarkovEnvironment* env = nullptr;
        std::vector<double> log_values;   // sorted distinct positive table entries
        std::vector<std::int32_t> slot;   // [s][a][x] -> value index, -1 for zero
        std::size_t offset = 0;           // into the concatenated count vector
    };
    std::vector<Member> members;
    std::size_t total_slots = 0;
    std::size_t actions = 0;
    std::size_t percepts = 0;

    std::int32_t slot(std::size_t m, std::size_t s, std::size_t a, std::size_t x) const {
        return members[m].slot[(s * actions + a) * percepts + x];
    }
};

/// Values within this relative distance share a count slot, so that 0.1 and
/// 1 - 0.9 (which differ in the last bit) do not split the belief key.
inline constexpr double kProbabilityMergeTolerance = 1e-12;

inline std::vector<double> merge_probability_values(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::vector<double> out;
    for (double p : v)
        if (out.empty() || p - out.back() > kProbabilityMergeTolerance * p) out.push_back(p);
    return out;
}

inline std::int32_t value_slot(const std::vector<double>& values, double p) {
    for (std::size_t j = 0; j < values.size(); ++j)
        if (std::abs(values[j] - p) <= kProbabilityMergeTolerance * p) return static_cast<std::int32_t>(j);
    throw DomainError("mixture tables: probability without a value slot");
}

inline std::shared_ptr<const MarkovMixtureTables> build_markov_tables(const WeightedClass& cls) {
    auto t = std::make_shared<MarkovMixtureTables>();
    t->actions = cls.alphabet().actions;
    t->percepts = cls.alphabet().percept_count();
    for (std::size_t i = 0; i < cls.size(); ++i) {
        const auto* env = dynamic_cast<const MarkovEnvironment*>(&cls.env(i));
        if (!env) return nullptr;
        MarkovMixtureTables::Member m;
        m.env = env;
        std::vector<double> values;
        for (std::size_t s = 0; s < env->states(); ++s)
            for (std::size_t a = 0; a < t->actions; ++a)
                for (std::size_t x = 0; x < t->percepts; ++x)
                    if (double p = env->table(s, Action{a}, x); p > 0.0) values.push_back(p);
        values = merge_probability_values(std::move(values));
        m.slot.assign(env->states() * t->actions * t->percepts, -1);
        for (std::size_t s = 0; s < env->states(); ++s)
            for (std::size_t a = 0; a < t->actions; ++a)
                for (std::size_t x = 0; x < t->percepts; ++x) {
                    const double p = env->table(s, Action{a}, x);
                    if (p > 0.0) m.slot[(s * t->actions + a) * t->percepts + x] = value_slot(values, p);
                }
        for (double v : values) m.log_values.push_back(std::log(v));
        m.offset = t->total_slots;
        t->total_slots += values.size();
        t->members.push_back(std::move(m));
    }
    return t;
}

class MarkovMixtureBelief final : public Belief {
  public:
    MarkovMixtureBelief(const WeightedClass& cls, std::shared_ptr<const MarkovMixtureTables> tables, const History& h)
        : cls_(&cls), tables_(std::move(tables)) {
        const auto& t = *tables_;
        states_.resize(t.members.size());
        dead_.assign(t.members.size(), 0);
        counts_.assign(t.total_slots, 0);
        for (std::size_t m = 0; m < t.members.size(); ++m) states_[m] = t.members[m].env->initial_state();
        const auto& al = cls.alphabet();
        for (const auto& step : h.steps()) {
            auto x = al.index_of(step.percept);
            if (!x) throw DomainError("history percept outside the class alphabet");
            advance(step.action, *x);
        }
        refresh();
    }

    double prob(Action y, std::size_t x) const override {
        double p = 0.0;
        for (std::size_t m = 0; m < states_.size(); ++m)
            if (weights_[m] > 0.0) p += weights_[m] * tables_->members[m].env->table(states_[m], y, x);
        return p;
    }

    std::unique_ptr<Belief> next(Action y, std::size_t x) const override {
        auto b = std::make_unique<MarkovMixtureBelief>(*this);
        b->advance(y, x);
        b->refresh();
        return b;
    }

    std::optional<BeliefKey> key() const override {
        BeliefKey k;
        k.reserve(states_.size() * 2 + counts_.size());
        for (std::size_t m = 0; m < states_.size(); ++m) {
            k.push_back(static_cast<std::int64_t>(states_[m]));
            k.push_back(dead_[m]);
        }
        k.insert(k.end(), counts_.begin(), counts_.end());
        return k;
    }

    const std::vector<double>& weights() const { return weights_; }

  private:
    void advance(Action y, std::size_t x) {
        const auto& t = *tables_;
        for (std::size_t m = 0; m < t.members.size(); ++m) {
            if (!dead_[m]) {
                const auto slot = t.slot(m, states_[m], y.index, x);
                if (slot < 0)
                    dead_[m] = 1;
                else
                    ++counts_[t.members[m].offset + static_cast<std::size_t>(slot)];
            }
            states_[m] = t.members[m].env->successor(x);
        }
    }

    void refresh() {
        const auto& t = *tables_;
        std::vector<double> log_evidence(t.members.size());
        for (std::size_t m = 0; m < t.members.size(); ++m) {
            if (dead_[m]) {
                log_evidence[m] = kNegInf;
                continue;
            }
            double acc = 0.0;
            const auto& mem = t.members[m];
            for (std::size_t j = 0; j < mem.log_values.size(); ++j)
                if (auto c = counts_[mem.offset + j]) acc += static_cast<double>(c) * mem.log_values[j];
            log_evidence[m] = acc;
        }
        weights_ = posterior_from_log_evidence(*cls_, log_evidence);
    }

    const WeightedClass* cls_;
    std::shared_ptr<const MarkovMixtureTables> tables_;
    std::vector<std::size_t> states_;
    std::vector<std::int64_t> dead_;
    std::vector<std::int64_t> counts_;
    std::vector<double> weights_;
};

class GenericMixtureBelief final : public Belief {
  public:
    GenericMixtureBelief(const WeightedClass& cls, PosteriorState state)
        : cls_(&cls), state_(std::move(state)), weights_(posterior_weights(cls, state_)) {}

    double prob(Action y, std::size_t x) const override {
        double p = 0.0;
        for (std::size_t i = 0; i < cls_->size(); ++i)
            if (weights_[i] > 0.0) p += weights_[i] * cls_->env(i).conditional(state_.history, y, x);
        return p;
    }

    std::unique_ptr<Belief> next(Action y, std::size_t x) const override {
        return std::make_unique<GenericMixtureBelief>(
            *cls_, update_posterior(state_, *cls_, y, cls_->alphabet().percept(x)));
    }

  private:
    const WeightedClass* cls_;
    PosteriorState state_;
    std::vector<double> weights_;
};

}  // namespace detail

/// mixture_env: the Bayes mixture as a chronological environment whose
/// conditional is sum_nu w_k^nu nu(h y x).
class MixtureEnvironment final : public Environment {
  public:
    explicit MixtureEnvironment(WeightedClass cls)
        : Environment(cls.alphabet()), cls_(std::move(cls)), tables_(detail::build_markov_tables(cls_)) {}

    const WeightedClass& weighted_class() const { return cls_; }

    double conditional(const History& h, Action y, std::size_t x) const override {
        const auto w = posterior_weights(cls_, h);
        double p = 0.0;
        for (std::size_t i = 0; i < cls_.size(); ++i)
            if (w[i] > 0.0) p += w[i] * cls_.env(i).conditional(h, y, x);
        return p;
    }

    std::unique_ptr<Belief> belief(const History& h) const override {
        check_history(h);
        if (tables_) return std::make_unique<detail::MarkovMixtureBelief>(cls_, tables_, h);
        return std::make_unique<detail::GenericMixtureBelief>(cls_, posterior_state(cls_, h));
    }

  private:
    WeightedClass cls_;
    std::shared_ptr<const detail::MarkovMixtureTables> tables_;
};

inline std::shared_ptr<const MixtureEnvironment> make_mixture(WeightedClass cls) {
    return std::make_shared<MixtureEnvironment>(std::move(cls));
}

/// Environment specifications with prior weights, sharing one alphabet.
struct ClassSpec {
    double r_max = 1.0;
    std::vector<EnvironmentSpec> environments;
    std::vector<double> weights;

    /// Shared alphabet: common action and observation counts, union of reward levels.
    Alphabet alphabet() const {
        if (environments.empty()) throw ValidationError("environments: at least one environment required");
        Alphabet al = spec_alphabet(environments[0]);
        al.r_max = r_max;
        for (std::size_t i = 1; i < environments.size(); ++i) {
            const Alphabet other = spec_alphabet(environments[i]);
            if (other.actions != al.actions)
                throw ValidationError("environments[" + std::to_string(i) + "]: action count differs from environments[0]");
            if (other.observations != al.observations)
                throw ValidationError("environments[" + std::to_string(i) + "]: observation count differs from environments[0]");
            al.rewards = merge_reward_levels(al.rewards, other.rewards);
        }
        return al;
    }

    WeightedClass build() const {
        const Alphabet al = alphabet();
        std::vector<EnvironmentPtr> envs;
        for (const auto& spec : environments) envs.push_back(make_environment(spec, al));
        return WeightedClass(std::move(envs), weights);
    }
};

}  // namespace bayeslab
