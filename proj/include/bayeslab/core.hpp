#pragma once

// Histories, percepts, alphabets and the chronological-environment interface.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bayeslab {

/// Input outside an environment's alphabets, or an operation outside its domain.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Malformed specification (probability rows, weights, file contents).
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Conditioning on a history that has probability zero.
struct UndefinedConditional : std::domain_error {
    using std::domain_error::domain_error;
};

/// Enumeration or planning budget exceeded.
struct BudgetExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double kNormalizationTolerance = 1e-9;

struct Action {
    std::size_t index = 0;
    friend auto operator<=>(const Action&, const Action&) = default;
};

struct Percept {
    std::size_t observation = 0;
    double reward = 0.0;
    friend bool operator==(const Percept&, const Percept&) = default;
};

/// Finite action alphabet Y and percept alphabet X = X' x R, where R is the
/// sorted set of reward levels an environment can emit.
struct Alphabet {
    std::size_t actions = 1;
    std::size_t observations = 1;
    std::vector<double> rewards{0.0, 1.0};
    double r_max = 1.0;

    std::size_t percept_count() const { return observations * rewards.size(); }

    Percept percept(std::size_t index) const {
        return {index / rewards.size(), rewards[index % rewards.size()]};
    }

    std::optional<std::size_t> index_of(const Percept& x) const {
        if (x.observation >= observations) return std::nullopt;
        auto it = std::lower_bound(rewards.begin(), rewards.end(), x.reward);
        if (it == rewards.end() || *it != x.reward) return std::nullopt;
        return x.observation * rewards.size() + static_cast<std::size_t>(it - rewards.begin());
    }

    void validate() const {
        if (actions == 0) throw ValidationError("alphabet: no actions");
        if (observations == 0) throw ValidationError("alphabet: no observations");
        if (rewards.empty()) throw ValidationError("alphabet: no reward levels");
        if (!(r_max > 0.0) || !std::isfinite(r_max)) throw ValidationError("alphabet: r_max must be positive");
        for (std::size_t i = 0; i < rewards.size(); ++i) {
            if (rewards[i] < 0.0 || rewards[i] > r_max)
                throw ValidationError("alphabet: reward level outside [0, r_max]");
            if (i > 0 && !(rewards[i - 1] < rewards[i]))
                throw ValidationError("alphabet: reward levels must be strictly increasing");
        }
    }

    friend bool operator==(const Alphabet&, const Alphabet&) = default;
};

/// Sorted union of reward levels.
inline std::vector<double> merge_reward_levels(std::vector<double> a, std::span<const double> b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

struct Step {
    Action action;
    Percept percept;
    friend bool operator==(const Step&, const Step&) = default;
};

/// The alternating sequence y1 x1 ... y_{k-1} x_{k-1}. Extension returns a new value.
class History {
  public:
    History() = default;
    explicit History(std::vector<Step> steps) : steps_(std::move(steps)) {}

    History extended(Action y, Percept x) const {
        History h = *this;
        h.steps_.push_back({y, x});
        return h;
    }

    /// Prefix of the first n steps.
    History prefix(std::size_t n) const {
        return History(std::vector<Step>(steps_.begin(), steps_.begin() + static_cast<std::ptrdiff_t>(std::min(n, steps_.size()))));
    }

    std::size_t size() const { return steps_.size(); }
    bool empty() const { return steps_.empty(); }
    /// Index k of the cycle that follows this history.
    std::size_t next_cycle() const { return steps_.size() + 1; }
    std::span<const Step> steps() const { return steps_; }
    const Step& operator[](std::size_t i) const { return steps_[i]; }
    const Step& back() const { return steps_.back(); }

    friend bool operator==(const History&, const History&) = default;

  private:
    std::vector<Step> steps_;
};

using BeliefKey = std::vector<std::int64_t>;

/// Planning view of an environment conditioned on a history. Percepts are
/// addressed by alphabet index.
class Belief {
  public:
    virtual ~Belief() = default;
    virtual double prob(Action y, std::size_t x) const = 0;
    virtual std::unique_ptr<Belief> next(Action y, std::size_t x) const = 0;
    /// Equal keys (within one environment) imply identical future conditionals.
    /// nullopt disables memoization for this belief.
    virtual std::optional<BeliefKey> key() const { return std::nullopt; }
};

/// A chronological environment rho(yx_{<k} y x_k).
class Environment {
  public:
    explicit Environment(Alphabet alphabet) : alphabet_(std::move(alphabet)) { alphabet_.validate(); }
    virtual ~Environment() = default;

    const Alphabet& alphabet() const { return alphabet_; }
    double r_max() const { return alphabet_.r_max; }

    /// Conditional probability of percept x after history h and action y.
    double prob(const History& h, Action y, const Percept& x) const {
        check_history(h);
        check_action(y);
        auto xi = alphabet_.index_of(x);
        if (!xi) {
            if (x.observation >= alphabet_.observations || x.reward < 0.0 || x.reward > alphabet_.r_max)
                throw DomainError("percept outside the environment's alphabet");
            return 0.0;
        }
        return conditional(h, y, *xi);
    }

    /// Same as prob() with the percept given by alphabet index; no validation.
    virtual double conditional(const History& h, Action y, std::size_t x) const = 0;

    /// Default belief walks the explicit history.
    virtual std::unique_ptr<Belief> belief(const History& h) const;

    void check_action(Action y) const {
        if (y.index >= alphabet_.actions) throw DomainError("action outside the environment's alphabet");
    }

    void check_history(const History& h) const {
        for (const auto& s : h.steps()) {
            check_action(s.action);
            if (!alphabet_.index_of(s.percept)) throw DomainError("history percept outside the environment's alphabet");
        }
    }

    std::size_t percept_index(const Percept& x) const {
        auto i = alphabet_.index_of(x);
        if (!i) throw DomainError("percept outside the environment's alphabet");
        return *i;
    }

  private:
    Alphabet alphabet_;
};

namespace detail {

class HistoryBelief final : public Belief {
  public:
    HistoryBelief(const Environment& env, History h) : env_(&env), h_(std::move(h)) {}
    double prob(Action y, std::size_t x) const override { return env_->conditional(h_, y, x); }
    std::unique_ptr<Belief> next(Action y, std::size_t x) const override {
        return std::make_unique<HistoryBelief>(*env_, h_.extended(y, env_->alphabet().percept(x)));
    }

  private:
    const Environment* env_;
    History h_;
};

}  // namespace detail

inline std::unique_ptr<Belief> Environment::belief(const History& h) const {
    return std::make_unique<detail::HistoryBelief>(*this, h);
}

using EnvironmentPtr = std::shared_ptr<const Environment>;

// ---------------------------------------------------------------------------
// Random streams

/// splitmix64 finalizer; also used for counter-based substream derivation.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of substream `index` of `seed`. Independent of scheduling order.
constexpr std::uint64_t substream(std::uint64_t seed, std::uint64_t index) {
    return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Seeded 64-bit stream with a portable uniform conversion.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}
    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v;
        do { v = engine_(); } while (v >= limit);
        return static_cast<std::size_t>(v % n);
    }

  private:
    std::mt19937_64 engine_;
};

/// Index drawn from a probability vector by inverse CDF.
inline std::size_t sample_index(std::span<const double> probs, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        last_positive = i;
        acc += probs[i];
        if (u < acc) return i;
    }
    return last_positive;
}

/// env_sample: draw a percept from rho(h y .).
inline Percept sample_percept(const Environment& env, const History& h, Action y, Rng& rng) {
    env.check_history(h);
    env.check_action(y);
    const auto& a = env.alphabet();
    std::vector<double> probs(a.percept_count());
    for (std::size_t x = 0; x < probs.size(); ++x) probs[x] = env.conditional(h, y, x);
    return a.percept(sample_index(probs, rng));
}

/// seq_prob: rho(h y x_{k:m}) as the chain-rule product of one-step conditionals.
inline double sequence_probability(const Environment& env, const History& h, std::span<const Action> actions,
                                   std::span<const Percept> percepts) {
    if (actions.size() != percepts.size()) throw DomainError("action and percept sequences differ in length");
    double p = 1.0;
    History cur = h;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        p *= env.prob(cur, actions[i], percepts[i]);
        cur = cur.extended(actions[i], percepts[i]);
    }
    return p;
}

/// log rho(h) for a complete history from the empty history; -inf when impossible.
inline double log_history_probability(const Environment& env, const History& h) {
    double lp = 0.0;
    History cur;
    for (const auto& s : h.steps()) {
        const double p = env.prob(cur, s.action, s.percept);
        if (p <= 0.0) return -std::numeric_limits<double>::infinity();
        lp += std::log(p);
        cur = cur.extended(s.action, s.percept);
    }
    return lp;
}

}  // namespace bayeslab
