// bayeslab command-line front end. Every subcommand emits fixed-schema tables
// (CSV or JSON) to stdout or --out.

#include <CLI11.hpp>

#include <bayeslab/bayeslab.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

using namespace bayeslab;
using io::Cell;
using io::Table;

namespace {

struct Options {
    std::string class_file;
    std::optional<std::size_t> horizon;
    std::vector<std::size_t> m_grid;
    std::string discount;
    double eps = 0.01;
    std::uint64_t seed = 1;
    std::size_t replicates = 1;
    std::string format = "csv";
    std::string out;
    std::size_t threads = 1;
    std::string k_range = "1..10";
    std::size_t env = 0;
    std::string agent;
    std::optional<std::size_t> cycles;
    std::string history;
};

long long ll(std::size_t v) { return static_cast<long long>(v); }

std::vector<std::string> weight_notes;

WeightedClass load_class(const Options& o, ClassSpec* spec_out = nullptr) {
    if (o.class_file.empty()) throw ValidationError("--class: required");
    auto spec = io::read_class_spec(o.class_file, [](const std::string& n) { weight_notes.push_back(n); });
    auto cls = spec.build();
    if (spec_out) *spec_out = std::move(spec);
    return cls;
}

std::optional<DiscountSequence> discount_of(const Options& o) {
    if (o.discount.empty()) return std::nullopt;
    if (!(o.eps > 0.0)) throw ValidationError("--eps: must be positive");
    return DiscountSequence::parse(o.discount);
}

PlanningMode planning_mode(const Options& o) {
    if (auto d = discount_of(o)) return DiscountedPlanning{*d, o.eps};
    if (!o.horizon) throw ValidationError("--horizon or --discount: one is required");
    return FiniteHorizon{*o.horizon};
}

void check_env_index(const WeightedClass& cls, std::size_t i) {
    if (i >= cls.size())
        throw ValidationError("--env: index " + std::to_string(i) + " outside class of size " + std::to_string(cls.size()));
}

/// "y:o:r,y:o:r" with action, observation and reward per step.
History parse_history(const std::string& text, const Alphabet& al) {
    std::vector<Step> steps;
    std::size_t pos = 0;
    std::size_t i = 0;
    while (pos < text.size()) {
        const std::size_t end = std::min(text.find(',', pos), text.size());
        const std::string item = text.substr(pos, end - pos);
        const std::string where = "--history[" + std::to_string(i) + "]";
        const auto c1 = item.find(':'), c2 = item.rfind(':');
        if (c1 == std::string::npos || c1 == c2) throw ValidationError(where + ": expected action:observation:reward");
        try {
            std::size_t used = 0;
            const auto y = std::stoull(item.substr(0, c1), &used);
            const auto ob = std::stoull(item.substr(c1 + 1, c2 - c1 - 1));
            const double r = std::stod(item.substr(c2 + 1));
            if (y >= al.actions) throw ValidationError(where + ": action out of range");
            const Percept x{ob, r};
            if (!al.index_of(x)) throw ValidationError(where + ": percept outside the class alphabet");
            steps.push_back({Action{y}, x});
        } catch (const std::logic_error& e) {
            if (dynamic_cast<const ValidationError*>(&e)) throw;
            throw ValidationError(where + ": expected action:observation:reward");
        }
        pos = end + 1;
        ++i;
    }
    return History(std::move(steps));
}

std::pair<std::size_t, std::size_t> parse_range(const std::string& text) {
    const auto dots = text.find("..");
    try {
        if (dots == std::string::npos) {
            const auto k = std::stoull(text);
            return {k, k};
        }
        const auto a = std::stoull(text.substr(0, dots)), b = std::stoull(text.substr(dots + 2));
        if (a == 0 || b < a) throw ValidationError("--k: expected a..b with 1 <= a <= b");
        return {a, b};
    } catch (const std::logic_error& e) {
        if (dynamic_cast<const ValidationError*>(&e)) throw;
        throw ValidationError("--k: expected a..b");
    }
}

std::string mode_label(const PlanningMode& mode) {
    if (const auto* f = std::get_if<FiniteHorizon>(&mode)) return "finite-horizon:" + std::to_string(f->horizon);
    return std::get<DiscountedPlanning>(mode).discount.describe();
}

const MdpSpec& mdp_member(const ClassSpec& spec, std::size_t i) {
    const auto* m = std::get_if<MdpSpec>(&spec.environments.at(i));
    if (!m) throw ValidationError("environments[" + std::to_string(i) + "]: agent needs an mdp environment");
    return *m;
}

/// Agent kinds shared by simulate, posterior and converge.
std::unique_ptr<Agent> make_agent(const std::string& kind, const WeightedClass& cls, const ClassSpec& spec, std::size_t env,
                                  const Options& o, std::size_t lifetime, std::uint64_t seed) {
    const auto& al = cls.alphabet();
    if (kind == "bayes") return std::make_unique<BayesAgent>(cls, planning_mode(o));
    if (kind == "informed") return std::make_unique<InformedAgent>(cls.env_ptr(env), planning_mode(o));
    if (kind == "random") return std::make_unique<RandomAgent>(al.actions, seed);
    if (kind == "ete") {
        const auto& m = mdp_member(spec, env);
        return std::make_unique<EteAgent>(al.actions, m.states, al.r_max, lifetime, seed, m.initial_state);
    }
    if (kind == "discounted-ete") {
        const auto& m = mdp_member(spec, env);
        auto d = discount_of(o);
        if (!d) throw ValidationError("--discount: required for the discounted-ete agent");
        auto agent = std::make_unique<DiscountedEteAgent>(al.actions, m.states, al.r_max, *d, o.eps, seed, 1, m.initial_state);
        if (auto w = agent->warning()) std::cerr << "warning: " << *w << '\n';
        return agent;
    }
    throw ValidationError("--agent: unknown kind '" + kind + "' (bayes, informed, random, ete, discounted-ete)");
}

Table posterior_table(const std::vector<double>& w) {
    Table t{"bayeslab.posterior.v1", {"env", "weight"}, {}};
    for (std::size_t i = 0; i < w.size(); ++i) t.add({ll(i), w[i]});
    return t;
}

// ---------------------------------------------------------------------------

std::vector<Table> cmd_act(const Options& o) {
    auto cls = load_class(o);
    const auto& al = cls.alphabet();
    const History h = parse_history(o.history, al);
    BayesAgent agent(cls, planning_mode(o));
    const auto mode = agent.mode();
    const auto& xi = agent.mixture();
    const std::size_t k = h.next_cycle();

    Table act{"bayeslab.act.v1", {"cycle", "mode", "action", "value", "normalization"}, {}};
    const Action y = agent.act(h);
    ValueReport v;
    if (const auto* f = std::get_if<FiniteHorizon>(&mode))
        v = optimal_value(xi, k, f->horizon, h);
    else {
        const auto& d = std::get<DiscountedPlanning>(mode);
        v = discounted_optimal_value(xi, k, d.discount, d.eps, h);
    }
    act.add({ll(k), mode_label(mode), ll(y.index), v.value, std::string(to_string(v.normalization))});
    return {act, posterior_table(posterior_weights(cls, h))};
}

std::vector<Table> cmd_value(const Options& o) {
    auto cls = load_class(o);
    const auto& al = cls.alphabet();
    const History h = parse_history(o.history, al);
    const std::size_t k = h.next_cycle();
    const auto mode = planning_mode(o);
    const std::string kind = o.agent.empty() ? "optimal" : o.agent;

    Table t{"bayeslab.value.v1", {"env", "policy", "cycle", "value", "normalization", "truncation_depth", "truncation_error"}, {}};
    auto emit = [&](long long env, const ValueReport& r) {
        t.add({env, kind, ll(k), r.value, std::string(to_string(r.normalization)), ll(r.truncation_depth), r.truncation_error});
    };
    // One row per class member and a final row (env = -1) for the mixture.
    for (std::size_t i = 0; i <= cls.size(); ++i) {
        const bool mixture = i == cls.size();
        std::shared_ptr<const Environment> holder = mixture ? std::static_pointer_cast<const Environment>(make_mixture(cls)) : cls.env_ptr(i);
        const Environment& env = *holder;
        StochasticPolicy policy;
        if (kind == "optimal") {
            if (const auto* f = std::get_if<FiniteHorizon>(&mode))
                emit(mixture ? -1 : ll(i), optimal_value(env, k, f->horizon, h));
            else {
                const auto& d = std::get<DiscountedPlanning>(mode);
                emit(mixture ? -1 : ll(i), discounted_optimal_value(env, k, d.discount, d.eps, h));
            }
            continue;
        }
        if (kind == "bayes") {
            auto agent = std::make_shared<BayesAgent>(cls, mode);
            policy = as_stochastic([agent](const History& g) { return agent->act(g); }, al.actions);
        } else if (kind == "random") {
            policy = uniform_policy(al.actions);
        } else if (kind.rfind("constant:", 0) == 0) {
            std::size_t a = 0;
            try {
                a = std::stoull(kind.substr(9));
            } catch (const std::logic_error&) {
                throw ValidationError("--agent: expected constant:<action>");
            }
            if (a >= al.actions) throw ValidationError("--agent: action out of range");
            policy = as_stochastic([a](const History&) { return Action{a}; }, al.actions);
        } else {
            throw ValidationError("--agent: value supports optimal, bayes, random or constant:<action>");
        }
        if (const auto* f = std::get_if<FiniteHorizon>(&mode))
            emit(mixture ? -1 : ll(i), expected_return(env, policy, k, f->horizon, h));
        else {
            const auto& d = std::get<DiscountedPlanning>(mode);
            emit(mixture ? -1 : ll(i), discounted_value_of_policy(env, policy, k, d.discount, d.eps, h));
        }
    }
    return {t};
}

std::vector<Table> cmd_simulate(const Options& o) {
    ClassSpec spec;
    auto cls = load_class(o, &spec);
    check_env_index(cls, o.env);
    const std::string kind = o.agent.empty() ? "bayes" : o.agent;
    const std::size_t n = o.cycles ? *o.cycles : o.horizon.value_or(10);
    if (o.replicates == 0) throw ValidationError("--replicates: must be positive");

    std::vector<Episode> episodes(o.replicates);
    detail::parallel_for(o.replicates, o.threads, [&](std::size_t r) {
        const std::uint64_t rep = substream(o.seed, r);
        auto agent = make_agent(kind, cls, spec, o.env, o, n, substream(rep, 1));
        Rng rng(substream(rep, 2));
        episodes[r] = run_episode(cls.env(o.env), *agent, n, rng);
    });

    Table traj{"bayeslab.trajectory.v1", {"replicate", "cycle", "action", "observation", "reward"}, {}};
    Table summary{"bayeslab.episode.v1", {"replicate", "agent", "env", "cycles", "reward_sum", "mean_reward"}, {}};
    for (std::size_t r = 0; r < episodes.size(); ++r) {
        const auto& e = episodes[r];
        for (std::size_t i = 0; i < e.trajectory.size(); ++i) {
            const auto& s = e.trajectory[i];
            traj.add({ll(r), ll(i + 1), ll(s.action.index), ll(s.percept.observation), s.percept.reward});
        }
        summary.add({ll(r), kind, ll(o.env), ll(n), e.reward_sum, n ? e.reward_sum / static_cast<double>(n) : 0.0});
    }
    return {summary, traj};
}

std::vector<Table> cmd_pareto(const Options& o) {
    auto cls = load_class(o);
    if (!o.horizon) throw ValidationError("--horizon: required");
    const std::size_t m = *o.horizon;
    const auto& al = cls.alphabet();
    BayesAgent agent(cls, FiniteHorizon{m});
    const auto subject = extract_policy_table(agent, al, m);
    const auto verdict = pareto_check(cls, subject, m);

    Table v{"bayeslab.pareto.v1", {"horizon", "verdict", "policies_checked", "witness_id"}, {}};
    v.add({ll(m), std::string(verdict.dominated ? "dominated" : "not dominated"), static_cast<long long>(verdict.policies_checked),
           verdict.witness_id ? static_cast<long long>(*verdict.witness_id) : -1LL});

    Table values{"bayeslab.pareto_values.v1", {"env", "weight", "subject_value"}, {}};
    for (std::size_t i = 0; i < cls.size(); ++i) values.add({ll(i), cls.weight(i), verdict.subject_values[i]});

    Table sweep{"bayeslab.balance.v1", {"rival_id", "delta", "delta_loss", "delta_gain", "nonnegative", "gain_bound_holds"}, {}};
    const auto rivals = enumerate_policies(al.actions, al.percept_count(), m);
    rivals.for_each([&](std::uint64_t id, const PolicyTable& p) {
        const auto r = balance_from_values(cls, verdict.subject_values, class_values(cls, p, m));
        sweep.add({static_cast<long long>(id), r.delta, r.delta_loss, r.delta_gain, r.nonnegative, r.gain_bound_holds});
    });

    Table gaps{"bayeslab.gap_bound.v1", {"horizon", "env", "optimal_average", "subject_average", "gap", "bound", "within"}, {}};
    for (const auto& row : gap_bound_check(cls, m))
        gaps.add({ll(row.horizon), ll(row.env), row.optimal_average, row.subject_average, row.gap, row.bound.value_or(0.0),
                  gap_within_bound(row)});
    return {v, values, sweep, gaps};
}

std::vector<Table> cmd_converge(const Options& o) {
    ClassSpec spec;
    auto cls = load_class(o, &spec);
    if (o.m_grid.empty()) throw ValidationError("--m-grid: required");
    const std::string kind = o.agent.empty() ? "ete" : o.agent;
    // Each member gets its own agent family; the experiment is run per member so
    // ETE agents see the state space of the environment they face.
    Table t{"bayeslab.convergence.v1",
            {"horizon", "env", "agent", "optimal_average", "subject_average", "gap", "std_error", "replicates"}, {}};
    ExperimentOptions opt;
    opt.replicates = o.replicates;
    opt.seed = o.seed;
    opt.threads = o.threads;
    std::vector<GapRow> rows;
    for (std::size_t e = 0; e < cls.size(); ++e) {
        WeightedClass single({cls.env_ptr(e)}, {1.0});
        Options per = o;
        per.env = e;
        AgentBuilder build = [&, per](std::size_t m, std::uint64_t seed) {
            Options local = per;
            if (!local.horizon && local.discount.empty()) local.horizon = m;
            return make_agent(kind, cls, spec, per.env, local, m, seed);
        };
        opt.seed = substream(o.seed, e);
        for (auto row : convergence_experiment({spec.environments[e]}, single, o.m_grid, build, opt)) {
            row.env = e;
            rows.push_back(row);
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const GapRow& a, const GapRow& b) {
        return a.horizon != b.horizon ? a.horizon < b.horizon : a.env < b.env;
    });
    for (const auto& r : rows)
        t.add({ll(r.horizon), ll(r.env), kind, r.optimal_average, r.subject_average, r.gap, r.std_error, ll(r.replicates)});
    return {t};
}

std::vector<Table> cmd_posterior(const Options& o) {
    ClassSpec spec;
    auto cls = load_class(o, &spec);
    check_env_index(cls, o.env);
    const std::string kind = o.agent.empty() ? "random" : o.agent;
    const std::size_t n = o.cycles.value_or(50);
    if (o.replicates == 0) throw ValidationError("--replicates: must be positive");

    std::vector<std::vector<MartingaleRecord>> traces(o.replicates);
    detail::parallel_for(o.replicates, o.threads, [&](std::size_t r) {
        const std::uint64_t rep = substream(o.seed, r);
        auto agent = make_agent(kind, cls, spec, o.env, o, n, substream(rep, 1));
        Rng rng(substream(rep, 2));
        traces[r] = martingale_trace(cls, o.env, *agent, n, rng);
    });

    Table z{"bayeslab.evidence.v1",
            {"replicate", "cycle", "action", "observation", "reward", "z_previous", "expected_next", "z", "holds"}, {}};
    Table w{"bayeslab.posterior_trace.v1", {"replicate", "cycle", "env", "weight"}, {}};
    for (std::size_t r = 0; r < traces.size(); ++r)
        for (const auto& rec : traces[r]) {
            z.add({ll(r), ll(rec.cycle), ll(rec.action.index), ll(rec.percept.observation), rec.percept.reward, rec.z_previous,
                   rec.expected_next, rec.z, rec.holds});
            for (std::size_t i = 0; i < rec.posterior.size(); ++i) w.add({ll(r), ll(rec.cycle), ll(i), rec.posterior[i]});
        }
    return {z, w};
}

std::vector<Table> cmd_horizon(const Options& o) {
    auto d = discount_of(o);
    if (!d) throw ValidationError("--discount: required");
    const auto [a, b] = parse_range(o.k_range);
    Table t{"bayeslab.horizon.v1", {"discount", "k", "gamma", "tail", "effective_horizon", "truncation_depth"}, {}};
    for (std::size_t k = a; k <= b; ++k) {
        const double tail = d->tail(k);
        if (tail == 0.0) {
            t.add({d->describe(), ll(k), d->gamma(k), tail, -1LL, -1LL});
            continue;
        }
        t.add({d->describe(), ll(k), d->gamma(k), tail, ll(effective_horizon(*d, k)), ll(truncation_depth(*d, k, o.eps, 1.0))});
    }
    return {t};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayes-mixture reinforcement learning toolkit"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--out", o.out, "output file (default stdout)");
        sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--seed", o.seed, "master seed");
    };
    auto with_class = [&](CLI::App* sub) { sub->add_option("--class", o.class_file, "class file")->required(); };
    auto with_planning = [&](CLI::App* sub) {
        sub->add_option("--horizon", o.horizon, "finite horizon m");
        sub->add_option("--discount", o.discount, "finite:m | geometric:g | quadratic");
        sub->add_option("--eps", o.eps, "truncation tolerance");
    };

    struct Command {
        CLI::App* app;
        std::vector<Table> (*run)(const Options&);
    };
    std::vector<Command> commands;

    auto* act = app.add_subcommand("act", "Bayes-optimal action and posterior for a history");
    common(act), with_class(act), with_planning(act);
    act->add_option("--history", o.history, "steps as action:observation:reward, comma separated");
    commands.push_back({act, cmd_act});

    auto* value = app.add_subcommand("value", "value of a policy in every class member and the mixture");
    common(value), with_class(value), with_planning(value);
    value->add_option("--history", o.history, "steps as action:observation:reward, comma separated");
    value->add_option("--agent", o.agent, "optimal | bayes | random | constant:<action>");
    commands.push_back({value, cmd_value});

    auto* simulate = app.add_subcommand("simulate", "run an agent against one class member");
    common(simulate), with_class(simulate), with_planning(simulate);
    simulate->add_option("--env", o.env, "index of the true environment");
    simulate->add_option("--agent", o.agent, "bayes | informed | random | ete | discounted-ete");
    simulate->add_option("--cycles", o.cycles, "number of cycles");
    simulate->add_option("--replicates", o.replicates, "independent episodes");
    commands.push_back({simulate, cmd_simulate});

    auto* pareto = app.add_subcommand("pareto", "Pareto verdict and balance sweep for the Bayes policy");
    common(pareto), with_class(pareto);
    pareto->add_option("--horizon", o.horizon, "horizon m")->required();
    commands.push_back({pareto, cmd_pareto});

    auto* converge = app.add_subcommand("converge", "average-value gap over a grid of horizons");
    common(converge), with_class(converge);
    converge->add_option("--m-grid", o.m_grid, "horizons, comma separated")->delimiter(',')->required();
    converge->add_option("--agent", o.agent, "ete | bayes | informed | random");
    converge->add_option("--replicates", o.replicates, "Monte Carlo replicates")->default_val(100);
    converge->add_option("--discount", o.discount, "planning discount for discounted agents");
    converge->add_option("--eps", o.eps, "truncation tolerance");
    commands.push_back({converge, cmd_converge});

    auto* posterior = app.add_subcommand("posterior", "posterior weights and evidence ratio along a trajectory");
    common(posterior), with_class(posterior), with_planning(posterior);
    posterior->add_option("--env", o.env, "index of the true environment");
    posterior->add_option("--agent", o.agent, "random | bayes | informed");
    posterior->add_option("--cycles", o.cycles, "number of cycles");
    posterior->add_option("--replicates", o.replicates, "independent traces");
    commands.push_back({posterior, cmd_posterior});

    auto* horizon = app.add_subcommand("horizon", "discount weights, tails and effective horizons");
    common(horizon);
    horizon->add_option("--discount", o.discount, "finite:m | geometric:g | quadratic")->required();
    horizon->add_option("--k", o.k_range, "cycle range a..b");
    horizon->add_option("--eps", o.eps, "truncation tolerance");
    commands.push_back({horizon, cmd_horizon});

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        std::vector<Table> tables;
        for (const auto& c : commands)
            if (c.app->parsed()) tables = c.run(o);
        for (const auto& n : weight_notes) std::cerr << "note: " << n << '\n';
        if (o.out.empty()) {
            io::write_tables(std::cout, tables, o.format);
        } else {
            std::ofstream out(o.out, std::ios::binary);
            if (!out) throw ValidationError("--out: cannot open '" + o.out + "'");
            io::write_tables(out, tables, o.format);
        }
        return 0;
    } catch (const BudgetExceeded& e) {
        std::cerr << "budget exceeded: " << e.what() << '\n';
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
