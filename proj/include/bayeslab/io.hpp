#pragma once

// Environment-class files and tabular result emission (CSV or JSON).

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bayeslab/mixture.hpp"
#include "bayeslab/models.hpp"

namespace bayeslab::io {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;  // keeps column order in emitted rows

/// Sink for informational notes produced while parsing (e.g. weight renormalization).
using NoteSink = std::function<void(const std::string&)>;

namespace detail {

inline const json& field(const json& obj, const std::string& name, const std::string& path) {
    if (!obj.is_object()) throw ValidationError(path + ": expected an object");
    auto it = obj.find(name);
    if (it == obj.end()) throw ValidationError(path + "." + name + ": missing");
    return *it;
}

inline double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ValidationError(path + ": expected a number");
    return v.get<double>();
}

inline std::size_t count(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ValidationError(path + ": expected a non-negative integer");
    return v.get<std::size_t>();
}

inline std::string idx(std::size_t i) { return "[" + std::to_string(i) + "]"; }

inline Tensor3 tensor(const json& v, std::size_t actions, std::size_t states, const std::string& path) {
    if (!v.is_array() || v.size() != actions)
        throw ValidationError(path + ": expected " + std::to_string(actions) + " matrices (one per action)");
    Tensor3 t(actions);
    for (std::size_t a = 0; a < actions; ++a) {
        const auto& mat = v[a];
        if (!mat.is_array() || mat.size() != states)
            throw ValidationError(path + idx(a) + ": expected " + std::to_string(states) + " rows");
        t[a].resize(states);
        for (std::size_t s = 0; s < states; ++s) {
            const auto& row = mat[s];
            const std::string rp = path + idx(a) + idx(s);
            if (!row.is_array() || row.size() != states)
                throw ValidationError(rp + ": expected " + std::to_string(states) + " entries");
            for (std::size_t s2 = 0; s2 < states; ++s2) t[a][s].push_back(number(row[s2], rp + idx(s2)));
        }
    }
    return t;
}

inline MdpSpec parse_mdp(const json& e, const std::string& path, double r_max) {
    MdpSpec spec;
    spec.r_max = r_max;
    const auto& tr = field(e, "transitions", path);
    if (!tr.is_array() || tr.empty() || !tr[0].is_array() || tr[0].empty())
        throw ValidationError(path + ".transitions: expected a non-empty [action][state][state] array");
    spec.actions = tr.size();
    spec.states = tr[0].size();
    spec.transitions = tensor(tr, spec.actions, spec.states, path + ".transitions");
    spec.rewards = tensor(field(e, "rewards", path), spec.actions, spec.states, path + ".rewards");
    if (auto it = e.find("initial_state"); it != e.end()) spec.initial_state = count(*it, path + ".initial_state");
    if (spec.initial_state >= spec.states) throw ValidationError(path + ".initial_state: out of range");
    for (std::size_t a = 0; a < spec.actions; ++a)
        for (std::size_t s = 0; s < spec.states; ++s) {
            const std::string rp = path + ".transitions" + idx(a) + idx(s);
            double sum = 0.0;
            for (std::size_t s2 = 0; s2 < spec.states; ++s2) {
                const double p = spec.transitions[a][s][s2];
                if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(rp + idx(s2) + ": probability outside [0,1]");
                sum += p;
                const double r = spec.rewards[a][s][s2];
                if (!(r >= 0.0 && r <= r_max))
                    throw ValidationError(path + ".rewards" + idx(a) + idx(s) + idx(s2) + ": reward outside [0, r_max]");
            }
            if (std::abs(sum - 1.0) > kNormalizationTolerance) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.12g", sum);
                throw ValidationError(rp + ": row sums to " + buf + ", expected 1");
            }
        }
    return spec;
}

inline BanditSpec parse_bandit(const json& e, const std::string& path, double r_max) {
    BanditSpec spec;
    spec.r_max = r_max;
    const auto& arms = field(e, "arms", path);
    if (!arms.is_array() || arms.empty()) throw ValidationError(path + ".arms: expected a non-empty array");
    for (std::size_t i = 0; i < arms.size(); ++i) {
        const double p = number(arms[i], path + ".arms" + idx(i));
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(path + ".arms" + idx(i) + ": probability outside [0,1]");
        spec.arms.push_back(p);
    }
    if (r_max < 1.0) throw ValidationError(path + ": bandit rewards need r_max >= 1");
    return spec;
}

inline IidSpec parse_iid(const json& e, const std::string& path, double r_max) {
    IidSpec spec;
    spec.r_max = r_max;
    spec.actions = count(field(e, "actions", path), path + ".actions");
    spec.observations = count(field(e, "observations", path), path + ".observations");
    const auto& outcomes = field(e, "outcomes", path);
    if (!outcomes.is_array() || outcomes.empty()) throw ValidationError(path + ".outcomes: expected a non-empty array");
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const std::string op = path + ".outcomes" + idx(i);
        IidOutcome o;
        o.percept.observation = count(field(outcomes[i], "observation", op), op + ".observation");
        o.percept.reward = number(field(outcomes[i], "reward", op), op + ".reward");
        o.probability = number(field(outcomes[i], "probability", op), op + ".probability");
        spec.outcomes.push_back(o);
    }
    try {
        spec.validate();
    } catch (const ValidationError& err) {
        throw ValidationError(path + "." + err.what());
    }
    return spec;
}

}  // namespace detail

/// Parses a class document. Weights default to uniform; a weight sum within
/// 1e-9 of one is renormalized exactly (and reported through `notes`).
inline ClassSpec parse_class_spec(const json& doc, const NoteSink& notes = {}) {
    using namespace detail;
    if (!doc.is_object()) throw ValidationError("class file: expected an object at the top level");
    ClassSpec cls;
    if (auto it = doc.find("r_max"); it != doc.end()) {
        cls.r_max = number(*it, "r_max");
        if (!(cls.r_max > 0.0)) throw ValidationError("r_max: must be positive");
    }
    const auto& envs = field(doc, "environments", "class file");
    if (!envs.is_array() || envs.empty()) throw ValidationError("environments: expected a non-empty array");
    for (std::size_t i = 0; i < envs.size(); ++i) {
        const std::string path = "environments" + idx(i);
        const auto& type = field(envs[i], "type", path);
        if (!type.is_string()) throw ValidationError(path + ".type: expected a string");
        const auto t = type.get<std::string>();
        if (t == "mdp")
            cls.environments.emplace_back(parse_mdp(envs[i], path, cls.r_max));
        else if (t == "bandit")
            cls.environments.emplace_back(parse_bandit(envs[i], path, cls.r_max));
        else if (t == "iid")
            cls.environments.emplace_back(parse_iid(envs[i], path, cls.r_max));
        else
            throw ValidationError(path + ".type: unknown kind '" + t + "' (expected mdp, bandit or iid)");
    }
    if (auto it = doc.find("weights"); it != doc.end()) {
        if (!it->is_array() || it->size() != envs.size())
            throw ValidationError("weights: expected " + std::to_string(envs.size()) + " entries");
        double sum = 0.0;
        for (std::size_t i = 0; i < it->size(); ++i) {
            const double w = number((*it)[i], "weights" + idx(i));
            if (!(w > 0.0)) throw ValidationError("weights" + idx(i) + ": must be positive");
            cls.weights.push_back(w);
            sum += w;
        }
        if (std::abs(sum - 1.0) > kNormalizationTolerance) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.12g", sum);
            throw ValidationError(std::string("weights: sum to ") + buf + ", expected 1");
        }
        if (sum != 1.0) {
            for (double& w : cls.weights) w /= sum;
            if (notes) {
                char buf[96];
                std::snprintf(buf, sizeof buf, "weights: renormalized from sum %.17g", sum);
                notes(buf);
            }
        }
    } else {
        cls.weights.assign(envs.size(), 1.0 / static_cast<double>(envs.size()));
    }
    cls.alphabet();  // shared-alphabet checks with field paths
    return cls;
}

inline ClassSpec parse_class_text(const std::string& text, const NoteSink& notes = {}) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("class file: malformed document: ") + e.what());
    }
    return parse_class_spec(doc, notes);
}

inline ClassSpec read_class_spec(const std::string& path, const NoteSink& notes = {}) {
    std::ifstream in(path);
    if (!in) throw ValidationError("class file: cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_class_text(buf.str(), notes);
}

/// parse_class_file: the validated weighted class described by a file.
inline WeightedClass parse_class_file(const std::string& path, const NoteSink& notes = {}) {
    return read_class_spec(path, notes).build();
}

// ---------------------------------------------------------------------------
// Result tables

using Cell = std::variant<std::string, double, long long, bool>;

/// A fixed-schema table. `schema` is the first header token of the CSV form.
struct Table {
    std::string schema;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) {
        if (row.size() != columns.size()) throw DomainError("table " + schema + ": row width mismatch");
        rows.push_back(std::move(row));
    }
};

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_field(const Cell& c) {
    struct {
        std::string operator()(const std::string& s) const {
            if (s.find_first_of(",\"\n") == std::string::npos) return s;
            std::string out = "\"";
            for (char ch : s) {
                if (ch == '"') out += '"';
                out += ch;
            }
            return out + "\"";
        }
        std::string operator()(double v) const { return format_number(v); }
        std::string operator()(long long v) const { return std::to_string(v); }
        std::string operator()(bool v) const { return v ? "true" : "false"; }
    } visitor;
    return std::visit(visitor, c);
}

/// CSV: header row (schema token, then columns), one record per row.
inline void write_csv(std::ostream& out, const Table& t) {
    out << t.schema;
    for (const auto& c : t.columns) out << ',' << c;
    out << '\n';
    for (const auto& row : t.rows) {
        out << "row";
        for (const auto& cell : row) out << ',' << csv_field(cell);
        out << '\n';
    }
}

inline ordered_json to_json(const Table& t) {
    ordered_json rows = ordered_json::array();
    for (const auto& row : t.rows) {
        ordered_json r = ordered_json::object();
        for (std::size_t i = 0; i < row.size(); ++i)
            std::visit([&](const auto& v) { r[t.columns[i]] = v; }, row[i]);
        rows.push_back(std::move(r));
    }
    return ordered_json{{"schema", t.schema}, {"columns", t.columns}, {"rows", std::move(rows)}};
}

/// JSON: one object per table, tables in an array.
inline void write_json(std::ostream& out, const std::vector<Table>& tables) {
    ordered_json doc = ordered_json::array();
    for (const auto& t : tables) doc.push_back(to_json(t));
    out << doc.dump(2) << '\n';
}

inline void write_tables(std::ostream& out, const std::vector<Table>& tables, const std::string& format) {
    if (format == "json") {
        write_json(out, tables);
        return;
    }
    if (format != "csv") throw ValidationError("--format: expected csv or json");
    for (std::size_t i = 0; i < tables.size(); ++i) {
        if (i) out << '\n';
        write_csv(out, tables[i]);
    }
}

}  // namespace bayeslab::io
