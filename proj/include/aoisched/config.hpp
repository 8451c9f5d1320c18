#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "aoisched/csv.hpp"
#include "aoisched/error.hpp"
#include "aoisched/harness.hpp"
#include "aoisched/oracle.hpp"

namespace aoisched {

enum class EnergyKind { Iid, TwoState, Matrix };

/// The user-facing description of the harvest process; `build()` turns it
/// into the validated EnergyProcess.
struct EnergySpec {
    EnergyKind kind = EnergyKind::Iid;
    double p_e = 0.5;
    double p11 = 0.7;
    std::vector<std::vector<double>> matrix;

    EnergyProcess build() const {
        try {
            switch (kind) {
                case EnergyKind::Iid: return EnergyProcess::iid(p_e);
                case EnergyKind::TwoState: return EnergyProcess::symmetric_two_state(p11);
                case EnergyKind::Matrix: return EnergyProcess::from_matrix(matrix);
            }
        } catch (const ContractError& e) {
            throw ConfigError(std::string("invalid [energy] section: ") + e.what());
        }
        throw ConfigError("invalid [energy] section: unknown kind");
    }
};

struct RunSettings {
    std::uint64_t steps = 20000;       ///< training slots (gr) or horizon (simulate)
    std::size_t runs = 100;
    std::uint64_t master_seed = 1;
    std::uint64_t record_every = 50;   ///< curve decimation for gr training
    std::string stem = "artifact";     ///< basename prefix of every output file
};

struct SweepSettings {
    bool present = false;
    SweepParameter parameter = SweepParameter::PE;
    std::vector<double> grid;
    std::vector<Method> methods;
    int b_inf_approx = 100;
    bool check_saturation = true;
};

/// Fully resolved experiment description: file values over defaults. The
/// canonical `echo()` text round-trips through the parser and heads every
/// artifact, making outputs self-describing and reproducible.
struct ExperimentConfig {
    SystemConfig system{};
    EnergySpec energy{};
    KernelOptions kernel{};
    Method method = Method::Rvi;
    RviOptions rvi{};
    OracleOptions oracle{};
    GrOptions gr{};
    PgOptions pg{};
    std::uint64_t pg_iterations = 5;
    RunSettings run{};
    SweepSettings sweep{};

    /// Harness settings for sweeps: training budgets come from [run]/[pg].
    MethodSettings method_settings() const {
        MethodSettings ms;
        ms.rvi = rvi;
        ms.kernel = kernel;
        ms.gr = gr;
        ms.gr_steps = run.steps;
        ms.pg = pg;
        ms.pg_iterations = pg_iterations;
        ms.runs = run.runs;
        ms.b_inf_approx = sweep.b_inf_approx;
        ms.check_inf_saturation = sweep.check_saturation;
        return ms;
    }

    std::string echo() const {
        std::ostringstream os;
        os << "[system]\n";
        os << "b_max = " << system.b_max << "\n";
        os << "delta_max = " << system.delta_max << "\n";
        os << "e_s = " << system.e_s << "\n";
        os << "e_tx = " << system.e_tx << "\n";
        os << "max_states = " << kernel.max_states << "\n";
        os << "[harq]\n";
        os << "p0 = " << format_double(system.harq.p0) << "\n";
        os << "lambda = " << format_double(system.harq.lambda) << "\n";
        os << "r_max = " << system.harq.r_max << "\n";
        os << "[energy]\n";
        switch (energy.kind) {
            case EnergyKind::Iid:
                os << "kind = iid\n";
                os << "p_e = " << format_double(energy.p_e) << "\n";
                break;
            case EnergyKind::TwoState:
                os << "kind = two_state\n";
                os << "p11 = " << format_double(energy.p11) << "\n";
                break;
            case EnergyKind::Matrix: {
                os << "kind = matrix\n";
                os << "matrix = ";
                for (std::size_t r = 0; r < energy.matrix.size(); ++r) {
                    if (r) os << "; ";
                    for (std::size_t c = 0; c < energy.matrix[r].size(); ++c) {
                        if (c) os << " ";
                        os << format_double(energy.matrix[r][c]);
                    }
                }
                os << "\n";
                break;
            }
        }
        os << "[method]\n";
        os << "name = " << to_string(method) << "\n";
        os << "[rvi]\n";
        os << "tol = " << format_double(rvi.tol) << "\n";
        os << "max_iter = " << rvi.max_iter << "\n";
        os << "damping = " << format_double(rvi.damping) << "\n";
        os << "[oracle]\n";
        os << "max_states = " << oracle.max_states << "\n";
        os << "enumeration_cap = " << oracle.enumeration_cap << "\n";
        os << "[gr]\n";
        os << "alpha_y = " << format_double(gr.alpha.y) << "\n";
        os << "alpha_z = " << format_double(gr.alpha.z) << "\n";
        os << "beta_y = " << format_double(gr.beta.y) << "\n";
        os << "beta_z = " << format_double(gr.beta.z) << "\n";
        os << "tau0 = " << format_double(gr.tau.tau0) << "\n";
        os << "tau_decay = " << format_double(gr.tau.decay) << "\n";
        os << "tau_floor = " << format_double(gr.tau.floor) << "\n";
        os << "[pg]\n";
        os << "sigma = " << format_double(pg.pert.sigma) << "\n";
        os << "q = " << format_double(pg.pert.q) << "\n";
        os << "rollout_len = " << pg.pert.rollout_len << "\n";
        os << "rollouts_per_eval = " << pg.pert.rollouts_per_eval << "\n";
        os << "gamma_y = " << format_double(pg.gamma.y) << "\n";
        os << "gamma_z = " << format_double(pg.gamma.z) << "\n";
        os << "tau = " << format_double(pg.tau) << "\n";
        os << "tau_eval = " << format_double(pg.tau_eval) << "\n";
        os << "theta0 = " << format_double(pg.theta0) << "\n";
        os << "crn = " << (pg.crn ? "true" : "false") << "\n";
        os << "iterations = " << pg_iterations << "\n";
        os << "[run]\n";
        os << "steps = " << run.steps << "\n";
        os << "runs = " << run.runs << "\n";
        os << "master_seed = " << run.master_seed << "\n";
        os << "record_every = " << run.record_every << "\n";
        os << "stem = " << run.stem << "\n";
        if (sweep.present) {
            os << "[sweep]\n";
            os << "parameter = " << to_string(sweep.parameter) << "\n";
            os << "grid = ";
            for (std::size_t i = 0; i < sweep.grid.size(); ++i)
                os << (i ? ", " : "") << format_double(sweep.grid[i]);
            os << "\n";
            os << "methods = ";
            for (std::size_t i = 0; i < sweep.methods.size(); ++i)
                os << (i ? ", " : "") << to_string(sweep.methods[i]);
            os << "\n";
            os << "b_inf_approx = " << sweep.b_inf_approx << "\n";
            os << "check_saturation = " << (sweep.check_saturation ? "true" : "false") << "\n";
        }
        return os.str();
    }

    /// FNV-1a over the canonical echo: a stable identity for "same resolved
    /// configuration".
    std::uint64_t fingerprint() const {
        const std::string text = echo();
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char c : text) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        return h;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline double parse_double(const std::string& v, const std::string& where) {
    const std::string t = trim(v);
    if (t == "inf") return std::numeric_limits<double>::infinity();
    if (t == "-inf") return -std::numeric_limits<double>::infinity();
    double out = 0.0;
    const char* begin = t.data();
    const char* end = begin + t.size();
    const auto res = std::from_chars(begin, end, out);
    if (res.ec != std::errc{} || res.ptr != end)
        throw ConfigError("value for " + where + " is not a number: '" + t + "'");
    return out;
}

inline long long parse_int(const std::string& v, const std::string& where) {
    const std::string t = trim(v);
    long long out = 0;
    const char* begin = t.data();
    const char* end = begin + t.size();
    const auto res = std::from_chars(begin, end, out);
    if (res.ec != std::errc{} || res.ptr != end)
        throw ConfigError("value for " + where + " is not an integer: '" + t + "'");
    return out;
}

inline std::uint64_t parse_u64(const std::string& v, const std::string& where) {
    const long long out = parse_int(v, where);
    if (out < 0) throw ConfigError("value for " + where + " must be non-negative");
    return static_cast<std::uint64_t>(out);
}

inline bool parse_bool(const std::string& v, const std::string& where) {
    const std::string t = trim(v);
    if (t == "true" || t == "1") return true;
    if (t == "false" || t == "0") return false;
    throw ConfigError("value for " + where + " must be true|false: '" + t + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> items;
    std::string cur;
    for (char c : v) {
        if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) items.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) items.push_back(cur);
    return items;
}

inline std::vector<std::vector<double>> parse_matrix(const std::string& v,
                                                     const std::string& where) {
    std::vector<std::vector<double>> rows;
    std::string row;
    std::stringstream ss(v);
    while (std::getline(ss, row, ';')) {
        std::vector<double> entries;
        for (const std::string& tok : split_list(row))
            entries.push_back(parse_double(tok, where));
        if (!entries.empty()) rows.push_back(std::move(entries));
    }
    if (rows.empty()) throw ConfigError("value for " + where + " has no rows");
    return rows;
}

}  // namespace detail

/// Strict parser for the flat sectioned config format: '#' starts a comment,
/// sections are [name], entries are key = value. Unknown sections, unknown
/// keys, duplicate keys, and malformed values are all ConfigErrors that name
/// the offender. Omitted keys keep their defaults.
inline ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    bool saw_pe = false, saw_p11 = false, saw_matrix = false, saw_kind = false;
    std::string kind = "iid";

    std::set<std::string> seen;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = detail::trim(raw);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            static const std::set<std::string> known{"system", "harq",   "energy", "method",
                                                     "rvi",    "oracle", "gr",     "pg",
                                                     "run",    "sweep"};
            if (!known.count(section))
                throw ConfigError("unknown section [" + section + "]");
            if (section == "sweep") cfg.sweep.present = true;
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        if (section.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": entry outside any section");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        const std::string where = "[" + section + "] " + key;
        if (!seen.insert(section + "." + key).second)
            throw ConfigError("duplicate key " + where);

        if (section == "system") {
            if (key == "b_max")
                cfg.system.b_max = static_cast<int>(detail::parse_int(value, where));
            else if (key == "delta_max")
                cfg.system.delta_max = static_cast<int>(detail::parse_int(value, where));
            else if (key == "e_s")
                cfg.system.e_s = static_cast<int>(detail::parse_int(value, where));
            else if (key == "e_tx")
                cfg.system.e_tx = static_cast<int>(detail::parse_int(value, where));
            else if (key == "max_states")
                cfg.kernel.max_states = static_cast<std::size_t>(detail::parse_u64(value, where));
            else
                throw ConfigError("unknown key " + where);
        } else if (section == "harq") {
            if (key == "p0")
                cfg.system.harq.p0 = detail::parse_double(value, where);
            else if (key == "lambda")
                cfg.system.harq.lambda = detail::parse_double(value, where);
            else if (key == "r_max")
                cfg.system.harq.r_max = static_cast<int>(detail::parse_int(value, where));
            else
                throw ConfigError("unknown key " + where);
        } else if (section == "energy") {
            if (key == "kind") {
                kind = value;
                saw_kind = true;
            } else if (key == "p_e") {
                cfg.energy.p_e = detail::parse_double(value, where);
                saw_pe = true;
            } else if (key == "p11") {
                cfg.energy.p11 = detail::parse_double(value, where);
                saw_p11 = true;
            } else if (key == "matrix") {
                cfg.energy.matrix = detail::parse_matrix(value, where);
                saw_matrix = true;
            } else {
                throw ConfigError("unknown key " + where);
            }
        } else if (section == "method") {
            if (key == "name")
                cfg.method = parse_method(value);
            else
                throw ConfigError("unknown key " + where);
        } else if (section == "rvi") {
            if (key == "tol")
                cfg.rvi.tol = detail::parse_double(value, where);
            else if (key == "max_iter")
                cfg.rvi.max_iter = detail::parse_u64(value, where);
            else if (key == "damping")
                cfg.rvi.damping = detail::parse_double(value, where);
            else
                throw ConfigError("unknown key " + where);
        } else if (section == "oracle") {
            if (key == "max_states")
                cfg.oracle.max_states = static_cast<std::size_t>(detail::parse_u64(value, where));
            else if (key == "enumeration_cap")
                cfg.oracle.enumeration_cap =
                    static_cast<std::size_t>(detail::parse_u64(value, where));
            else
                throw ConfigError("unknown key " + where);
        } else if (section == "gr") {
            if (key == "alpha_y")
                cfg.gr.alpha.y = detail::parse_double(value, where);
            else if (key == "alpha_z")
                cfg.gr.alpha.z = detail::parse_double(value, where);
            else if (key == "beta_y")
                cfg.gr.beta.y = detail::parse_double(value, where);
            else if (key == "beta_z")
                cfg.gr.beta.z = detail::parse_double(value, where);
            else if (key == "tau0")
                cfg.gr.tau.tau0 = detail::parse_double(value, where);
            else if (key == "tau_decay")
                cfg.gr.tau.decay = detail::parse_double(value, where);
            else if (key == "tau_floor")
                cfg.gr.tau.floor = detail::parse_double(value, where);
            else
                throw ConfigError("unknown key " + where);
        } else if (section == "pg") {
            if (key == "sigma")
                cfg.pg.pert.sigma = detail::parse_double(value, where);
            else if (key == "q")
                cfg.pg.pert.q = detail::parse_double(value, where);
            else if (key == "rollout_len")
                cfg.pg.pert.rollout_len = detail::parse_u64(value, where);
            else if (key == "rollouts_per_eval")
                cfg.pg.pert.rollouts_per_eval = detail::parse_u64(value, where);
            else if (key == "gamma_y")
                cfg.pg.gamma.y = detail::parse_double(value, where);
            else if (key == "gamma_z")
                cfg.pg.gamma.z = detail::parse_double(value, where);
            else if (key == "tau")
                cfg.pg.tau = detail::parse_double(value, where);
            else if (key == "tau_eval")
                cfg.pg.tau_eval = detail::parse_double(value, where);
            else if (key == "theta0")
                cfg.pg.theta0 = detail::parse_double(value, where);
            else if (key == "crn")
                cfg.pg.crn = detail::parse_bool(value, where);
            else if (key == "iterations")
                cfg.pg_iterations = detail::parse_u64(value, where);
            else
                throw ConfigError("unknown key " + where);
        } else if (section == "run") {
            if (key == "steps")
                cfg.run.steps = detail::parse_u64(value, where);
            else if (key == "runs")
                cfg.run.runs = static_cast<std::size_t>(detail::parse_u64(value, where));
            else if (key == "master_seed")
                cfg.run.master_seed = detail::parse_u64(value, where);
            else if (key == "record_every")
                cfg.run.record_every = detail::parse_u64(value, where);
            else if (key == "stem")
                cfg.run.stem = value;
            else
                throw ConfigError("unknown key " + where);
        } else if (section == "sweep") {
            if (key == "parameter")
                cfg.sweep.parameter = parse_sweep_parameter(value);
            else if (key == "grid") {
                cfg.sweep.grid.clear();
                for (const std::string& tok : detail::split_list(value))
                    cfg.sweep.grid.push_back(detail::parse_double(tok, where));
            } else if (key == "methods") {
                cfg.sweep.methods.clear();
                for (const std::string& tok : detail::split_list(value))
                    cfg.sweep.methods.push_back(parse_method(tok));
            } else if (key == "b_inf_approx")
                cfg.sweep.b_inf_approx = static_cast<int>(detail::parse_int(value, where));
            else if (key == "check_saturation")
                cfg.sweep.check_saturation = detail::parse_bool(value, where);
            else
                throw ConfigError("unknown key " + where);
        }
    }

    // Energy cross-field rules, then construction.
    if (saw_kind) {
        if (kind == "iid")
            cfg.energy.kind = EnergyKind::Iid;
        else if (kind == "two_state")
            cfg.energy.kind = EnergyKind::TwoState;
        else if (kind == "matrix")
            cfg.energy.kind = EnergyKind::Matrix;
        else
            throw ConfigError("unknown [energy] kind '" + kind + "' (expected iid|two_state|matrix)");
    }
    if (cfg.energy.kind != EnergyKind::Iid && saw_pe)
        throw ConfigError("[energy] p_e requires kind = iid");
    if (cfg.energy.kind != EnergyKind::TwoState && saw_p11)
        throw ConfigError("[energy] p11 requires kind = two_state");
    if (cfg.energy.kind != EnergyKind::Matrix && saw_matrix)
        throw ConfigError("[energy] matrix requires kind = matrix");
    if (cfg.energy.kind == EnergyKind::TwoState && !saw_p11)
        throw ConfigError("[energy] kind = two_state requires p11");
    if (cfg.energy.kind == EnergyKind::Matrix && !saw_matrix)
        throw ConfigError("[energy] kind = matrix requires matrix");
    cfg.system.energy = cfg.energy.build();

    // The run-level curve decimation is the single source of truth.
    cfg.gr.record_every = cfg.run.record_every;

    // Whole-config validation; user input never raises ContractError.
    try {
        cfg.system.validate();
        cfg.gr.validate();
        cfg.pg.validate();
    } catch (const ContractError& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
    if (!(cfg.rvi.tol > 0.0)) throw ConfigError("[rvi] tol must be positive");
    if (!(cfg.rvi.damping >= 0.0) || !(cfg.rvi.damping < 1.0))
        throw ConfigError("[rvi] damping must be in [0,1)");
    if (cfg.rvi.max_iter < 1) throw ConfigError("[rvi] max_iter must be >= 1");
    if (cfg.run.steps < 1) throw ConfigError("[run] steps must be >= 1");
    if (cfg.run.runs < 1) throw ConfigError("[run] runs must be >= 1");
    if (cfg.run.record_every < 1) throw ConfigError("[run] record_every must be >= 1");
    if (cfg.pg_iterations < 1) throw ConfigError("[pg] iterations must be >= 1");
    if (cfg.sweep.b_inf_approx < 1) throw ConfigError("[sweep] b_inf_approx must be >= 1");
    if (cfg.run.stem.empty()) throw ConfigError("[run] stem must not be empty");
    for (char c : cfg.run.stem)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
            throw ConfigError("[run] stem must use only letters, digits, '_', '-', '.'");
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

}  // namespace aoisched
