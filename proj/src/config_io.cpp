#include "lifecycle/config_io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "lifecycle/errors.hpp"

namespace lifecycle {

const char* const kToolVersion = "0.3.0";

namespace {

using nlohmann::json;

const json& need(const json& j, const char* key, const char* where) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("missing key '") + key + "' in " + where);
    return j.at(key);
}

double num(const json& j, const char* key, const char* where) {
    const json& v = need(j, key, where);
    if (!v.is_number()) throw ConfigError(std::string("'") + key + "' in " + where + " must be a number");
    return v.get<double>();
}

double num_or(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
    return j.at(key).get<double>();
}

Eigen::VectorXd vec(const json& j, const char* key, const char* where) {
    const json& v = need(j, key, where);
    if (v.is_number()) return Eigen::VectorXd::Constant(1, v.get<double>());
    if (!v.is_array()) throw ConfigError(std::string("'") + key + "' in " + where + " must be an array");
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw ConfigError(std::string("'") + key + "' has a non-numeric entry");
        out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
}

// Nested rows or a flat row-major array of n*n entries.
Eigen::MatrixXd mat(const json& j, const char* key, Eigen::Index n) {
    const json& v = need(j, key, "market");
    Eigen::MatrixXd out(n, n);
    if (v.is_number() && n == 1) {
        out(0, 0) = v.get<double>();
        return out;
    }
    if (!v.is_array()) throw ConfigError("'sigma' must be an array");
    const bool nested = !v.empty() && v[0].is_array();
    if (nested) {
        if (static_cast<Eigen::Index>(v.size()) != n) throw ConfigError("'sigma' must have one row per asset");
        for (Eigen::Index r = 0; r < n; ++r) {
            const json& row = v[static_cast<std::size_t>(r)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
                throw ConfigError("'sigma' rows must have one entry per asset");
            for (Eigen::Index c = 0; c < n; ++c) out(r, c) = row[static_cast<std::size_t>(c)].get<double>();
        }
    } else {
        if (static_cast<Eigen::Index>(v.size()) != n * n) throw ConfigError("flat 'sigma' must have n*n entries");
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c < n; ++c) out(r, c) = v[static_cast<std::size_t>(r * n + c)].get<double>();
    }
    return out;
}

DelayKernel kernel(const json& j, double d, const std::filesystem::path& base) {
    if (j.is_number()) {
        const double level = j.get<double>();
        return level == 0.0 ? DelayKernel::zero() : DelayKernel::constant(level);
    }
    const std::string kind = need(j, "kind", "income.phi").get<std::string>();
    if (kind == "zero") return DelayKernel::zero();
    if (kind == "constant") return DelayKernel::constant(num(j, "level", "income.phi"));
    if (kind == "bump")
        return DelayKernel::bump(num(j, "center", "income.phi"), num(j, "mass", "income.phi"), num_or(j, "width", 0.0));
    if (kind == "samples") {
        if (j.contains("values")) {
            std::vector<double> v;
            for (const auto& x : j.at("values")) v.push_back(x.get<double>());
            return DelayKernel::samples(std::move(v));
        }
        if (j.contains("csv")) {
            std::filesystem::path p = j.at("csv").get<std::string>();
            if (p.is_relative()) p = base / p;
            return DelayKernel::samples(read_kernel_csv(p, d));
        }
        throw ConfigError("samples kernel needs 'values' or 'csv'");
    }
    throw ConfigError("unknown kernel kind '" + kind + "'");
}

std::vector<std::vector<double>> read_numeric_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (rows.empty()) continue;  // header row
            throw ConfigError("non-numeric row in " + path.string() + ": " + line);
        }
        if (!row.empty()) rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::vector<double> read_kernel_csv(const std::filesystem::path& path, double d) {
    const auto rows = read_numeric_rows(path);
    if (rows.size() < 2) throw ConfigError("kernel CSV needs at least two rows");
    std::vector<double> values;
    const double step = d / static_cast<double>(rows.size() - 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != 2) throw ConfigError("kernel CSV rows must be (zeta, phi)");
        const double expected = -d + static_cast<double>(i) * step;
        if (std::abs(rows[i][0] - expected) > 1e-9 * std::max(1.0, d))
            throw ConfigError("kernel CSV must be a uniform grid from -d to 0");
        values.push_back(rows[i][1]);
    }
    return values;
}

std::vector<double> read_history_csv(const std::filesystem::path& path) {
    const auto rows = read_numeric_rows(path);
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r.back());
    return out;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

LoadedConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    try {
        const json& jm = need(j, "market", "config");
        MarketParams m;
        m.r = num(jm, "r", "market");
        m.mu = vec(jm, "mu", "market");
        m.sigma = mat(jm, "sigma", m.mu.size());
        m.delta = num_or(jm, "delta", 0.0);

        const json& ji = need(j, "income", "config");
        IncomeParams inc;
        inc.mu_y = num(ji, "mu_y", "income");
        inc.sigma_y = vec(ji, "sigma_y", "income");
        inc.d = num(ji, "d", "income");
        inc.tau_R = num(ji, "tau_R", "income");
        inc.phi = ji.contains("phi") ? kernel(ji.at("phi"), inc.d, base_dir) : DelayKernel::zero();

        const json& jp = need(j, "preferences", "config");
        PreferenceParams p;
        p.gamma = num(jp, "gamma", "preferences");
        p.rho = num(jp, "rho", "preferences");
        p.k = num_or(jp, "k", 1.0);
        p.K = num_or(jp, "K", 1.0);

        LoadedConfig out{ModelConfig::create(std::move(m), std::move(inc), p), "", {}, fnv1a_hex(text), std::nullopt,
                         1.0, 1.0};
        if (j.contains("label")) out.label = j.at("label").get<std::string>();
        if (j.contains("grid") && j.at("grid").contains("dt")) out.dt = j.at("grid").at("dt").get<double>();
        if (j.contains("initial")) {
            out.w0 = num_or(j.at("initial"), "w0", 1.0);
            out.y0 = num_or(j.at("initial"), "y0", 1.0);
        }
        return out;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
}

LoadedConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    LoadedConfig out = parse_config(ss.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
    out.path = path;
    return out;
}

std::string RunManifest::to_json() const {
    json j;
    j["config_path"] = config_path;
    j["config_hash"] = config_hash;
    j["subcommand"] = subcommand;
    j["seed"] = seed;
    j["n_t"] = n_t;
    j["n_z"] = n_z;
    j["outputs"] = outputs;
    j["tool_version"] = tool_version;
    return j.dump();
}

std::string RunManifest::hash() const { return fnv1a_hex(to_json()); }

std::vector<std::string> RunManifest::comment_lines() const {
    return {"manifest " + hash(), "manifest_json " + to_json()};
}

}  // namespace lifecycle
