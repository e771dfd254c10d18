#include "volheston/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <variant>

#include "volheston/io.hpp"

namespace volheston {

namespace {

using TomlValue = std::variant<double, bool, std::string, std::vector<double>>;
using TomlTable = std::map<std::string, std::map<std::string, TomlValue>>;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

TomlValue parse_value(const std::string& raw, const std::string& where,
                      std::vector<std::string>& issues) {
    std::string v = trim(raw);
    if (v.empty()) {
        issues.push_back(where + ": empty value");
        return 0.0;
    }
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"') {
            issues.push_back(where + ": unterminated string");
            return std::string();
        }
        return v.substr(1, v.size() - 2);
    }
    if (v == "true") return true;
    if (v == "false") return false;
    if (v.front() == '[') {
        if (v.back() != ']') {
            issues.push_back(where + ": unterminated array");
            return std::vector<double>{};
        }
        std::vector<double> arr;
        std::string body = v.substr(1, v.size() - 2);
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            try {
                std::size_t pos = 0;
                arr.push_back(std::stod(item, &pos));
                if (pos != item.size()) throw std::invalid_argument(item);
            } catch (const std::exception&) {
                issues.push_back(where + ": array element '" + item + "' is not a number");
            }
        }
        return arr;
    }
    try {
        std::size_t pos = 0;
        double num = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return num;
    } catch (const std::exception&) {
        issues.push_back(where + ": value '" + v + "' is not a number");
        return 0.0;
    }
}

TomlTable parse_toml(std::istream& in, std::vector<std::string>& issues) {
    TomlTable table;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // comments start with '#' outside quotes
        bool in_quote = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_quote = !in_quote;
            if (line[i] == '#' && !in_quote) {
                line = line.substr(0, i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                issues.push_back("line " + std::to_string(lineno) + ": malformed section header");
                continue;
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            issues.push_back("line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string where = section.empty() ? key : section + "." + key;
        table[section][key] = parse_value(line.substr(eq + 1), where, issues);
    }
    return table;
}

struct Reader {
    const TomlTable& t;
    std::vector<std::string>& issues;

    bool has(const std::string& sec, const std::string& key) const {
        auto s = t.find(sec);
        return s != t.end() && s->second.count(key) > 0;
    }
    template <typename T>
    std::optional<T> get(const std::string& sec, const std::string& key) {
        auto s = t.find(sec);
        if (s == t.end()) return std::nullopt;
        auto k = s->second.find(key);
        if (k == s->second.end()) return std::nullopt;
        if (const T* v = std::get_if<T>(&k->second)) return *v;
        issues.push_back(sec + "." + key + ": wrong value type");
        return std::nullopt;
    }
    double number(const std::string& sec, const std::string& key, double fallback,
                  bool required = false) {
        auto v = get<double>(sec, key);
        if (!v && required) issues.push_back(sec + "." + key + ": missing required key");
        return v.value_or(fallback);
    }
    std::vector<double> array(const std::string& sec, const std::string& key, bool required) {
        auto v = get<std::vector<double>>(sec, key);
        if (!v && required) issues.push_back(sec + "." + key + ": missing required key");
        return v.value_or(std::vector<double>{});
    }
};

std::string format_array(const std::vector<double>& a) {
    std::string s = "[";
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (i) s += ",";
        s += format_double(a[i]);
    }
    return s + "]";
}

} // namespace

ModelParams ExperimentConfig::to_model_params() const {
    ModelParams p;
    p.d = d;
    for (int i = 0; i < d; ++i) {
        const double a = alpha[i];
        const double b = beta_kernel.empty() ? 0.0 : beta_kernel[i];
        if (a == 1.0 && b == 0.0)
            p.kernels.push_back(KernelSpec::constant());
        else if (a == 1.0)
            p.kernels.push_back(KernelSpec::exponential(b));
        else if (b == 0.0)
            p.kernels.push_back(KernelSpec::fractional(a));
        else
            p.kernels.push_back(KernelSpec::fractional_exponential(a, b));
    }
    auto to_vec = [&](const std::vector<double>& v) {
        return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<int>(v.size())).eval();
    };
    p.v0 = to_vec(v0);
    p.mu0 = to_vec(mu0);
    p.rho = to_vec(rho);
    p.theta = to_vec(theta);
    p.sigma_v = to_vec(sigma_v);
    p.varsigma = Eigen::VectorXd::Ones(d);
    p.D.resize(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) p.D(i, j) = D[static_cast<std::size_t>(i) * d + j];
    p.rate = r;
    p.jumps = JumpMeasureQuadrature::gaussian(d, jumps_enabled ? jump_intensity : 0.0, jump_kappa);
    p.validate();
    return p;
}

UtilityProblem ExperimentConfig::to_utility() const {
    const Eigen::Map<const Eigen::VectorXd> z(zeta.data(), static_cast<int>(zeta.size()));
    if (utility_kind == "exponential") return UtilityProblem::exponential(gamma, z);
    if (utility_kind == "power") return UtilityProblem::power(gamma, d);
    return UtilityProblem::log_utility(d);
}

std::string ExperimentConfig::canonical_string() const {
    std::vector<std::string> lines = {
        "grid.T=" + format_double(T),
        "grid.n=" + std::to_string(n),
        "jumps.enabled=" + std::string(jumps_enabled ? "true" : "false"),
        "jumps.intensity=" + format_double(jump_intensity),
        "jumps.kappa=" + format_double(jump_kappa),
        "mc.paths=" + std::to_string(paths),
        "mc.seed=" + std::to_string(seed),
        "model.D=" + format_array(D),
        "model.alpha=" + format_array(alpha),
        "model.beta_kernel=" + format_array(beta_kernel),
        "model.d=" + std::to_string(d),
        "model.mu0=" + format_array(mu0),
        "model.r=" + format_double(r),
        "model.rho=" + format_array(rho),
        "model.sigma_v=" + format_array(sigma_v),
        "model.theta=" + format_array(theta),
        "model.v0=" + format_array(v0),
        // output.dir is placement, not experiment identity; it stays unhashed
        "output.format=" + out_format,
        "utility.gamma=" + format_double(gamma),
        "utility.kind=" + utility_kind,
        "utility.zeta=" + format_array(zeta),
    };
    std::sort(lines.begin(), lines.end());
    std::string s;
    for (const auto& l : lines) s += l + "\n";
    return s;
}

std::string ExperimentConfig::config_hash() const { return hex64(fnv1a(canonical_string())); }

ExperimentConfig load_config(const std::string& path, const ConfigOverrides& overrides) {
    std::ifstream in(path);
    std::vector<std::string> issues;
    if (!in) throw ConfigError({"cannot open config file: " + path});
    TomlTable table = parse_toml(in, issues);
    Reader rd{table, issues};

    ExperimentConfig c;
    c.d = static_cast<int>(rd.number("model", "d", 0, true));
    c.alpha = rd.array("model", "alpha", true);
    c.beta_kernel = rd.array("model", "beta_kernel", false);
    c.v0 = rd.array("model", "v0", true);
    c.mu0 = rd.array("model", "mu0", true);
    c.D = rd.array("model", "D", true);
    c.rho = rd.array("model", "rho", true);
    c.theta = rd.array("model", "theta", true);
    c.sigma_v = rd.array("model", "sigma_v", true);
    c.r = rd.number("model", "r", 0.02);

    c.jumps_enabled = rd.get<bool>("jumps", "enabled").value_or(false);
    c.jump_intensity = rd.number("jumps", "intensity", 0.0);
    c.jump_kappa = rd.number("jumps", "kappa", 0.0);

    c.T = rd.number("grid", "T", 1.0, true);
    c.n = static_cast<int>(rd.number("grid", "n", 0, true));

    c.paths = static_cast<int>(rd.number("mc", "paths", 10000));
    c.seed = static_cast<std::uint64_t>(rd.number("mc", "seed", 1));

    c.utility_kind = rd.get<std::string>("utility", "kind").value_or("exponential");
    c.gamma = rd.number("utility", "gamma", 0.2);
    c.zeta = rd.array("utility", "zeta", false);

    c.out_dir = rd.get<std::string>("output", "dir").value_or("out");
    c.out_format = rd.get<std::string>("output", "format").value_or("csv");

    if (overrides.seed) c.seed = *overrides.seed;
    if (overrides.paths) c.paths = *overrides.paths;
    if (overrides.n) c.n = *overrides.n;
    if (overrides.utility) c.utility_kind = *overrides.utility;
    if (overrides.gamma) c.gamma = *overrides.gamma;
    if (overrides.out_dir) c.out_dir = *overrides.out_dir;

    // Field-level validation; every issue names the offending key.
    if (c.d < 1) issues.push_back("model.d: must be >= 1");
    if (c.beta_kernel.empty()) c.beta_kernel.assign(std::max(c.d, 0), 0.0);
    if (c.zeta.empty()) c.zeta.assign(std::max(c.d, 0), 0.0);
    auto check_len = [&](const std::vector<double>& v, const std::string& key, std::size_t want) {
        if (v.size() != want)
            issues.push_back(key + ": expected " + std::to_string(want) + " entries, got " +
                             std::to_string(v.size()));
    };
    if (c.d >= 1) {
        const auto dd = static_cast<std::size_t>(c.d);
        check_len(c.alpha, "model.alpha", dd);
        check_len(c.beta_kernel, "model.beta_kernel", dd);
        check_len(c.v0, "model.v0", dd);
        check_len(c.mu0, "model.mu0", dd);
        check_len(c.D, "model.D", dd * dd);
        check_len(c.rho, "model.rho", dd);
        check_len(c.theta, "model.theta", dd);
        check_len(c.sigma_v, "model.sigma_v", dd);
        check_len(c.zeta, "utility.zeta", dd);
    }
    for (std::size_t i = 0; i < c.alpha.size(); ++i)
        if (!(c.alpha[i] > 0.5 && c.alpha[i] <= 1.0))
            issues.push_back("model.alpha[" + std::to_string(i) + "] out of (1/2, 1]");
    for (std::size_t i = 0; i < c.beta_kernel.size(); ++i)
        if (c.beta_kernel[i] < 0.0)
            issues.push_back("model.beta_kernel[" + std::to_string(i) + "] must be >= 0");
    for (std::size_t i = 0; i < c.rho.size(); ++i)
        if (c.rho[i] < -1.0 || c.rho[i] > 1.0)
            issues.push_back("rho[" + std::to_string(i) + "] out of [-1,1]");
    for (std::size_t i = 0; i < c.v0.size(); ++i)
        if (c.v0[i] < 0.0) issues.push_back("model.v0[" + std::to_string(i) + "] must be >= 0");
    for (std::size_t i = 0; i < c.mu0.size(); ++i)
        if (c.mu0[i] < 0.0) issues.push_back("model.mu0[" + std::to_string(i) + "] must be >= 0");
    for (std::size_t i = 0; i < c.theta.size(); ++i)
        if (c.theta[i] < 0.0) issues.push_back("model.theta[" + std::to_string(i) + "] must be >= 0");
    for (std::size_t i = 0; i < c.sigma_v.size(); ++i)
        if (!(c.sigma_v[i] > 0.0))
            issues.push_back("model.sigma_v[" + std::to_string(i) + "] must be > 0");
    if (c.D.size() == static_cast<std::size_t>(c.d) * c.d)
        for (int i = 0; i < c.d; ++i)
            for (int j = 0; j < c.d; ++j)
                if (i != j && c.D[static_cast<std::size_t>(i) * c.d + j] < 0.0)
                    issues.push_back("model.D[" + std::to_string(i) + "," + std::to_string(j) +
                                     "] off-diagonal must be >= 0");
    if (!(c.T > 0.0)) issues.push_back("grid.T: must be > 0");
    if (c.n < 1) issues.push_back("grid.n: must be >= 1");
    if (c.paths < 1) issues.push_back("mc.paths: must be >= 1");
    if (c.jumps_enabled && c.jump_intensity < 0.0) issues.push_back("jumps.intensity: must be >= 0");
    if (c.jump_kappa < 0.0) issues.push_back("jumps.kappa: must be >= 0");
    if (c.utility_kind != "exponential" && c.utility_kind != "power" && c.utility_kind != "log")
        issues.push_back("utility.kind: must be one of exponential, power, log");
    if (c.utility_kind == "exponential") {
        if (!(c.gamma > 0.0)) issues.push_back("utility.gamma: exponential utility needs gamma > 0");
        for (std::size_t i = 0; i < c.zeta.size() && i < c.theta.size(); ++i) {
            const double cap = c.theta[i] * c.theta[i] / (2.0 * c.gamma);
            if (c.gamma > 0.0 && c.zeta[i] > cap)
                issues.push_back("utility.zeta[" + std::to_string(i) + "]=" +
                                 format_double(c.zeta[i]) + " violates zeta_i <= theta_i^2/(2 gamma)=" +
                                 format_double(cap));
        }
    } else if (c.utility_kind == "power") {
        if (!(c.gamma > 0.0 && c.gamma < 1.0))
            issues.push_back("utility.gamma: power utility needs gamma in (0,1)");
    }
    if (c.out_format != "csv" && c.out_format != "json")
        issues.push_back("output.format: must be csv or json");

    if (!issues.empty()) throw ConfigError(std::move(issues));
    return c;
}

} // namespace volheston
