#pragma once

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "acbdf2/adaptive.hpp"
#include "acbdf2/experiments.hpp"
#include "acbdf2/stepper.hpp"

namespace acbdf2 {

enum class Scheme { uniform, adaptive, random_mesh };
enum class InitKind { four_bubble, coarsening, mms, file, constant };
enum class Policy { enforce, warn, off };

struct ConstraintPolicy {
    Policy s0 = Policy::warn;
    Policy s1 = Policy::warn;
    Policy energy_law = Policy::warn;
    Policy max_principle = Policy::warn;
};

/// Complete description of one run.
struct RunConfig {
    struct Domain {
        double L = 1.0;
        double origin = 0.0;
        std::size_t M = 128;
        double eps = 0.01;
    } domain;

    struct Time {
        double T = 1.0;
        Scheme scheme = Scheme::uniform;
        double tau = 0.01;         // uniform scheme
        std::size_t N = 10;        // random-mesh scheme
        std::uint64_t seed = 1;    // random-mesh scheme
        std::optional<double> tau_init;  // adaptive scheme; defaults to adaptive.tau_min
    } time;

    AdaptiveConfig adaptive;

    struct Init {
        InitKind kind = InitKind::coarsening;
        double base = 0.0;
        double amp = 0.05;
        double value = 0.0;
        std::uint64_t seed = 1;
        std::string file;
    } init;

    /// Manufactured source (only with init.kind = mms).
    MmsSource mms_source = MmsSource::continuous;

    NewtonConfig newton;
    ConstraintPolicy constraints;
    /// Maximum ratio used to pick eta for the max-principle check; derived from the scheme when empty.
    std::optional<double> eta_ratio;

    struct Output {
        std::string dir;
        std::vector<double> snapshot_times;
        bool csv = true;
    } output;
};

struct ConfigIssue {
    std::size_t line = 0;  // 0 for command-line overrides and whole-document checks
    std::string message;
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<ConfigIssue> issues)
        : std::runtime_error(format(issues)), issues_(std::move(issues)) {}

    const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

private:
    static std::string format(const std::vector<ConfigIssue>& issues) {
        std::ostringstream os;
        os << issues.size() << " configuration error(s)";
        for (const auto& i : issues) {
            os << "\n  ";
            if (i.line) os << "line " << i.line << ": ";
            os << i.message;
        }
        return os.str();
    }

    std::vector<ConfigIssue> issues_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(std::string_view s) {
    std::string tmp(s);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(tmp.c_str(), &end);
    if (tmp.empty() || end != tmp.c_str() + tmp.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
    return v;
}

template <class Int>
std::optional<Int> parse_int(std::string_view s) {
    Int v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<bool> parse_bool(std::string_view s) {
    if (s == "true" || s == "on" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "off" || s == "no" || s == "0") return false;
    return std::nullopt;
}

inline std::optional<Policy> parse_policy(std::string_view s) {
    if (s == "enforce") return Policy::enforce;
    if (s == "warn") return Policy::warn;
    if (s == "off") return Policy::off;
    return std::nullopt;
}

/// Applies one key to the config; returns an error message or empty.
using Setter = std::function<std::string(RunConfig&, std::string_view)>;

template <class Get>
Setter real_setter(Get get) {
    return [get](RunConfig& c, std::string_view v) -> std::string {
        auto d = parse_double(v);
        if (!d) return "expected a real number, got '" + std::string(v) + "'";
        get(c) = *d;
        return {};
    };
}

template <class Int, class Get>
Setter int_setter(Get get) {
    return [get](RunConfig& c, std::string_view v) -> std::string {
        auto d = parse_int<Int>(v);
        if (!d) return "expected a nonnegative integer, got '" + std::string(v) + "'";
        get(c) = *d;
        return {};
    };
}

template <class Get>
Setter policy_setter(Get get) {
    return [get](RunConfig& c, std::string_view v) -> std::string {
        auto p = parse_policy(v);
        if (!p) return "expected enforce|warn|off, got '" + std::string(v) + "'";
        get(c) = *p;
        return {};
    };
}

inline const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table = {
        {"domain.L", real_setter([](RunConfig& c) -> double& { return c.domain.L; })},
        {"domain.origin", real_setter([](RunConfig& c) -> double& { return c.domain.origin; })},
        {"domain.M", int_setter<std::size_t>([](RunConfig& c) -> std::size_t& { return c.domain.M; })},
        {"domain.eps", real_setter([](RunConfig& c) -> double& { return c.domain.eps; })},

        {"time.T", real_setter([](RunConfig& c) -> double& { return c.time.T; })},
        {"time.tau", real_setter([](RunConfig& c) -> double& { return c.time.tau; })},
        {"time.N", int_setter<std::size_t>([](RunConfig& c) -> std::size_t& { return c.time.N; })},
        {"time.seed", int_setter<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.time.seed; })},
        {"time.scheme",
         [](RunConfig& c, std::string_view v) -> std::string {
             if (v == "uniform") c.time.scheme = Scheme::uniform;
             else if (v == "adaptive") c.time.scheme = Scheme::adaptive;
             else if (v == "random-mesh") c.time.scheme = Scheme::random_mesh;
             else return "expected uniform|adaptive|random-mesh, got '" + std::string(v) + "'";
             return {};
         }},
        {"time.tau_init",
         [](RunConfig& c, std::string_view v) -> std::string {
             auto d = parse_double(v);
             if (!d) return "expected a real number, got '" + std::string(v) + "'";
             c.time.tau_init = *d;
             return {};
         }},

        {"adaptive.rho", real_setter([](RunConfig& c) -> double& { return c.adaptive.rho; })},
        {"adaptive.tol", real_setter([](RunConfig& c) -> double& { return c.adaptive.tol; })},
        {"adaptive.tau_max", real_setter([](RunConfig& c) -> double& { return c.adaptive.tau_max; })},
        {"adaptive.tau_min", real_setter([](RunConfig& c) -> double& { return c.adaptive.tau_min; })},
        {"adaptive.max_rejects", int_setter<int>([](RunConfig& c) -> int& { return c.adaptive.max_rejects; })},
        {"adaptive.ratio_cap",
         [](RunConfig& c, std::string_view v) -> std::string {
             if (v == "off" || v == "none") {
                 c.adaptive.ratio_cap.reset();
                 return {};
             }
             auto d = parse_double(v);
             if (!d) return "expected a real number or 'off', got '" + std::string(v) + "'";
             c.adaptive.ratio_cap = *d;
             return {};
         }},
        {"adaptive.norm",
         [](RunConfig& c, std::string_view v) -> std::string {
             if (v == "l2") c.adaptive.norm = ErrorNorm::l2;
             else if (v == "max") c.adaptive.norm = ErrorNorm::max;
             else return "expected l2|max, got '" + std::string(v) + "'";
             return {};
         }},

        {"init.kind",
         [](RunConfig& c, std::string_view v) -> std::string {
             if (v == "four_bubble") c.init.kind = InitKind::four_bubble;
             else if (v == "coarsening") c.init.kind = InitKind::coarsening;
             else if (v == "mms") c.init.kind = InitKind::mms;
             else if (v == "file") c.init.kind = InitKind::file;
             else if (v == "constant") c.init.kind = InitKind::constant;
             else return "expected four_bubble|coarsening|mms|file|constant, got '" + std::string(v) + "'";
             return {};
         }},
        {"init.base", real_setter([](RunConfig& c) -> double& { return c.init.base; })},
        {"init.amp", real_setter([](RunConfig& c) -> double& { return c.init.amp; })},
        {"init.value", real_setter([](RunConfig& c) -> double& { return c.init.value; })},
        {"init.seed", int_setter<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.init.seed; })},
        {"init.file",
         [](RunConfig& c, std::string_view v) -> std::string {
             c.init.file = std::string(v);
             return {};
         }},
        {"init.mms_source",
         [](RunConfig& c, std::string_view v) -> std::string {
             if (v == "continuous") c.mms_source = MmsSource::continuous;
             else if (v == "grid") c.mms_source = MmsSource::grid_consistent;
             else return "expected continuous|grid, got '" + std::string(v) + "'";
             return {};
         }},

        {"newton.tol", real_setter([](RunConfig& c) -> double& { return c.newton.tolerance; })},
        {"newton.max_iter", int_setter<int>([](RunConfig& c) -> int& { return c.newton.max_iterations; })},
        {"newton.linear_tol", real_setter([](RunConfig& c) -> double& { return c.newton.linear_tolerance; })},
        {"newton.linear_max_iter",
         int_setter<int>([](RunConfig& c) -> int& { return c.newton.max_linear_iterations; })},

        {"constraints.s0", policy_setter([](RunConfig& c) -> Policy& { return c.constraints.s0; })},
        {"constraints.s1", policy_setter([](RunConfig& c) -> Policy& { return c.constraints.s1; })},
        {"constraints.energy_law", policy_setter([](RunConfig& c) -> Policy& { return c.constraints.energy_law; })},
        {"constraints.max_principle",
         policy_setter([](RunConfig& c) -> Policy& { return c.constraints.max_principle; })},
        {"constraints.eta_ratio",
         [](RunConfig& c, std::string_view v) -> std::string {
             auto d = parse_double(v);
             if (!d) return "expected a real number, got '" + std::string(v) + "'";
             c.eta_ratio = *d;
             return {};
         }},

        {"output.dir",
         [](RunConfig& c, std::string_view v) -> std::string {
             c.output.dir = std::string(v);
             return {};
         }},
        {"output.csv",
         [](RunConfig& c, std::string_view v) -> std::string {
             auto b = parse_bool(v);
             if (!b) return "expected true|false, got '" + std::string(v) + "'";
             c.output.csv = *b;
             return {};
         }},
        {"output.snapshot_times",
         [](RunConfig& c, std::string_view v) -> std::string {
             c.output.snapshot_times.clear();
             std::string_view rest = v;
             while (!rest.empty()) {
                 const auto comma = rest.find(',');
                 const std::string_view item = trim(rest.substr(0, comma));
                 if (!item.empty()) {
                     auto d = parse_double(item);
                     if (!d) return "expected a comma-separated list of times, got '" + std::string(item) + "'";
                     c.output.snapshot_times.push_back(*d);
                 }
                 if (comma == std::string_view::npos) break;
                 rest = rest.substr(comma + 1);
             }
             std::sort(c.output.snapshot_times.begin(), c.output.snapshot_times.end());
             return {};
         }},
    };
    return table;
}

inline void validate(const RunConfig& c, const std::set<std::string>& explicit_keys, std::vector<ConfigIssue>& out) {
    auto bad = [&](std::string msg) { out.push_back({0, std::move(msg)}); };
    if (!(c.domain.L > 0.0)) bad("domain.L must be positive");
    if (c.domain.M < 2) bad("domain.M must be at least 2");
    if (!(c.domain.eps > 0.0)) bad("domain.eps must be positive");
    if (!(c.time.T > 0.0)) bad("time.T must be positive");
    if (c.time.scheme == Scheme::uniform && !(c.time.tau > 0.0)) bad("time.tau must be positive");
    if (c.time.scheme == Scheme::random_mesh && c.time.N < 1) bad("time.N must be at least 1");
    if (c.time.tau_init && !(*c.time.tau_init > 0.0)) bad("time.tau_init must be positive");
    if (!(c.adaptive.rho > 0.0 && c.adaptive.rho <= 1.0)) bad("adaptive.rho must lie in (0, 1]");
    if (!(c.adaptive.tol > 0.0)) bad("adaptive.tol must be positive");
    if (!(c.adaptive.tau_min > 0.0)) bad("adaptive.tau_min must be positive");
    if (!(c.adaptive.tau_max > 0.0)) bad("adaptive.tau_max must be positive");
    if (c.adaptive.tau_min > c.adaptive.tau_max) bad("adaptive.tau_min exceeds adaptive.tau_max");
    if (c.adaptive.ratio_cap && !(*c.adaptive.ratio_cap >= 1.0)) bad("adaptive.ratio_cap must be at least 1");
    if (c.adaptive.max_rejects < 0) bad("adaptive.max_rejects must be nonnegative");
    if (!(c.newton.tolerance >= std::numeric_limits<double>::epsilon()))
        bad("newton.tol must be at least machine precision");
    if (c.newton.max_iterations <= 0) bad("newton.max_iter must be positive");
    if (!(c.newton.linear_tolerance > 0.0)) bad("newton.linear_tol must be positive");
    if (c.newton.max_linear_iterations <= 0) bad("newton.linear_max_iter must be positive");
    if (c.init.kind == InitKind::file && c.init.file.empty()) bad("init.file is required with init.kind = file");
    if (!(c.init.amp >= 0.0)) bad("init.amp must be nonnegative");
    if (c.eta_ratio && !(*c.eta_ratio >= 1.0 && *c.eta_ratio < kRatioLimitS0))
        bad("constraints.eta_ratio must lie in [1, 1+sqrt(2))");
    for (double ts : c.output.snapshot_times)
        if (ts < 0.0 || ts > c.time.T) bad("snapshot time " + std::to_string(ts) + " outside [0, T]");
    if (c.init.kind == InitKind::mms) {
        if (explicit_keys.count("domain.L") && c.domain.L != MmsProblem::L) bad("mms problem requires domain.L = 1");
        if (c.domain.origin != 0.0) bad("mms problem requires domain.origin = 0");
    }
}

}  // namespace detail

/// Parses `section.key = value` lines ('#' starts a comment). Each override
/// "key=value" is applied after the document. Throws ConfigError listing
/// every problem found.
inline RunConfig parse_config(std::string_view text, const std::vector<std::string>& overrides = {}) {
    RunConfig cfg;
    std::vector<ConfigIssue> issues;
    std::set<std::string> explicit_keys;

    auto apply = [&](std::size_t lineno, std::string_view line) {
        const auto hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) return;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            issues.push_back({lineno, "expected 'section.key = value'"});
            return;
        }
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string_view value = detail::trim(line.substr(eq + 1));
        const auto& table = detail::setters();
        auto it = table.find(key);
        if (it == table.end()) {
            issues.push_back({lineno, "unknown key '" + key + "'"});
            return;
        }
        if (value.empty()) {
            issues.push_back({lineno, "missing value for '" + key + "'"});
            return;
        }
        if (std::string err = it->second(cfg, value); !err.empty()) {
            issues.push_back({lineno, key + ": " + err});
            return;
        }
        explicit_keys.insert(key);
    };

    std::size_t lineno = 0;
    std::string_view rest = text;
    while (!rest.empty()) {
        ++lineno;
        const auto nl = rest.find('\n');
        apply(lineno, rest.substr(0, nl));
        if (nl == std::string_view::npos) break;
        rest = rest.substr(nl + 1);
    }
    for (const std::string& o : overrides) apply(0, o);

    // The manufactured problem fixes its own diffusion unless set explicitly.
    if (cfg.init.kind == InitKind::mms && !explicit_keys.count("domain.eps")) cfg.domain.eps = MmsProblem::eps();

    detail::validate(cfg, explicit_keys, issues);
    if (!issues.empty()) throw ConfigError(std::move(issues));
    return cfg;
}

}  // namespace acbdf2
