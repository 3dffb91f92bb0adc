#include "jdc/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "jdc/errors.hpp"

namespace jdc {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    std::size_t pos = 0;
    try {
        out = std::stod(s, &pos);
    } catch (...) {
        return false;
    }
    return pos == s.size();
}

}  // namespace

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

IniFile IniFile::parse(const std::string& text, const std::string& source) {
    IniFile ini;
    ini.source_ = source;
    std::istringstream is(text);
    std::string line, section;
    int n = 0;
    while (std::getline(is, line)) {
        ++n;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw Error(ErrorCode::ConfigError, source + ":" + std::to_string(n) + ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw Error(ErrorCode::ConfigError, source + ":" + std::to_string(n) + ": empty section name");
            ini.data_[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::ConfigError, source + ":" + std::to_string(n) + ": expected 'key = value'");
        if (section.empty())
            throw Error(ErrorCode::ConfigError, source + ":" + std::to_string(n) + ": key outside any section");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw Error(ErrorCode::ConfigError, source + ":" + std::to_string(n) + ": empty key");
        auto& sec = ini.data_[section];
        if (sec.count(key))
            throw Error(ErrorCode::ConfigError,
                        source + ":" + std::to_string(n) + ": duplicate key '" + key + "' in [" + section + "]");
        sec[key] = {trim(line.substr(eq + 1)), n};
    }
    return ini;
}

IniFile IniFile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open config file '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return parse(os.str(), path);
}

void IniFile::fail(const std::string& section, const std::string& key, const std::string& msg) const {
    std::ostringstream os;
    os << source_;
    auto s = data_.find(section);
    if (s != data_.end()) {
        auto k = s->second.find(key);
        if (k != s->second.end()) os << ":" << k->second.line;
    }
    os << ": [" << section << "] " << key << ": " << msg;
    throw Error(ErrorCode::ConfigError, os.str());
}

bool IniFile::has(const std::string& section, const std::string& key) const {
    auto s = data_.find(section);
    return s != data_.end() && s->second.count(key) > 0;
}

std::string IniFile::get(const std::string& section, const std::string& key) const {
    if (!has(section, key)) fail(section, key, "missing required field");
    return data_.at(section).at(key).value;
}

std::string IniFile::get_or(const std::string& section, const std::string& key, const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

double IniFile::number(const std::string& section, const std::string& key) const {
    double v;
    if (!parse_double(get(section, key), v)) fail(section, key, "not a number: '" + get(section, key) + "'");
    return v;
}

double IniFile::number_or(const std::string& section, const std::string& key, double fallback) const {
    return has(section, key) ? number(section, key) : fallback;
}

std::int64_t IniFile::integer(const std::string& section, const std::string& key) const {
    const std::string s = get(section, key);
    std::size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &pos);
    } catch (...) {
        pos = 0;
    }
    if (s.empty() || pos != s.size()) fail(section, key, "not an integer: '" + s + "'");
    return v;
}

std::int64_t IniFile::integer_or(const std::string& section, const std::string& key, std::int64_t fallback) const {
    return has(section, key) ? integer(section, key) : fallback;
}

std::vector<double> IniFile::numbers(const std::string& section, const std::string& key) const {
    std::vector<double> out;
    for (const auto& part : split(get(section, key), ',')) {
        double v;
        if (!parse_double(part, v)) fail(section, key, "not a number list: '" + get(section, key) + "'");
        out.push_back(v);
    }
    return out;
}

void IniFile::set(const std::string& section, const std::string& key, const std::string& value) {
    data_[section][key] = {value, 0};
}

void IniFile::check_schema(const std::map<std::string, std::vector<std::string>>& schema) const {
    for (const auto& [sec, keys] : data_) {
        auto it = schema.find(sec);
        if (it == schema.end()) throw Error(ErrorCode::ConfigError, source_ + ": unknown section [" + sec + "]");
        for (const auto& [key, entry] : keys) {
            if (std::find(it->second.begin(), it->second.end(), key) == it->second.end()) {
                fail(sec, key, "unknown field");
            }
        }
    }
}

std::string IniFile::canonical(const std::vector<std::string>& skip_sections) const {
    std::ostringstream os;
    for (const auto& [sec, keys] : data_) {
        if (std::find(skip_sections.begin(), skip_sections.end(), sec) != skip_sections.end()) continue;
        for (const auto& [key, entry] : keys) os << sec << "." << key << "=" << entry.value << "\n";
    }
    return os.str();
}

Curvature parse_kappa(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string name = trim(spec.substr(0, colon));
    std::vector<double> args;
    if (colon != std::string::npos) {
        for (const auto& p : split(spec.substr(colon + 1), ',')) {
            double v;
            if (!parse_double(p, v)) throw Error(ErrorCode::ConfigError, "kappa: bad number '" + p + "'");
            args.push_back(v);
        }
    }
    if (name == "constant" && args.size() == 1) {
        const double k = args[0];
        return [k](double) { return k; };
    }
    if (name == "piecewise" && args.size() == 3) return piecewise_kappa(args[0], args[1], args[2]);
    throw Error(ErrorCode::ConfigError, "kappa: expected 'constant:K' or 'piecewise:L,R,K', got '" + spec + "'");
}

namespace {

const std::map<std::string, std::vector<std::string>>& schema() {
    static const std::map<std::string, std::vector<std::string>> s = {
        {"model", {"dim", "drift", "K", "a", "beta", "omega", "L", "R", "Kpos", "kappa"}},
        {"diffusion", {"sigma1", "sigma", "sigma_inf"}},
        {"levy", {"family", "alpha", "scale", "rate", "upper", "mass", "width", "density", "radius", "csv",
                  "cutoff", "max_intensity"}},
        {"jump", {"g", "a", "marks", "weights", "density_lo", "density_hi", "density_mass"}},
        {"scheme", {"variant", "delta", "couple_threshold"}},
        {"run", {"T", "dt", "n_paths", "seed", "workers", "x0", "y0", "burn_in", "record_every"}},
        {"outputs", {"directory", "formats"}},
        {"certify", {"kind", "scan"}},
        {"contract", {"t_lo", "t_hi", "functional"}},
        {"transport", {"T", "lambdas", "r_grid", "n_block", "n_samples"}},
        {"malliavin", {"mode", "t", "horizons", "u", "h", "eps", "f"}},
    };
    return s;
}

RadialLevyMeasure build_levy(const IniFile& ini, int dim) {
    const std::string fam = ini.get("levy", "family");
    const double cutoff = ini.number_or("levy", "cutoff", 0.0);
    const double max_int = ini.number_or("levy", "max_intensity", 1e3);
    try {
        if (fam == "stable")
            return RadialLevyMeasure::stable(ini.number("levy", "alpha"), ini.number_or("levy", "scale", 1.0), dim,
                                             cutoff, max_int);
        if (fam == "tempered_stable")
            return RadialLevyMeasure::tempered_stable(ini.number("levy", "alpha"), ini.number_or("levy", "scale", 1.0),
                                                      ini.number("levy", "rate"), dim, cutoff, max_int);
        if (fam == "truncated_stable")
            return RadialLevyMeasure::truncated_stable(ini.number("levy", "alpha"),
                                                       ini.number_or("levy", "scale", 1.0),
                                                       ini.number("levy", "upper"), dim, cutoff, max_int);
        if (fam == "gaussian")
            return RadialLevyMeasure::gaussian(ini.number("levy", "mass"), ini.number("levy", "width"), dim, cutoff);
        if (fam == "uniform_ball")
            return RadialLevyMeasure::uniform_ball(ini.number("levy", "density"), ini.number("levy", "radius"), dim,
                                                   cutoff);
        if (fam == "tabulated") {
            const std::string path = ini.get("levy", "csv");
            std::ifstream in(path);
            if (!in) throw Error(ErrorCode::ConfigError, "[levy] csv: cannot open '" + path + "'");
            std::vector<double> rs, qs;
            std::string line;
            int n = 0;
            while (std::getline(in, line)) {
                ++n;
                line = trim(line);
                if (line.empty() || line[0] == '#') continue;
                const auto parts = split(line, ',');
                double r, q;
                if (parts.size() != 2 || !parse_double(parts[0], r) || !parse_double(parts[1], q)) {
                    if (n == 1) continue;  // header row
                    throw Error(ErrorCode::ConfigError, path + ":" + std::to_string(n) + ": expected 'r,q'");
                }
                rs.push_back(r);
                qs.push_back(q);
            }
            return RadialLevyMeasure::tabulated(rs, qs, dim, cutoff, max_int);
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        throw Error(ErrorCode::ConfigError, std::string("[levy] ") + e.what());
    }
    throw Error(ErrorCode::ConfigError, ini.source() + ": [levy] family: unknown family '" + fam + "'");
}

JumpCoeffSpec build_jump(const IniFile& ini, int dim) {
    const std::string g = ini.get_or("jump", "g", "additive");
    if (g != "additive") throw Error(ErrorCode::ConfigError, ini.source() + ": [jump] g: only 'additive' is built in");
    const double a = ini.number("jump", "a");
    JumpCoeffSpec j;
    j.g = [a, dim](std::span<const double>, std::span<const double> u, std::span<double> out) {
        for (int i = 0; i < dim; ++i) out[i] = a * u[0];
    };
    const double scale = a * std::sqrt(static_cast<double>(dim));
    j.g_inf = [scale](std::span<const double> u) { return scale * std::abs(u[0]); };
    if (ini.has("jump", "marks")) {
        const auto marks = ini.numbers("jump", "marks");
        const auto w = ini.numbers("jump", "weights");
        if (marks.size() != w.size()) throw Error(ErrorCode::ConfigError, ini.source() + ": [jump] weights: size differs from marks");
        std::vector<std::vector<double>> pts;
        for (double m : marks) pts.push_back({m});
        j.intensity = MarkMeasure::atoms(pts, w);
    } else {
        const double lo = ini.number("jump", "density_lo"), hi = ini.number("jump", "density_hi");
        const double mass = ini.number_or("jump", "density_mass", 1.0);
        if (!(hi > lo)) throw Error(ErrorCode::ConfigError, ini.source() + ": [jump] density_hi must exceed density_lo");
        const double dens = mass / (hi - lo);
        j.intensity = MarkMeasure::density_1d([dens](double) { return dens; }, lo, hi);
    }
    return j;
}

}  // namespace

ModelSpec build_model(const IniFile& ini) {
    ModelSpec m;
    m.dim = static_cast<int>(ini.integer_or("model", "dim", 1));
    if (m.dim < 1) throw Error(ErrorCode::ConfigError, ini.source() + ": [model] dim must be >= 1");
    const std::string drift = ini.get("model", "drift");
    if (drift == "linear") {
        m.drift = linear_drift(ini.number_or("model", "K", 1.0));
    } else if (drift == "double_well") {
        if (!ini.has("model", "kappa"))
            throw Error(ErrorCode::ConfigError, ini.source() + ": [model] kappa: required for the double-well drift");
        m.drift = double_well_drift(parse_kappa(ini.get("model", "kappa")));
    } else if (drift == "piecewise") {
        m.drift = piecewise_drift(ini.number("model", "a"), ini.number("model", "beta"), ini.number("model", "omega"),
                                  ini.number("model", "L"), ini.number("model", "R"), ini.number("model", "Kpos"));
    } else {
        throw Error(ErrorCode::ConfigError, ini.source() + ": [model] drift: unknown drift '" + drift + "'");
    }
    if (ini.has("model", "kappa")) m.drift.kappa = parse_kappa(ini.get("model", "kappa"));

    if (ini.has("diffusion", "sigma1")) {
        const auto v = ini.numbers("diffusion", "sigma1");
        const std::size_t d = static_cast<std::size_t>(m.dim);
        if (v.size() == 1) {
            m.diffusion.sigma1 = v[0] * Mat::Identity(m.dim, m.dim);
        } else if (v.size() == d * d) {
            m.diffusion.sigma1 = Mat(m.dim, m.dim);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t k = 0; k < d; ++k) m.diffusion.sigma1(i, k) = v[i * d + k];
        } else {
            throw Error(ErrorCode::ConfigError, ini.source() + ": [diffusion] sigma1: expected 1 or dim^2 values");
        }
    }
    if (ini.has("diffusion", "sigma")) {
        const std::string s = ini.get("diffusion", "sigma");
        double v;
        if (s.rfind("constant:", 0) != 0 || !parse_double(trim(s.substr(9)), v))
            throw Error(ErrorCode::ConfigError, ini.source() + ": [diffusion] sigma: expected 'constant:v'");
        const int d = m.dim;
        m.diffusion.sigma = [v, d](std::span<const double>) -> Mat { return v * Mat::Identity(d, d); };
        m.diffusion.sigma_inf = ini.number_or("diffusion", "sigma_inf", std::abs(v));
    } else {
        m.diffusion.sigma_inf = ini.number_or("diffusion", "sigma_inf", 0.0);
    }
    if (ini.has_section("levy")) m.levy = build_levy(ini, m.dim);
    if (ini.has_section("jump")) m.jump = build_jump(ini, m.dim);
    if (!m.has_noise()) throw Error(ErrorCode::ConfigError, ini.source() + ": model has no noise source");
    return m;
}

ExperimentConfig build_config(const IniFile& ini_in, const Overrides& ov) {
    ExperimentConfig cfg;
    cfg.ini = ini_in;
    IniFile& ini = cfg.ini;
    ini.check_schema(schema());
    if (ov.seed) ini.set("run", "seed", std::to_string(*ov.seed));
    if (!ini.has("run", "seed"))
        throw Error(ErrorCode::ConfigError, ini.source() + ": [run] seed: missing required field (or pass --seed)");
    cfg.model = build_model(ini);
    cfg.scheme.variant = scheme_from_string(ini.get_or("scheme", "variant", "synchronous"));
    cfg.scheme.mixed_delta = ini.number_or("scheme", "delta", 0.0);
    cfg.scheme.couple_threshold = ini.number_or("scheme", "couple_threshold", 0.0);

    auto& r = cfg.run;
    r.T = ini.number_or("run", "T", 1.0);
    r.dt = ini.number_or("run", "dt", 1e-3);
    if (!(r.dt > 0.0) || !(r.T >= 0.0)) throw Error(ErrorCode::ConfigError, ini.source() + ": [run] need dt > 0, T >= 0");
    const std::int64_t np = ini.integer_or("run", "n_paths", 1000);
    if (np < 1) throw Error(ErrorCode::ConfigError, ini.source() + ": [run] n_paths must be >= 1");
    r.n_paths = static_cast<std::size_t>(np);
    const std::string seed = ini.get("run", "seed");
    try {
        std::size_t pos = 0;
        r.seed = std::stoull(seed, &pos);
        if (pos != seed.size()) throw std::invalid_argument("trailing");
    } catch (...) {
        throw Error(ErrorCode::ConfigError, ini.source() + ": [run] seed: not an unsigned integer: '" + seed + "'");
    }
    r.workers = static_cast<int>(ini.integer_or("run", "workers", 0));
    if (ov.workers) r.workers = *ov.workers;
    r.x0 = ini.has("run", "x0") ? ini.numbers("run", "x0") : std::vector<double>(cfg.model.dim, 1.0);
    r.y0 = ini.has("run", "y0") ? ini.numbers("run", "y0") : std::vector<double>(cfg.model.dim, 0.0);
    if (static_cast<int>(r.x0.size()) != cfg.model.dim || static_cast<int>(r.y0.size()) != cfg.model.dim)
        throw Error(ErrorCode::ConfigError, ini.source() + ": [run] x0/y0 must have dim entries");
    r.burn_in = ini.number_or("run", "burn_in", 0.0);
    const std::int64_t every = ini.integer_or("run", "record_every", 100);
    if (every < 1) throw Error(ErrorCode::ConfigError, ini.source() + ": [run] record_every must be >= 1");
    r.record_every = static_cast<std::size_t>(every);

    cfg.out_dir = ov.out_dir ? *ov.out_dir : ini.get_or("outputs", "directory", "out");
    if (ini.has("outputs", "formats")) {
        cfg.formats.clear();
        for (const auto& f : split(ini.get("outputs", "formats"), ',')) {
            if (f != "csv" && f != "json")
                throw Error(ErrorCode::ConfigError, ini.source() + ": [outputs] formats: unknown format '" + f + "'");
            cfg.formats.push_back(f);
        }
    }
    return cfg;
}

}  // namespace jdc
