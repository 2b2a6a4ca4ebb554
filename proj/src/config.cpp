#include "fieldsel/config.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "fieldsel/errors.hpp"
#include "fieldsel/rng.hpp"
#include "text_util.hpp"

namespace fieldsel {

ExperimentConfig::ExperimentConfig() {
    for (std::uint64_t n = 100; n <= 10000; n += 100) n_grid.push_back(n);
}

namespace {

namespace fs = std::filesystem;

class ConfigParser {
public:
    ConfigParser(std::string source, std::string base_dir) : source_(std::move(source)), base_(std::move(base_dir)) {
        register_keys();
    }

    ExperimentConfig parse(std::istream& in) {
        std::string raw;
        std::size_t line = 0;
        std::string section;
        while (std::getline(in, raw)) {
            ++line;
            const auto body = detail::trim(detail::strip_comment(raw));
            if (body.empty()) continue;
            if (body.front() == '[') {
                if (body.back() != ']') fail(line, "unterminated section header");
                section = std::string(detail::trim(body.substr(1, body.size() - 2)));
                if (!sections_.count(section)) fail(line, "unknown section [" + section + "]");
                continue;
            }
            const auto eq = body.find('=');
            if (eq == std::string_view::npos) fail(line, "expected 'key = value'");
            const std::string key(detail::trim(body.substr(0, eq)));
            const std::string value(detail::trim(body.substr(eq + 1)));
            if (section.empty()) fail(line, "key '" + key + "' outside any section");
            const std::string full = section + "." + key;
            auto it = handlers_.find(full);
            if (it == handlers_.end()) fail(line, "unknown key '" + key + "' in [" + section + "]");
            if (!seen_.insert(full).second) fail(line, "duplicate key '" + key + "' in [" + section + "]");
            if (value.empty()) fail(line, "missing value for '" + key + "'");
            line_ = line;
            it->second(value);
        }
        if (cfg_.n_grid.empty()) fail(line, "n_grid is empty");
        return cfg_;
    }

private:
    [[noreturn]] void fail(std::size_t line, const std::string& what) const { throw ParseError(source_, line, what); }
    [[noreturn]] void fail(const std::string& what) const { fail(line_, what); }

    std::uint64_t positive(const std::string& v) const {
        auto x = detail::parse_u64(v);
        if (!x || *x == 0) fail("expected a positive integer, got '" + v + "'");
        return *x;
    }

    std::uint64_t unsigned_value(const std::string& v) const {
        auto x = detail::parse_u64(v);
        if (!x) fail("expected a non-negative integer, got '" + v + "'");
        return *x;
    }

    double real(const std::string& v) const {
        auto x = detail::parse_double(v);
        if (!x || !std::isfinite(*x)) fail("expected a finite number, got '" + v + "'");
        return *x;
    }

    double positive_real(const std::string& v) const {
        const double x = real(v);
        if (!(x > 0.0)) fail("expected a positive number, got '" + v + "'");
        return x;
    }

    std::string resolve(const std::string& v) const {
        const fs::path p(v);
        if (p.is_absolute() || base_.empty()) return p.lexically_normal().string();
        return (fs::path(base_) / p).lexically_normal().string();
    }

    template <class F>
    auto guarded(F&& f, const std::string& v) const {
        try {
            return f(v);
        } catch (const ValidationError& e) {
            fail(e.what());
        }
    }

    std::vector<std::uint64_t> sizes(const std::string& v) const {
        std::vector<std::uint64_t> out;
        if (v.find(':') != std::string::npos) {
            std::vector<std::string> parts;
            std::stringstream ss(v);
            for (std::string part; std::getline(ss, part, ':');) parts.emplace_back(detail::trim(part));
            if (parts.size() != 3) fail("expected start:stop:step");
            const auto start = positive(parts[0]);
            const auto stop = positive(parts[1]);
            const auto step = positive(parts[2]);
            if (stop < start) fail("range stop is below its start");
            for (std::uint64_t n = start; n <= stop; n += step) out.push_back(n);
        } else {
            std::string list = v;
            for (char& c : list) {
                if (c == ',') c = ' ';
            }
            for (const auto& tok : detail::split_ws(list)) out.push_back(positive(tok));
        }
        for (std::size_t k = 1; k < out.size(); ++k) {
            if (out[k] <= out[k - 1]) fail("n_grid must be strictly increasing");
        }
        if (out.empty()) fail("n_grid is empty");
        return out;
    }

    void path_keys(const std::string& section, PathSettings ExperimentConfig::*member) {
        handlers_[section + ".complexity"] = [this, member](const std::string& v) {
            (cfg_.*member).complexity = guarded([](const std::string& s) { return parse_complexity_kind(s); }, v);
        };
        handlers_[section + ".k_max"] = [this, member](const std::string& v) { (cfg_.*member).k_max = positive_real(v); };
        handlers_[section + ".k_points"] = [this, member](const std::string& v) {
            const auto points = positive(v);
            if (points < 3) fail("k_points must be at least 3");
            (cfg_.*member).k_points = points;
        };
        handlers_[section + ".jump_rule"] = [this, member](const std::string& v) {
            (cfg_.*member).jump_rule = guarded([](const std::string& s) { return parse_jump_rule(s); }, v);
        };
    }

    void register_keys() {
        sections_ = {"model", "run", "selection", "slope", "risk_ratio"};
        handlers_["model.file"] = [this](const std::string& v) { cfg_.model_path = resolve(v); };
        handlers_["model.target"] = [this](const std::string& v) { cfg_.target = v; };
        handlers_["model.neighborhood"] = [this](const std::string& v) { cfg_.neighborhood = detail::split_ws(v); };
        handlers_["run.n_grid"] = [this](const std::string& v) { cfg_.n_grid = sizes(v); };
        handlers_["run.replicas"] = [this](const std::string& v) { cfg_.replicas = positive(v); };
        handlers_["run.seed"] = [this](const std::string& v) { cfg_.seed = unsigned_value(v); };
        handlers_["run.workers"] = [this](const std::string& v) { cfg_.workers = static_cast<unsigned>(positive(v)); };
        handlers_["run.output"] = [this](const std::string& v) { cfg_.output_dir = resolve(v); };
        handlers_["selection.s"] = [this](const std::string& v) { cfg_.s = static_cast<int>(positive(v)); };
        handlers_["selection.ns_convention"] = [this](const std::string& v) {
            cfg_.ns_convention = guarded([](const std::string& s) { return parse_ns_convention(s); }, v);
        };
        handlers_["selection.filter"] = [this](const std::string& v) {
            cfg_.filter = guarded([](const std::string& s) { return parse_filter_kind(s); }, v);
        };
        handlers_["selection.lambda"] = [this](const std::string& v) { cfg_.lambda = positive_real(v); };
        handlers_["selection.delta"] = [this](const std::string& v) { cfg_.delta = positive_real(v); };
        handlers_["selection.p_star"] = [this](const std::string& v) {
            const double p = positive_real(v);
            if (p > 1.0) fail("p_star must lie in (0, 1]");
            cfg_.p_star = p;
        };
        handlers_["selection.K"] = [this](const std::string& v) { cfg_.theory_k = positive_real(v); };
        handlers_["selection.loss"] = [this](const std::string& v) {
            cfg_.loss = guarded([](const std::string& s) { return parse_loss_kind(s); }, v);
        };
        handlers_["slope.n"] = [this](const std::string& v) { cfg_.slope_n = positive(v); };
        handlers_["slope.replicas"] = [this](const std::string& v) { cfg_.slope_replicas = positive(v); };
        path_keys("slope", &ExperimentConfig::slope);
        path_keys("risk_ratio", &ExperimentConfig::risk_ratio);
    }

    std::string source_;
    std::string base_;
    std::size_t line_ = 0;
    ExperimentConfig cfg_;
    std::set<std::string> sections_;
    std::set<std::string> seen_;
    std::map<std::string, std::function<void(const std::string&)>> handlers_;
};

std::string real_text(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_path_keys(std::ostream& out, const PathSettings& p) {
    out << "complexity = " << to_string(p.complexity) << "\n";
    out << "k_max = " << real_text(p.k_max) << "\n";
    out << "k_points = " << p.k_points << "\n";
    out << "jump_rule = " << to_string(p.jump_rule) << "\n";
}

} // namespace

ExperimentConfig parse_config(std::istream& in, const std::string& source, const std::string& base_dir) {
    return ConfigParser(source, base_dir).parse(in);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    const auto base = fs::path(path).parent_path().string();
    return parse_config(in, path, base);
}

std::string canonical_text(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "[model]\n";
    if (!cfg.model_path.empty()) out << "file = " << cfg.model_path << "\n";
    out << "target = " << cfg.target << "\n";
    if (!cfg.neighborhood.empty()) {
        out << "neighborhood =";
        for (const auto& s : cfg.neighborhood) out << ' ' << s;
        out << "\n";
    }
    out << "\n[run]\nn_grid =";
    for (std::size_t k = 0; k < cfg.n_grid.size(); ++k) out << (k ? ", " : " ") << cfg.n_grid[k];
    out << "\nreplicas = " << cfg.replicas << "\nseed = " << cfg.seed << "\n";
    out << "\n[selection]\n";
    if (cfg.s) out << "s = " << *cfg.s << "\n";
    out << "ns_convention = " << to_string(cfg.ns_convention) << "\n";
    out << "filter = " << to_string(cfg.filter) << "\n";
    out << "lambda = " << real_text(cfg.lambda) << "\n";
    out << "delta = " << real_text(cfg.delta) << "\n";
    if (cfg.p_star) out << "p_star = " << real_text(*cfg.p_star) << "\n";
    out << "K = " << real_text(cfg.theory_k) << "\n";
    out << "loss = " << to_string(cfg.loss) << "\n";
    out << "\n[slope]\nn = " << cfg.slope_n << "\nreplicas = " << cfg.slope_replicas << "\n";
    write_path_keys(out, cfg.slope);
    out << "\n[risk_ratio]\n";
    write_path_keys(out, cfg.risk_ratio);
    return out.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical_text(cfg))));
    return buf;
}

} // namespace fieldsel
