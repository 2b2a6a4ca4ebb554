#include "fieldsel/model_file.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "fieldsel/errors.hpp"
#include "text_util.hpp"

namespace fieldsel {

namespace {

struct PendingEdge {
    std::string first;
    std::string second;
    std::optional<double> strength;
    std::size_t line;
};

struct PendingField {
    std::string site;
    double value;
    std::size_t line;
};

struct PendingClique {
    std::vector<std::string> sites;
    std::vector<double> energy;
    std::size_t line;
};

class ModelParser {
public:
    explicit ModelParser(std::string source) : source_(std::move(source)) {}

    GibbsModel parse(std::istream& in) {
        std::string raw;
        std::size_t line_no = 0;
        while (std::getline(in, raw)) {
            ++line_no;
            const auto body = detail::trim(detail::strip_comment(raw));
            if (body.empty()) continue;
            const auto eq = body.find('=');
            if (eq == std::string_view::npos) fail(line_no, "expected 'key = value'");
            const std::string key(detail::trim(body.substr(0, eq)));
            const std::string value(detail::trim(body.substr(eq + 1)));
            if (value.empty()) fail(line_no, "missing value for '" + key + "'");
            handle(key, value, line_no);
        }
        if (!sites_) fail(line_no == 0 ? 1 : line_no, "no 'sites' declaration");
        return build(line_no);
    }

private:
    [[noreturn]] void fail(std::size_t line, const std::string& what) const { throw ParseError(source_, line, what); }

    double number(const std::string& tok, std::size_t line) const {
        auto v = detail::parse_double(tok);
        if (!v || !std::isfinite(*v)) fail(line, "expected a finite number, got '" + tok + "'");
        return *v;
    }

    void require_sites(std::size_t line) const {
        if (!sites_) fail(line, "'sites' must be declared first");
    }

    void require_known(const std::string& name, std::size_t line) const {
        if (!sites_->contains(name)) fail(line, "unknown site '" + name + "'");
    }

    void handle(const std::string& key, const std::string& value, std::size_t line) {
        const auto toks = detail::split_ws(value);
        if (key == "sites") {
            if (sites_) fail(line, "'sites' declared twice");
            if (toks[0] == "grid") {
                if (toks.size() < 3 || toks.size() > 4) fail(line, "expected 'grid <rows> <cols> [centered]'");
                auto rows = detail::parse_int(toks[1]);
                auto cols = detail::parse_int(toks[2]);
                if (!rows || !cols || *rows < 1 || *cols < 1) fail(line, "grid dimensions must be positive integers");
                const bool centered = toks.size() == 4;
                if (centered && toks[3] != "centered") fail(line, "unknown grid option '" + toks[3] + "'");
                try {
                    sites_ = SiteSet::grid(static_cast<int>(*rows), static_cast<int>(*cols), centered);
                } catch (const Error& e) {
                    fail(line, e.what());
                }
                grid_ = {static_cast<int>(*rows), static_cast<int>(*cols)};
            } else {
                try {
                    sites_ = SiteSet(toks);
                } catch (const Error& e) {
                    fail(line, e.what());
                }
            }
        } else if (key == "alphabet") {
            std::vector<int> symbols;
            for (const auto& t : toks) {
                auto v = detail::parse_int(t);
                if (!v) fail(line, "alphabet symbols must be integers, got '" + t + "'");
                symbols.push_back(static_cast<int>(*v));
            }
            try {
                alphabet_ = Alphabet(symbols);
            } catch (const Error& e) {
                fail(line, e.what());
            }
        } else if (key == "coupling") {
            if (toks.size() != 1) fail(line, "expected a single coupling value");
            default_coupling_ = number(toks[0], line);
        } else if (key == "edges") {
            require_sites(line);
            if (toks.size() != 1 || (toks[0] != "nearest" && toks[0] != "none")) {
                fail(line, "expected 'nearest' or 'none'");
            }
            if (toks[0] == "nearest") {
                if (!grid_) fail(line, "'edges = nearest' needs a grid site set");
                nearest_line_ = line;
            }
        } else if (key == "edge") {
            require_sites(line);
            if (toks.size() != 2 && toks.size() != 3) fail(line, "expected 'edge = <site> <site> [<coupling>]'");
            require_known(toks[0], line);
            require_known(toks[1], line);
            std::optional<double> j;
            if (toks.size() == 3) j = number(toks[2], line);
            edges_.push_back({toks[0], toks[1], j, line});
        } else if (key == "field") {
            require_sites(line);
            if (toks.size() != 2) fail(line, "expected 'field = <site> <value>'");
            require_known(toks[0], line);
            fields_.push_back({toks[0], number(toks[1], line), line});
        } else if (key == "clique") {
            require_sites(line);
            const auto colon = value.find(':');
            if (colon == std::string::npos) fail(line, "expected 'clique = <sites> : <energies>'");
            PendingClique c{detail::split_ws(value.substr(0, colon)), {}, line};
            if (c.sites.empty()) fail(line, "clique needs at least one site");
            for (const auto& s : c.sites) require_known(s, line);
            for (const auto& t : detail::split_ws(value.substr(colon + 1))) {
                auto v = detail::parse_double(t);
                if (!v || std::isnan(*v) || *v == INFINITY) fail(line, "bad clique energy '" + t + "'");
                c.energy.push_back(*v);
            }
            cliques_.push_back(std::move(c));
        } else {
            fail(line, "unknown key '" + key + "'");
        }
    }

    GibbsModel build(std::size_t last_line) {
        const SiteSet& sites = *sites_;
        const Alphabet alphabet = alphabet_.value_or(Alphabet::spins());
        const bool pairwise = nearest_line_ || !edges_.empty() || !fields_.empty();
        if (pairwise && !cliques_.empty()) {
            fail(cliques_.front().line, "clique potentials cannot be mixed with edges or fields");
        }
        try {
            if (!cliques_.empty()) {
                std::vector<CliquePotential> cliques;
                for (const auto& c : cliques_) {
                    CliquePotential p;
                    for (const auto& s : c.sites) p.sites.push_back(sites.index_of(s));
                    p.energy = c.energy;
                    cliques.push_back(std::move(p));
                }
                return build_gibbs(sites, alphabet, std::move(cliques));
            }
            std::vector<Coupling> pairs;
            if (nearest_line_) {
                if (!default_coupling_) fail(*nearest_line_, "'edges = nearest' needs a 'coupling' value");
                const auto [rows, cols] = *grid_;
                for (int r = 0; r < rows; ++r) {
                    for (int c = 0; c < cols; ++c) {
                        const int k = r * cols + c;
                        if (c + 1 < cols) pairs.push_back({k, k + 1, *default_coupling_});
                        if (r + 1 < rows) pairs.push_back({k, k + cols, *default_coupling_});
                    }
                }
            }
            for (const auto& e : edges_) {
                if (!e.strength && !default_coupling_) fail(e.line, "edge without coupling and no default 'coupling'");
                pairs.push_back({sites.index_of(e.first), sites.index_of(e.second), e.strength.value_or(*default_coupling_)});
            }
            std::vector<double> fields;
            if (!fields_.empty()) {
                fields.assign(static_cast<std::size_t>(sites.size()), 0.0);
                for (const auto& f : fields_) fields[static_cast<std::size_t>(sites.index_of(f.site))] += f.value;
            }
            return build_ising(sites, alphabet, std::move(pairs), std::move(fields));
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            fail(last_line, e.what());
        }
    }

    std::string source_;
    std::optional<SiteSet> sites_;
    std::optional<std::pair<int, int>> grid_;
    std::optional<Alphabet> alphabet_;
    std::optional<double> default_coupling_;
    std::optional<std::size_t> nearest_line_;
    std::vector<PendingEdge> edges_;
    std::vector<PendingField> fields_;
    std::vector<PendingClique> cliques_;
};

} // namespace

GibbsModel parse_model(std::istream& in, const std::string& source) { return ModelParser(source).parse(in); }

GibbsModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file '" + path + "'");
    return parse_model(in, path);
}

std::string default_ising_3x3_text() {
    return "# 3x3 Ising field on {-1,0,1}^2 with nearest-neighbour couplings J = 0.2.\n"
           "# The interacting-pair set is a reconstruction: nearest-neighbour edges on the grid.\n"
           "sites    = grid 3 3 centered\n"
           "alphabet = -1 1\n"
           "coupling = 0.2\n"
           "edges    = nearest\n";
}

} // namespace fieldsel
