#include "volstop/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace volstop {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::BadConfig, what); }

double parse_double(const std::string& key, const std::string& v) {
    std::string t = lower(trim(v));
    if (t == "inf" || t == "infinity") return std::numeric_limits<double>::infinity();
    try {
        std::size_t pos = 0;
        double d = std::stod(t, &pos);
        if (pos != t.size()) bad("trailing characters in value of '" + key + "': " + v);
        return d;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        bad("cannot parse number for '" + key + "': " + v);
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        unsigned long long u = std::stoull(trim(v), &pos, 10);
        if (pos != trim(v).size()) bad("trailing characters in value of '" + key + "': " + v);
        return u;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        bad("cannot parse integer for '" + key + "': " + v);
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    std::string t = lower(trim(v));
    if (t == "true" || t == "yes" || t == "1") return true;
    if (t == "false" || t == "no" || t == "0") return false;
    bad("cannot parse boolean for '" + key + "': " + v);
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::istringstream in(v);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(parse_double(key, tok));
    if (out.empty()) bad("empty number list for '" + key + "'");
    return out;
}

using Section = std::map<std::string, std::string>;
using Sections = std::map<std::string, Section>;

Sections split_sections(const std::string& text) {
    Sections out;
    std::istringstream in(text);
    std::string line;
    std::string current;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') bad("unterminated section header at line " +
                                        std::to_string(line_no));
            current = lower(trim(line.substr(1, line.size() - 2)));
            if (current.empty()) bad("empty section name at line " + std::to_string(line_no));
            out[current];
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            bad("expected 'key = value' at line " + std::to_string(line_no) + ": " + line);
        if (current.empty())
            bad("key outside any [section] at line " + std::to_string(line_no));
        std::string key = lower(trim(line.substr(0, eq)));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) bad("empty key at line " + std::to_string(line_no));
        if (out[current].count(key))
            bad("duplicate key '" + key + "' in [" + current + "]");
        out[current][key] = value;
    }
    return out;
}

// Pulls a key out of the section, tracking which keys were consumed so that
// leftovers can be reported.
class SectionReader {
public:
    SectionReader(const Sections& all, const std::string& name) : name_(name) {
        auto it = all.find(name);
        if (it != all.end()) section_ = &it->second;
    }

    std::optional<std::string> get(const std::string& key) {
        consumed_.insert(key);
        if (!section_) return std::nullopt;
        auto it = section_->find(key);
        if (it == section_->end()) return std::nullopt;
        return it->second;
    }

    void finish() const {
        if (!section_) return;
        for (const auto& [key, value] : *section_)
            if (!consumed_.count(key)) bad("unknown key '" + key + "' in [" + name_ + "]");
    }

private:
    std::string name_;
    const Section* section_ = nullptr;
    std::set<std::string> consumed_;
};

}  // namespace

RunConfig parse_config(const std::string& text) {
    Sections sections = split_sections(text);
    static const std::set<std::string> known = {"model", "problem", "solver", "mc", "output"};
    for (const auto& [name, _] : sections)
        if (!known.count(name)) bad("unknown section [" + name + "]");

    RunConfig cfg;

    SectionReader model(sections, "model");
    if (auto v = model.get("kind")) {
        std::string k = lower(*v);
        if (k == "chain")
            cfg.model.kind = RunConfig::ModelKind::Chain;
        else if (k == "hullwhite" || k == "hull-white" || k == "hull_white")
            cfg.model.kind = RunConfig::ModelKind::HullWhite;
        else if (k == "heston")
            cfg.model.kind = RunConfig::ModelKind::Heston;
        else
            bad("unknown model kind '" + *v + "'");
    }
    if (auto v = model.get("states")) cfg.model.states = parse_list("states", *v);
    if (auto v = model.get("q")) cfg.model.q = parse_list("q", *v);
    if (auto v = model.get("eta")) cfg.model.eta = parse_double("eta", *v);
    if (auto v = model.get("kappa")) cfg.model.kappa = parse_double("kappa", *v);
    if (auto v = model.get("lambda")) cfg.model.lambda = parse_double("lambda", *v);
    if (auto v = model.get("delta")) cfg.model.delta = parse_double("delta", *v);
    model.finish();

    SectionReader problem(sections, "problem");
    if (auto v = problem.get("gain")) {
        std::string k = lower(*v);
        if (k == "put")
            cfg.problem.gain = GainFunction::Kind::Put;
        else if (k == "constant")
            cfg.problem.gain = GainFunction::Kind::Constant;
        else
            bad("unknown gain '" + *v + "'");
    }
    if (auto v = problem.get("strike")) cfg.problem.strike = parse_double("strike", *v);
    if (auto v = problem.get("level")) cfg.problem.level = parse_double("level", *v);
    if (auto v = problem.get("rate")) cfg.problem.rate = parse_double("rate", *v);
    if (auto v = problem.get("horizon")) cfg.problem.horizon = parse_double("horizon", *v);
    if (auto v = problem.get("form")) {
        std::string k = lower(*v);
        if (k == "plain")
            cfg.problem.form = ProblemForm::Plain;
        else if (k == "pricing")
            cfg.problem.form = ProblemForm::Pricing;
        else
            bad("unknown form '" + *v + "'");
    }
    problem.finish();

    SectionReader solver(sections, "solver");
    if (auto v = solver.get("grid_points"))
        cfg.solver.grid_points = static_cast<std::size_t>(parse_u64("grid_points", *v));
    if (auto v = solver.get("grid_decades"))
        cfg.solver.grid_decades = parse_double("grid_decades", *v);
    if (auto v = solver.get("tol")) cfg.solver.tol = parse_double("tol", *v);
    if (auto v = solver.get("max_iters"))
        cfg.solver.max_iters = static_cast<int>(parse_u64("max_iters", *v));
    if (auto v = solver.get("contact_tol"))
        cfg.solver.contact_tol = parse_double("contact_tol", *v);
    solver.finish();

    SectionReader mc(sections, "mc");
    if (auto v = mc.get("n_paths"))
        cfg.mc.n_paths = static_cast<std::size_t>(parse_u64("n_paths", *v));
    if (auto v = mc.get("dt")) cfg.mc.dt = parse_double("dt", *v);
    if (auto v = mc.get("horizon_cap")) cfg.mc.horizon_cap = parse_double("horizon_cap", *v);
    if (auto v = mc.get("seed")) cfg.mc.seed = parse_u64("seed", *v);
    if (auto v = mc.get("antithetic")) cfg.mc.antithetic = parse_bool("antithetic", *v);
    if (auto v = mc.get("x0")) cfg.mc.x0 = parse_double("x0", *v);
    if (auto v = mc.get("y0_index"))
        cfg.mc.y0_index = static_cast<std::size_t>(parse_u64("y0_index", *v));
    if (auto v = mc.get("y0_high_index"))
        cfg.mc.y0_high_index = static_cast<std::size_t>(parse_u64("y0_high_index", *v));
    if (auto v = mc.get("y0")) cfg.mc.y0 = parse_double("y0", *v);
    if (auto v = mc.get("y0_high")) cfg.mc.y0_high = parse_double("y0_high", *v);
    if (auto v = mc.get("coupling_horizon"))
        cfg.mc.coupling_horizon = parse_double("coupling_horizon", *v);
    if (auto v = mc.get("t_probe")) cfg.mc.t_probe = parse_double("t_probe", *v);
    if (auto v = mc.get("n_levels"))
        cfg.mc.n_levels = static_cast<std::size_t>(parse_u64("n_levels", *v));
    if (auto v = mc.get("direction")) {
        std::string k = lower(*v);
        if (k == "down")
            cfg.mc.direction = ProbeDirection::Down;
        else if (k == "up")
            cfg.mc.direction = ProbeDirection::Up;
        else
            bad("unknown direction '" + *v + "' (down|up)");
    }
    if (auto v = mc.get("export_dt")) cfg.mc.export_dt = parse_double("export_dt", *v);
    if (auto v = mc.get("export_paths"))
        cfg.mc.export_paths = static_cast<std::size_t>(parse_u64("export_paths", *v));
    mc.finish();

    SectionReader output(sections, "output");
    if (auto v = output.get("directory")) cfg.output.directory = *v;
    output.finish();

    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) bad("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

ChainModel RunConfig::build_chain() const {
    if (model.kind != ModelKind::Chain)
        bad("this command needs a chain model ([model] kind = chain)");
    if (model.states.empty()) bad("[model] states is required for a chain model");
    if (model.q.size() != model.states.size() * model.states.size())
        bad("[model] q must list " + std::to_string(model.states.size() * model.states.size()) +
            " rates (row-major), got " + std::to_string(model.q.size()));
    return make_chain_model(VolStates(model.states),
                            GeneratorMatrix(model.states.size(), model.q));
}

DiffusionVolModel RunConfig::build_diffusion() const {
    switch (model.kind) {
        case ModelKind::HullWhite:
            return DiffusionVolModel::hull_white(model.eta, model.kappa, model.delta);
        case ModelKind::Heston:
            return DiffusionVolModel::heston(model.eta, model.kappa, model.lambda, model.delta);
        case ModelKind::Chain: break;
    }
    bad("this command needs a diffusion model ([model] kind = hullwhite | heston)");
}

StoppingProblem RunConfig::build_problem() const {
    GainFunction gain = problem.gain == GainFunction::Kind::Put
                            ? GainFunction::put(problem.strike)
                            : GainFunction::constant(problem.level);
    if (is_chain()) {
        ChainModel cm = build_chain();
        return problem.form == ProblemForm::Pricing
                   ? StoppingProblem::pricing(std::move(cm), gain, problem.rate, problem.horizon)
                   : StoppingProblem::plain(std::move(cm), gain, problem.rate, problem.horizon);
    }
    DiffusionVolModel dm = build_diffusion();
    return problem.form == ProblemForm::Pricing
               ? StoppingProblem::pricing(std::move(dm), gain, problem.rate, problem.horizon)
               : StoppingProblem::plain(std::move(dm), gain, problem.rate, problem.horizon);
}

McConfig RunConfig::build_mc(int n_threads) const {
    McConfig out;
    out.n_paths = mc.n_paths;
    out.dt = mc.dt;
    out.horizon_cap = mc.horizon_cap;
    out.seed = mc.seed;
    out.antithetic = mc.antithetic;
    out.n_threads = n_threads;
    out.require_valid();
    return out;
}

}  // namespace volstop
