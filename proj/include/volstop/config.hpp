#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "volstop/chain.hpp"
#include "volstop/models.hpp"
#include "volstop/montecarlo.hpp"
#include "volstop/stopping.hpp"

namespace volstop {

// Sectioned key = value text config. '#' starts a comment, values may hold
// whitespace-separated number lists. Unknown sections or keys are rejected
// (BadConfig) so typos fail loudly instead of silently using defaults.
struct RunConfig {
    enum class ModelKind { Chain, HullWhite, Heston };

    struct Model {
        ModelKind kind = ModelKind::Chain;
        std::vector<double> states;  // chain
        std::vector<double> q;       // chain, row-major m*m
        double eta = 0.0;            // diffusion
        double kappa = 0.0;
        double lambda = 0.0;  // heston
        double delta = 0.0;
    } model;

    struct Problem {
        GainFunction::Kind gain = GainFunction::Kind::Put;
        double strike = 1.0;
        double level = 0.0;  // constant gain
        double rate = 0.05;
        double horizon = std::numeric_limits<double>::infinity();
        ProblemForm form = ProblemForm::Pricing;
    } problem;

    struct Solver {
        std::size_t grid_points = 2000;
        double grid_decades = 3.0;
        double tol = 1e-9;
        int max_iters = 60;
        std::optional<double> contact_tol;
    } solver;

    struct Mc {
        std::size_t n_paths = 10000;
        double dt = 1e-3;
        double horizon_cap = 10.0;
        std::uint64_t seed = 12345;
        bool antithetic = false;
        double x0 = 1.0;
        std::size_t y0_index = 0;
        std::optional<std::size_t> y0_high_index;
        double y0 = 0.2;  // diffusion starting level
        std::optional<double> y0_high;
        double coupling_horizon = 1.0;
        double t_probe = 1.0;
        std::size_t n_levels = 5;
        ProbeDirection direction = ProbeDirection::Down;
        double export_dt = 0.01;
        std::size_t export_paths = 4;
    } mc;

    struct Output {
        std::string directory = "out";
    } output;

    bool is_chain() const { return model.kind == ModelKind::Chain; }
    ChainModel build_chain() const;           // BadConfig when not a chain model
    DiffusionVolModel build_diffusion() const;  // BadConfig when not a diffusion model
    StoppingProblem build_problem() const;
    McConfig build_mc(int n_threads) const;
};

// Throws Error(BadConfig, ...) with the offending line or key in the message.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace volstop
