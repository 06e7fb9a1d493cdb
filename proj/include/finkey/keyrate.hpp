#pragma once

#include <optional>
#include <string>
#include <vector>

#include "finkey/bounds.hpp"
#include "finkey/feasible.hpp"
#include "finkey/objective.hpp"
#include "finkey/protocol.hpp"

namespace finkey {

enum class Mode { Collective, Coherent, Asymptotic };

const char* to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct SolverKnobs {
    int max_iter = 30;
    double eps_tol = 1e-6;
    int line_search_evals = 30;
    bool polish = true;          // barrier-Newton refinement before the Frank-Wolfe loop
    double polish_gap = 1e-8;    // stop once nu/t drops below this
    double eps_rep = 1e-10;
    double eps_start = 1e-12;
    bool verbose = false;
    SdpTolerances sdp{1e-9, 1e-9, 150, false};
};

struct FiniteParams {
    double N = 0.0;
    double m = 0.0;
    double n = -1.0;      // < 0: derived from the pass probability
    double f_ec = 1.2;
    int d = 2;
    double k = 0.0;       // coherent mode
    double b = 1.0;
};

struct Scenario {
    ProtocolModel protocol;
    Distribution observed;                 // accepted frequencies over the fine alphabet
    std::optional<Distribution> expected;  // noiseless-sampling distribution, for n and H(X|Y)
    std::optional<double> h_xy;            // explicit error-correction entropy
    FiniteParams finite;
    EpsilonBudget budget;
    Mode mode = Mode::Collective;
    SolverKnobs knobs;
    std::optional<CMat> rho0;
};

struct Step1Result {
    CMat rho;
    RVec v;
    double value = 0.0;
    int iterations = 0;
    double last_gap = 0.0;
    bool polished = false;
    std::vector<double> trace;  // f after each iterate
};

struct Expansion {
    std::vector<double> mu_prime;
    std::vector<double> t_prime;
    double eps_sol = 0.0;
    double eps_prime = 0.0;
    CMat rho_shifted;
};

struct Step2Result {
    double beta = 0.0;
    double dual_value = 0.0;      // rigorous lower bound on min <grad, sigma>
    double sdp_dual = 0.0;        // b.y as returned
    RVec y;
    double min_eig_slack = 0.0;
    double min_lp_slack = 0.0;
    bool ok = false;
    std::string status;
};

struct KeyRateResult {
    std::string status = "ok";
    double alpha_hat = 0.0;
    double beta = 0.0;
    std::vector<double> mu;
    Expansion expansion;
    double eps = 0.0;
    double zeta = 0.0;
    double p_pass = 0.0;
    double h_xy = 0.0;
    KeyLengthTerms terms;
    double ell = 0.0;
    double rate = 0.0;
    int iterations = 0;
    double r = 0.0;  // coherent mode
};

// Step 1: Frank-Wolfe over the set, starting at x0 (or a max-margin point).
Step1Result step1_frank_wolfe(const LinearSet& set, const PostProcessingMap& map,
                              const std::optional<FeasiblePoint>& x0, const SolverKnobs& knobs);

// Barrier-Newton refinement from a strictly interior point; returns false if it
// could not make progress (x is left at the best point reached).
bool barrier_polish(const LinearSet& set, const PostProcessingMap& map, FeasiblePoint& x, const SolverKnobs& knobs);

Expansion expand_imprecision(const CMat& rho, const RVec& v, const FeasibleSetSpec& spec, const LinearSet& set,
                             double eps_rep, bool corrections = true);

// Step 2 on the expanded set; valid for any rho.
Step2Result step2_dual_bound(const LinearSet& expanded, const PostProcessingMap& map, const CMat& rho,
                             double eps_prime, const SdpTolerances& tol);

FeasibleSetSpec make_feasible_spec(const Scenario& sc, bool asymptotic, const std::vector<double>& mu);

// Certified lower bound on min f over the set described by spec (Steps 1, expansion, 2).
struct BoundResult {
    Step1Result step1;
    Expansion expansion;
    Step2Result step2;
    double eps = 0.0;
    double zeta = 0.0;
    double H = 0.0;  // beta - zeta
};
BoundResult certified_bound(const FeasibleSetSpec& spec, const PostProcessingMap& map, const SolverKnobs& knobs,
                            const std::optional<CMat>& rho0 = std::nullopt);

KeyRateResult finite_key_rate(const Scenario& sc);
double asymptotic_key_rate(const Scenario& sc, KeyRateResult* detail = nullptr);

// probability of a key-generation round, including sifting
double pass_probability(const Scenario& sc, const CMat& rho);

}  // namespace finkey
