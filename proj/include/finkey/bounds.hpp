#pragma once

#include <string>

namespace finkey {

struct EpsilonBudget {
    double pe = 0.25e-8;
    double bar = 0.25e-8;
    double ec = 0.25e-8;
    double pa = 0.25e-8;
    double qdf = 0.0;  // only used in coherent mode

    double total() const { return pe + bar + ec + pa + qdf; }
    void validate(bool coherent = false) const;
};

struct KeyLengthTerms {
    double n = 0.0;
    double H_mu = 0.0;
    double delta = 0.0;
    double leak = 0.0;
    double pa_term = 0.0;
    double penalty = 0.0;  // coherent mode only
    double ell = 0.0;
    double rate = 0.0;     // filled by the caller once N is known
};

double binary_entropy(double p);

// Variation bound on ||F - P||_1 for an alphabet of the given size and m samples.
double variation_bound_mu(double eps_pe, int alphabet_size, double m);

double delta_bar(double eps_bar, int d, double n);

double leak_ec(double n, double f_ec, double h_xy, double eps_ec);

KeyLengthTerms key_length(double n, double H_mu, double delta, double leak, double eps_pa,
                          double penalty = 0.0);

struct CoherentTerms {
    double r = 0.0;
    double mu = 0.0;
    double delta = 0.0;
    double penalty = 0.0;
};

// de Finetti parameters. Throws InvalidInput when r > N.
double coherent_r(double N, double n, double m, double k, double b, double eps_qdf, int dim_ab);
// delta for n key rounds given r
double coherent_delta(double r, double n, double eps_bar, int d = 2);
CoherentTerms coherent_params(double N, double n, double m, double k, double b, double eps_qdf,
                              double eps_pe, double eps_bar, int dim_ab, int alphabet_size, int d = 2);

// Parameter-estimation fraction m/N for the discrete-phase examples.
double g_pe_schedule(const std::string& name, double N);

}  // namespace finkey
