#include "finkey/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "finkey/linalg.hpp"

namespace finkey {

void EpsilonBudget::validate(bool coherent) const {
    auto check = [](double e, const char* name) {
        if (!(e > 0.0 && e < 1.0)) throw InvalidInput(std::string("epsilon budget: ") + name + " must lie in (0,1)");
    };
    check(pe, "eps_pe");
    check(bar, "eps_bar");
    check(ec, "eps_ec");
    check(pa, "eps_pa");
    if (coherent) check(qdf, "eps_qdf");
    else if (qdf < 0.0) throw InvalidInput("epsilon budget: eps_qdf must be nonnegative");
}

double binary_entropy(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("binary_entropy: p outside [0,1]");
    if (p == 0.0 || p == 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double variation_bound_mu(double eps_pe, int alphabet_size, double m) {
    if (!(eps_pe > 0.0 && eps_pe < 1.0)) throw InvalidInput("variation_bound_mu: eps_pe outside (0,1)");
    if (alphabet_size < 2) throw InvalidInput("variation_bound_mu: alphabet size below 2");
    if (!(m >= 1.0)) throw InvalidInput("variation_bound_mu: m must be at least 1");
    return std::sqrt(2.0) * std::sqrt((std::log(1.0 / eps_pe) + alphabet_size * std::log1p(m)) / m);
}

double delta_bar(double eps_bar, int d, double n) {
    if (!(eps_bar > 0.0 && eps_bar < 1.0)) throw InvalidInput("delta_bar: eps_bar outside (0,1)");
    if (d < 2) throw InvalidInput("delta_bar: d below 2");
    if (!(n >= 1.0)) throw InvalidInput("delta_bar: n must be at least 1");
    return 2.0 * std::log2(d + 3.0) * std::sqrt(std::log2(2.0 / eps_bar) / n);
}

double leak_ec(double n, double f_ec, double h_xy, double eps_ec) {
    if (f_ec < 1.0) throw InvalidInput("leak_ec: f_ec below 1");
    if (h_xy < -1e-12) throw InvalidInput("leak_ec: negative conditional entropy");
    if (!(eps_ec > 0.0 && eps_ec < 1.0)) throw InvalidInput("leak_ec: eps_ec outside (0,1)");
    if (n < 0.0) throw InvalidInput("leak_ec: negative n");
    return n * f_ec * std::max(0.0, h_xy) + std::log2(2.0 / eps_ec);
}

KeyLengthTerms key_length(double n, double H_mu, double delta, double leak, double eps_pa, double penalty) {
    KeyLengthTerms t;
    t.n = n;
    t.H_mu = H_mu;
    t.delta = delta;
    t.leak = leak;
    t.penalty = penalty;
    t.pa_term = 2.0 * std::log2(2.0 / eps_pa);
    const double raw = n * (H_mu - delta) - leak - t.pa_term - penalty;
    t.ell = raw > 0.0 ? std::floor(raw) : 0.0;
    return t;
}

double coherent_r(double N, double n, double m, double k, double b, double eps_qdf, int dim_ab) {
    if (!(eps_qdf > 0.0 && eps_qdf < 1.0)) throw InvalidInput("coherent_r: eps_qdf outside (0,1)");
    if (!(k >= 1.0)) throw InvalidInput("coherent_r: k must be at least 1");
    if (std::abs(b * n + m + k - N) > 0.5) throw InvalidInput("coherent_r: b n + m + k must equal N");
    const double D = static_cast<double>(dim_ab);
    return ((b * n + m) / k + 1.0) * (2.0 * std::log(2.0 / eps_qdf) + D * D * std::log(k)) - 1.0;
}

// h capped at its maximum once the argument passes 1/2; the ratio can exceed 1
static double h_capped(double x) { return binary_entropy(std::clamp(x, 0.0, 0.5)); }

double coherent_delta(double r, double n, double eps_bar, int d) {
    if (!(n >= 1.0)) throw InvalidInput("coherent_delta: n must be at least 1");
    return (2.5 * std::log2(double(d)) + 4.0) * std::sqrt(h_capped(r / n) + 2.0 / n * std::log2(4.0 / eps_bar));
}

CoherentTerms coherent_params(double N, double n, double m, double k, double b, double eps_qdf,
                              double eps_pe, double eps_bar, int dim_ab, int alphabet_size, int d) {
    CoherentTerms c;
    c.r = coherent_r(N, n, m, k, b, eps_qdf, dim_ab);
    if (c.r > N) throw InvalidInput("infeasible coherent parameters: r exceeds N; raise k or eps_qdf");
    if (!(m >= 1.0) || !(n >= 1.0)) throw InvalidInput("coherent_params: m and n must be at least 1");
    c.mu = 2.0 * std::sqrt(h_capped(c.r / m) +
                           (std::log2(1.0 / eps_pe) + alphabet_size * std::log2(m / 2.0 + 1.0)) / m);
    c.delta = coherent_delta(c.r, n, eps_bar, d);
    c.penalty = 2.0 * (m + k) * std::log2(double(dim_ab));
    return c;
}

double g_pe_schedule(const std::string& name, double N) {
    if (name == "L20") {
        if (N < 1.31e11) return 0.99;
        return std::min(0.99, 1.1e11 / N + std::pow(0.5, std::log10(N) / 4.0));
    }
    if (name == "L100") {
        if (N < 2.75e14) return 0.99;
        return std::min(0.99, 2.35e14 / N + std::pow(0.5, std::log10(N) / 5.0));
    }
    throw InvalidInput("unknown g_PE schedule '" + name + "'");
}

}  // namespace finkey
