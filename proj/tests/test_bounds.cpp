#include <gtest/gtest.h>

#include <cmath>

#include "finkey/bounds.hpp"
#include "finkey/linalg.hpp"
#include "finkey/random.hpp"

using namespace finkey;

namespace {

// written out from the formulas with long double, independent of the library
long double mu_oracle(long double eps, int sigma, long double m) {
    return std::sqrt(2.0L) * std::sqrt((std::log(1.0L / eps) + sigma * std::log(m + 1.0L)) / m);
}

long double delta_oracle(long double eps, int d, long double n) {
    return 2.0L * std::log2(d + 3.0L) * std::sqrt(std::log2(2.0L / eps) / n);
}

long double r_oracle(long double N, long double n, long double m, long double k, long double b, long double eqdf,
                     long double dim) {
    (void)N;
    const long double pre = (b * n + m) / k + 1.0L;
    return pre * (2.0L * std::log(2.0L / eqdf) + dim * dim * std::log(k)) - 1.0L;
}

}  // namespace

TEST(BinaryEntropy, Values) {
    EXPECT_EQ(binary_entropy(0.5), 1.0);
    EXPECT_EQ(binary_entropy(0.0), 0.0);
    EXPECT_EQ(binary_entropy(1.0), 0.0);
    EXPECT_NEAR(binary_entropy(0.05), 0.286397, 5e-7);
    EXPECT_NEAR(binary_entropy(0.11), binary_entropy(0.89), 1e-15);
    EXPECT_THROW(binary_entropy(-0.01), InvalidInput);
    EXPECT_THROW(binary_entropy(1.01), InvalidInput);
}

TEST(VariationBound, Examples) {
    EXPECT_NEAR(variation_bound_mu(1e-6, 2, 1e6), 9.105e-3, 5e-7);
    EXPECT_NEAR(variation_bound_mu(0.25e-8, 16, 1e8), 2.508e-3, 5e-7);
    EXPECT_NEAR(variation_bound_mu(1e-6, 2, 1e6), double(mu_oracle(1e-6L, 2, 1e6L)), 1e-15);
    EXPECT_LT(variation_bound_mu(0.25e-8, 16, 1e16), 1e-6);
}

TEST(VariationBound, Errors) {
    EXPECT_THROW(variation_bound_mu(0.0, 2, 100), InvalidInput);
    EXPECT_THROW(variation_bound_mu(1.0, 2, 100), InvalidInput);
    EXPECT_THROW(variation_bound_mu(0.1, 1, 100), InvalidInput);
    EXPECT_THROW(variation_bound_mu(0.1, 2, 0.5), InvalidInput);
}

TEST(VariationBound, MonotoneOnGrid) {
    for (double eps : {1e-10, 1e-6, 1e-2})
        for (int s : {2, 4, 16, 40})
            for (double m = 10; m < 1e15; m *= 7) {
                const double mu = variation_bound_mu(eps, s, m);
                EXPECT_GT(mu, variation_bound_mu(eps, s, m * 7));
                EXPECT_LT(mu, variation_bound_mu(eps, s + 1, m));
                EXPECT_LT(mu, variation_bound_mu(eps / 10, s, m));
            }
}

TEST(DeltaBar, Examples) {
    EXPECT_NEAR(delta_bar(1e-6, 2, 1e6), 2.125e-2, 5e-6);
    EXPECT_NEAR(delta_bar(1e-6, 2, 1e12), 2.125e-5, 5e-9);
    EXPECT_NEAR(delta_bar(1e-6, 2, 1e6) / delta_bar(1e-6, 4, 1e6), std::log2(5.0) / std::log2(7.0), 1e-14);
    EXPECT_NEAR(delta_bar(0.25e-8, 2, 3e7), double(delta_oracle(0.25e-8L, 2, 3e7L)), 1e-15);
    EXPECT_THROW(delta_bar(1e-6, 1, 1e6), InvalidInput);
    EXPECT_THROW(delta_bar(1e-6, 2, 0.0), InvalidInput);
    EXPECT_THROW(delta_bar(0.0, 2, 10), InvalidInput);
}

TEST(DeltaBar, DecreasingInN) {
    for (double n = 1; n < 1e16; n *= 3) EXPECT_GT(delta_bar(1e-8, 2, n), delta_bar(1e-8, 2, n * 3));
}

TEST(LeakEc, Examples) {
    const double h = binary_entropy(0.05);
    EXPECT_NEAR(leak_ec(1e6, 1.2, h, 1e-6), 343697.0, 1.0);
    EXPECT_NEAR(leak_ec(1e6, 1.2, 0.0, 1e-6), std::log2(2e6), 1e-12);
    const double c = std::log2(2e6);
    EXPECT_NEAR((leak_ec(1e6, 1.2, h, 1e-6) - c) / (leak_ec(1e6, 1.0, h, 1e-6) - c), 1.2, 1e-12);
    EXPECT_THROW(leak_ec(1e6, 0.9, h, 1e-6), InvalidInput);
    EXPECT_THROW(leak_ec(1e6, 1.2, -0.1, 1e-6), InvalidInput);
}

TEST(KeyLength, Examples) {
    const auto t = key_length(1000, 1.0, 0.1, 100, 0.25e-8);
    EXPECT_NEAR(t.pa_term, 59.15, 5e-3);
    EXPECT_EQ(t.ell, 740.0);
    EXPECT_EQ(key_length(1000, 0.1, 0.2, 0, 0.25e-8).ell, 0.0);
    EXPECT_EQ(key_length(1000, 1.0, 0.0, 1e9, 0.25e-8).ell, 0.0);
    EXPECT_EQ(key_length(1000, 1.0, 0.1, 100, 0.25e-8, 1e6).ell, 0.0);
}

TEST(KeyLength, Monotone) {
    Rng rng(9);
    for (int t = 0; t < 200; ++t) {
        const double n = std::pow(10.0, rng.uniform(3, 12));
        const double H = rng.uniform(0, 1), d = rng.uniform(0, 0.1), leak = rng.uniform(0, 0.5) * n;
        const double l = key_length(n, H, d, leak, 1e-9).ell;
        EXPECT_GE(l, 0.0);
        EXPECT_EQ(l, std::floor(l));
        EXPECT_LE(key_length(n, H, d + 0.01, leak, 1e-9).ell, l);
        EXPECT_LE(key_length(n, H, d, leak * 1.1 + 1, 1e-9).ell, l);
        EXPECT_GE(key_length(n, H + 0.01, d, leak, 1e-9).ell, l);
    }
}

TEST(Coherent, ROracle) {
    const double N = 1e12, m = 1e10, k = 1e11, b = 1.0;
    const double n = (N - m - k) / b;
    const double r = coherent_r(N, n, m, k, b, 1e-8, 4);
    const long double o = r_oracle(N, n, m, k, b, 1e-8L, 4);
    EXPECT_LE(std::abs(r - double(o)) / double(o), 1e-9);
    // frozen value of the oracle
    EXPECT_NEAR(r, 4433.8263, 1e-3);
}

TEST(Coherent, RDecreasesInK) {
    const double N = 1e12, m = 1e9;
    double prev = INFINITY;
    for (double k = 1e6; k < 5e11; k *= 4) {
        const double r = coherent_r(N, N - m - k, m, k, 1.0, 1e-8, 4);
        EXPECT_LT(r, prev);
        prev = r;
    }
}

TEST(Coherent, RejectsRAboveN) {
    // tiny k leaves r far above N
    const double N = 1e4, m = 100, k = 1;
    EXPECT_THROW(coherent_params(N, N - m - k, m, k, 1.0, 1e-8, 1e-8, 1e-8, 4, 16), InvalidInput);
    EXPECT_THROW(coherent_r(N, N - m - k - 5, m, k, 1.0, 1e-8, 4), InvalidInput);
    EXPECT_THROW(coherent_r(N, N - m - 0.5, m, 0.5, 1.0, 1e-8, 4), InvalidInput);
}

TEST(Coherent, ParamsFormulas) {
    const double N = 1e12, m = 1e10, k = 1e11;
    const double n = N - m - k;
    const auto c = coherent_params(N, n, m, k, 1.0, 1e-8, 1e-9, 1e-9, 4, 16);
    const double r = c.r;
    auto h = [](double x) { return x >= 0.5 ? 1.0 : -x * std::log2(x) - (1 - x) * std::log2(1 - x); };
    EXPECT_NEAR(c.mu, 2.0 * std::sqrt(h(r / m) + (std::log2(1e9) + 16 * std::log2(m / 2 + 1)) / m), 1e-14);
    EXPECT_NEAR(c.delta, 6.5 * std::sqrt(h(r / n) + 2.0 / n * std::log2(4e9)), 1e-14);
    EXPECT_EQ(c.penalty, 2.0 * (m + k) * 2.0);
    // coherent corrections dominate the collective ones on the same inputs
    EXPECT_GT(c.mu, variation_bound_mu(1e-9, 16, m));
    EXPECT_GT(c.delta, delta_bar(1e-9, 2, n));
}

TEST(GpeSchedule, Values) {
    EXPECT_EQ(g_pe_schedule("L20", 1e10), 0.99);
    EXPECT_NEAR(g_pe_schedule("L20", 1e12), 0.11 + std::pow(0.5, 3.0), 1e-15);
    EXPECT_EQ(g_pe_schedule("L100", 1e14), 0.99);
    EXPECT_THROW(g_pe_schedule("L50", 1e12), InvalidInput);
}

TEST(EpsilonBudget, Validation) {
    EpsilonBudget b;
    EXPECT_NO_THROW(b.validate());
    EXPECT_NEAR(b.total(), 1e-8, 1e-22);
    EXPECT_THROW(b.validate(true), InvalidInput);
    b.qdf = 1e-8;
    EXPECT_NO_THROW(b.validate(true));
    b.pe = -1e-9;
    EXPECT_THROW(b.validate(), InvalidInput);
}
