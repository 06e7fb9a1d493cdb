#include "finkey/channel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "finkey/random.hpp"

namespace finkey {

double ChannelParams::transmittance() const { return std::pow(10.0, -alpha_att * L / 10.0); }

void ChannelParams::validate() const {
    auto prob = [](double v, const char* n) {
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput(std::string("channel: ") + n + " must lie in [0,1]");
    };
    prob(q, "q");
    prob(eta_d, "eta_d");
    prob(p_d, "p_d");
    prob(double_click_to_first, "double_click_to_first");
    if (!(L >= 0.0)) throw InvalidInput("channel: L must be nonnegative");
    if (!(alpha_att >= 0.0)) throw InvalidInput("channel: alpha_att must be nonnegative");
    if (!(nu >= 0.0)) throw InvalidInput("channel: nu must be nonnegative");
    if (c < 1) throw InvalidInput("channel: c must be at least 1");
    if (!std::isfinite(theta) || !std::isfinite(zeta)) throw InvalidInput("channel: angles must be finite");
}

CMat apply_local(const CMat& rho, const std::vector<CMat>& kraus, const std::vector<int>& dims, int target) {
    if (target < 0 || target >= static_cast<int>(dims.size())) throw InvalidInput("channel: target out of range");
    long before = 1, after = 1;
    for (int i = 0; i < target; ++i) before *= dims[i];
    for (size_t i = target + 1; i < dims.size(); ++i) after *= dims[i];
    if (rho.rows() != before * dims[target] * after) throw InvalidInput("channel: dims do not match state");
    CMat out = CMat::Zero(rho.rows(), rho.cols());
    for (const auto& k : kraus) {
        if (k.rows() != dims[target]) throw InvalidInput("channel: Kraus operator size mismatch");
        const CMat full = kron({identity(before), k, identity(after)});
        out += full * rho * full.adjoint();
    }
    return hermitian_part(out);
}

static std::vector<CMat> paulis() {
    CMat x(2, 2), y(2, 2), z(2, 2);
    x << 0, 1, 1, 0;
    y << 0, cplx(0, -1), cplx(0, 1), 0;
    z << 1, 0, 0, -1;
    return {identity(2), x, y, z};
}

CMat depolarize(const CMat& rho, double q, const std::vector<int>& dims, int target) {
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidInput("depolarize: q must lie in [0,1]");
    if (dims.at(target) != 2) throw InvalidInput("depolarize: target is not a qubit");
    const auto p = paulis();
    const double w[4] = {1.0 - 0.75 * q, 0.25 * q, 0.25 * q, 0.25 * q};
    std::vector<CMat> k;
    for (int i = 0; i < 4; ++i) k.push_back(std::sqrt(w[i]) * p[i]);
    return apply_local(rho, k, dims, target);
}

CMat rotate_y(const CMat& rho, double theta, const std::vector<int>& dims, int target) {
    if (dims.at(target) != 2) throw InvalidInput("rotate_y: target is not a qubit");
    // exp(i theta sigma_Y) = cos(theta) I + i sin(theta) sigma_Y
    CMat u(2, 2);
    u << std::cos(theta), std::sin(theta), -std::sin(theta), std::cos(theta);
    return apply_local(rho, {u}, dims, target);
}

DensityOperator depolarize(const DensityOperator& rho, double q, int target) {
    return DensityOperator(depolarize(rho.matrix, q, rho.dims, target), rho.dims, rho.relaxed_trace);
}

DensityOperator rotate_y(const DensityOperator& rho, double theta, int target) {
    return DensityOperator(rotate_y(rho.matrix, theta, rho.dims, target), rho.dims, rho.relaxed_trace);
}

CMat bell_phi_plus() {
    CMat v = CMat::Zero(4, 1);
    v(0, 0) = v(3, 0) = 1.0 / std::sqrt(2.0);
    return projector(v);
}

CMat bb84_channel_state(double q, double theta) {
    return rotate_y(depolarize(bell_phi_plus(), q, {2, 2}, 1), theta, {2, 2}, 1);
}

CMat mdi_channel_state(double q) {
    // registers A A' B B'
    CMat rho = kron(bell_phi_plus(), bell_phi_plus());
    const std::vector<int> dims{2, 2, 2, 2};
    rho = depolarize(rho, q, dims, 1);
    rho = depolarize(rho, q, dims, 3);
    CMat psi_p = CMat::Zero(4, 1), psi_m = CMat::Zero(4, 1);
    psi_p(1, 0) = psi_p(2, 0) = 1.0 / std::sqrt(2.0);
    psi_m(1, 0) = 1.0 / std::sqrt(2.0);
    psi_m(2, 0) = -1.0 / std::sqrt(2.0);
    const CMat m0 = projector(psi_p), m1 = projector(psi_m);
    const std::vector<CMat> meas{m0, m1, identity(4) - m0 - m1};
    // <a a' b b'| -> index of (a, b) and (a', b')
    CMat out = CMat::Zero(12, 12);
    for (int c = 0; c < 3; ++c) {
        CMat blk = CMat::Zero(4, 4);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (int a2 = 0; a2 < 2; ++a2)
                    for (int b2 = 0; b2 < 2; ++b2)
                        for (int x = 0; x < 2; ++x)
                            for (int y = 0; y < 2; ++y)
                                for (int x2 = 0; x2 < 2; ++x2)
                                    for (int y2 = 0; y2 < 2; ++y2) {
                                        // Tr_{A'B'}[(I (x) M_c) rho]: sum over primed indices
                                        const cplx mc = meas[c](x2 * 2 + y2, x * 2 + y);
                                        if (mc == 0.0) continue;
                                        const int row = a * 8 + x * 4 + b * 2 + y;
                                        const int col = a2 * 8 + x2 * 4 + b2 * 2 + y2;
                                        blk(a * 2 + b, a2 * 2 + b2) += mc * rho(row, col);
                                    }
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) out(i * 3 + c, j * 3 + c) = blk(i, j);
    }
    return hermitian_part(out);
}

DprClicks dpr_clicks(const ChannelParams& ch, double phi_a, double phi_b) {
    // mean photon number reaching each detector after the 50/50 beam splitter
    const double base = ch.transmittance() * ch.eta_d * ch.nu;
    const double rel = phi_a + ch.zeta - phi_b;
    const double n1 = base * (1.0 + std::cos(rel));
    const double n2 = base * (1.0 - std::cos(rel));
    const double q1 = (1.0 - ch.p_d) * std::exp(-n1);  // no click at detector 1
    const double q2 = (1.0 - ch.p_d) * std::exp(-n2);
    DprClicks r;
    r.none = q1 * q2;
    r.first = (1.0 - q1) * q2;
    r.second = q1 * (1.0 - q2);
    r.both = (1.0 - q1) * (1.0 - q2);
    return r;
}

Distribution simulate_dpr_statistics(const ChannelParams& ch, double p_z) {
    ch.validate();
    if (!(p_z > 0.0 && p_z < 1.0)) throw InvalidInput("simulate_dpr_statistics: p_z must lie in (0,1)");
    static const double phase[4] = {0.0, M_PI, M_PI / 2.0, 3.0 * M_PI / 2.0};
    const auto probs = dpr_signal_probs(ch.c, p_z);
    const double w1 = ch.double_click_to_first;
    Distribution d = Distribution::Zero(20 * ch.c);
    for (int j = 0; j < 4 * ch.c; ++j) {
        const double pa = probs[j];
        const double phi = phase[j % 4];
        const DprClicks z = dpr_clicks(ch, phi, 0.0);
        const DprClicks x = dpr_clicks(ch, phi, M_PI / 2.0);
        // Bob picks each basis with probability 1/2
        d(5 * j + 0) = pa * 0.5 * (z.first + w1 * z.both);
        d(5 * j + 1) = pa * 0.5 * (z.second + (1.0 - w1) * z.both);
        d(5 * j + 2) = pa * 0.5 * (x.first + w1 * x.both);
        d(5 * j + 3) = pa * 0.5 * (x.second + (1.0 - w1) * x.both);
        d(5 * j + 4) = pa * 0.5 * (z.none + x.none);
    }
    return d;
}

FrequencyDistribution sample_frequency(const Distribution& dist, std::uint64_t m, std::uint64_t seed,
                                       const std::vector<std::string>& alphabet) {
    if (m == 0) throw InvalidInput("sample_frequency: m must be at least 1");
    if ((dist.array() < 0.0).any()) throw InvalidInput("sample_frequency: negative probability");
    const double total = dist.sum();
    if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("sample_frequency: distribution does not sum to 1");
    Rng rng(seed);
    // sequential conditional binomials, each drawn by inversion of the pmf;
    // the walk starts ten standard deviations below the mean where the
    // neglected lower tail is below 1e-21
    auto binomial = [&rng](std::uint64_t n, double p) -> std::uint64_t {
        if (n == 0 || p <= 0.0) return 0;
        if (p >= 1.0) return n;
        const bool flip = p > 0.5;
        const double pp = flip ? 1.0 - p : p, qq = 1.0 - pp;
        const double nd = static_cast<double>(n);
        const double sd = std::sqrt(nd * pp * qq);
        const double lo = std::max(0.0, std::floor(nd * pp - 10.0 * sd - 10.0));
        double f = std::exp(std::lgamma(nd + 1.0) - std::lgamma(lo + 1.0) - std::lgamma(nd - lo + 1.0) +
                            lo * std::log(pp) + (nd - lo) * std::log(qq));
        const double u = rng.uniform();
        double cdf = f;
        std::uint64_t k = static_cast<std::uint64_t>(lo);
        while (u > cdf && k < n) {
            f *= (static_cast<double>(n - k) / static_cast<double>(k + 1)) * (pp / qq);
            ++k;
            cdf += f;
        }
        return flip ? n - k : k;
    };
    FrequencyDistribution f;
    f.alphabet = alphabet;
    f.m = static_cast<double>(m);
    f.counts.assign(dist.size(), 0);
    std::uint64_t left = m;
    double mass = 1.0;
    for (int j = 0; j < dist.size(); ++j) {
        if (left == 0) break;
        if (j == dist.size() - 1) {
            f.counts[j] = left;
            break;
        }
        const double p = mass > 0.0 ? std::min(1.0, dist(j) / mass) : 0.0;
        const std::uint64_t k = binomial(left, p);
        f.counts[j] = k;
        left -= k;
        mass -= dist(j);
    }
    f.freq.resize(dist.size());
    for (int j = 0; j < dist.size(); ++j) f.freq(j) = static_cast<double>(f.counts[j]) / static_cast<double>(m);
    return f;
}

FrequencyDistribution load_frequency_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open statistics file " + path);
    FrequencyDistribution f;
    std::vector<double> vals;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos)
            throw InvalidInput(path + ":" + std::to_string(lineno) + ": expected 'label,frequency'");
        const std::string label = line.substr(0, comma);
        const std::string num = line.substr(comma + 1);
        char* end = nullptr;
        const double v = std::strtod(num.c_str(), &end);
        if (end == num.c_str()) {
            if (lineno == 1) continue;  // header
            throw InvalidInput(path + ":" + std::to_string(lineno) + ": bad frequency '" + num + "'");
        }
        if (v < 0.0) throw InvalidInput(path + ":" + std::to_string(lineno) + ": negative frequency");
        f.alphabet.push_back(label);
        vals.push_back(v);
    }
    if (vals.empty()) throw InvalidInput(path + ": no statistics found");
    f.freq = Eigen::Map<RVec>(vals.data(), vals.size());
    const double s = f.freq.sum();
    if (!(s > 0.0)) throw InvalidInput(path + ": frequencies sum to zero");
    f.freq /= s;
    return f;
}

}  // namespace finkey
