#include "finkey/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace finkey {

namespace {

CMat proj(int d, int i) { return projector(ket(d, i)); }

CMat plus_ket() {
    CMat v(2, 1);
    v << 1.0, 1.0;
    return v / std::sqrt(2.0);
}

CMat minus_ket() {
    CMat v(2, 1);
    v << 1.0, -1.0;
    return v / std::sqrt(2.0);
}

const std::vector<std::string> kBb84Symbols{"0", "1", "+", "-"};

}  // namespace

void Povm::validate(double tol) const {
    if (elements.empty()) throw InvalidInput("Povm: no elements");
    if (labels.size() != elements.size()) throw InvalidInput("Povm: label count differs from element count");
    const int d = dim();
    CMat sum = CMat::Zero(d, d);
    for (const auto& e : elements) {
        if (e.rows() != d || e.cols() != d) throw InvalidInput("Povm: element dimensions differ");
        require_hermitian(e, "Povm");
        if (min_eigenvalue(e) < -tol) throw InvalidInput("Povm: element is not PSD");
        sum += e;
    }
    if ((sum - CMat::Identity(d, d)).cwiseAbs().maxCoeff() > tol)
        throw InvalidInput("Povm: elements do not sum to the identity");
}

void CoarseGraining::validate(int src) const {
    if (table.cols() != src) throw InvalidInput("coarse-graining '" + name + "': source alphabet mismatch");
    if (static_cast<int>(target.size()) != table.rows())
        throw InvalidInput("coarse-graining '" + name + "': target label count mismatch");
    if ((table.array() < 0.0).any()) throw InvalidInput("coarse-graining '" + name + "': negative entry");
    for (int j = 0; j < table.cols(); ++j)
        if (std::abs(table.col(j).sum() - 1.0) > 1e-12)
            throw InvalidInput("coarse-graining '" + name + "': column is not stochastic");
}

Povm CoarseGraining::effective(const Povm& fine) const {
    validate(fine.size());
    Povm out;
    out.labels = target;
    for (int i = 0; i < table.rows(); ++i) {
        CMat e = CMat::Zero(fine.dim(), fine.dim());
        for (int j = 0; j < table.cols(); ++j)
            if (table(i, j) != 0.0) e += table(i, j) * fine.elements[j];
        out.elements.push_back(e);
    }
    return out;
}

CoarseGraining CoarseGraining::identity(const std::vector<std::string>& labels, std::string name) {
    CoarseGraining cg;
    cg.name = std::move(name);
    cg.target = labels;
    cg.table = RMat::Identity(labels.size(), labels.size());
    return cg;
}

CoarseGraining CoarseGraining::grouping(std::string name, std::vector<std::string> labels, const std::vector<int>& group) {
    CoarseGraining cg;
    cg.name = std::move(name);
    cg.table = RMat::Zero(labels.size(), group.size());
    for (size_t j = 0; j < group.size(); ++j) {
        if (group[j] < 0 || group[j] >= static_cast<int>(labels.size()))
            throw InvalidInput("coarse-graining '" + cg.name + "': group index out of range");
        cg.table(group[j], j) = 1.0;
    }
    cg.target = std::move(labels);
    return cg;
}

void AcceptanceSet::validate(int src) const {
    if (reference.size() != src) throw InvalidInput("acceptance set: reference distribution has wrong size");
    if ((reference.array() < 0.0).any()) throw InvalidInput("acceptance set: negative reference entry");
    if (std::abs(reference.sum() - 1.0) > 1e-9) throw InvalidInput("acceptance set: reference does not sum to 1");
    if (threshold < 0.0) throw InvalidInput("acceptance set: negative threshold");
    abort_map.validate(src);
}

int ProtocolModel::dim() const {
    int p = 1;
    for (int d : dims) p *= d;
    return p;
}

void ProtocolModel::validate() const {
    fine_povm.validate();
    if (fine_povm.dim() != dim()) throw InvalidInput("protocol: POVM dimension does not match subsystem dims");
    bool has_norm = false;
    for (const auto& c : certainty) {
        if (c.op.rows() != dim()) throw InvalidInput("protocol: certainty operator has wrong dimension");
        require_hermitian(c.op, "certainty constraint");
        if ((c.op - CMat::Identity(dim(), dim())).cwiseAbs().maxCoeff() < 1e-12 && std::abs(c.value - 1.0) < 1e-12)
            has_norm = true;
    }
    if (!has_norm) throw InvalidInput("protocol: certainty constraints lack the normalisation pair");
    if (coarse_grainings.empty()) throw InvalidInput("protocol: at least one coarse-graining is required");
    for (const auto& cg : coarse_grainings) cg.validate(fine_povm.size());
    if (acceptance) acceptance->validate(fine_povm.size());
    postproc.validate();
    if (postproc.input_dim() != dim()) throw InvalidInput("protocol: post-processing input dimension mismatch");
    if (key_alphabet_size < 2) throw InvalidInput("protocol: key alphabet below 2");
    if (!key_rounds.empty() &&
        (static_cast<int>(key_rounds.alice.size()) != fine_povm.size() || key_rounds.bob.size() != key_rounds.alice.size()))
        throw InvalidInput("protocol: key-round table has wrong size");
    if (!(sift_factor > 0.0 && sift_factor <= 1.0)) throw InvalidInput("protocol: sift factor outside (0,1]");
}

std::vector<ObservableConstraint> marginal_constraints(const CMat& rho_A, int rest_dim) {
    const int da = static_cast<int>(rho_A.rows());
    const CMat id_rest = identity(rest_dim);
    std::vector<ObservableConstraint> out;
    out.push_back({identity(da * rest_dim), 1.0});
    const auto basis = hermitian_basis(da);
    for (size_t i = 1; i < basis.size(); ++i) out.push_back({kron(basis[i], id_rest), inner(basis[i], rho_A)});
    return out;
}

static void check_probs(const std::vector<double>& probs, size_t count) {
    if (probs.size() != count) throw InvalidInput("source_replace: probability count mismatch");
    double s = 0.0;
    for (double p : probs) {
        if (p < 0.0) throw InvalidInput("source_replace: negative probability");
        s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) throw InvalidInput("source_replace: probabilities do not sum to 1");
}

SourceReplacement source_replace(const std::vector<CVec>& states, const std::vector<double>& probs) {
    if (states.empty()) throw InvalidInput("source_replace: no signal states");
    check_probs(probs, states.size());
    const int dim = static_cast<int>(states.front().size());
    for (const auto& s : states) {
        if (s.size() != dim) throw InvalidInput("source_replace: signal dimensions differ");
        if (std::abs(s.norm() - 1.0) > 1e-9) throw InvalidInput("source_replace: signal state is not normalised");
    }
    // Gram-Schmidt in the order given, skipping states that are never sent
    std::vector<CVec> basis;
    for (size_t j = 0; j < states.size(); ++j) {
        if (probs[j] == 0.0) continue;
        CVec v = states[j];
        for (const auto& b : basis) v -= b.dot(v) * b;
        const double nv = v.norm();
        if (nv > 1e-10) basis.push_back(v / nv);
    }
    const int r = static_cast<int>(basis.size());
    CMat B(dim, r);
    for (int i = 0; i < r; ++i) B.col(i) = basis[i];
    CMat rho_p = CMat::Zero(r, r);
    std::vector<CVec> coef;
    for (size_t j = 0; j < states.size(); ++j) {
        coef.push_back(B.adjoint() * states[j]);
        rho_p += probs[j] * coef.back() * coef.back().adjoint();
    }
    rho_p = hermitian_part(rho_p);
    const Eig e = eig_hermitian(rho_p);
    const CMat inv_sqrt = spectral_apply(e, [](double l) { return l > 1e-14 ? 1.0 / std::sqrt(l) : 0.0; });

    SourceReplacement out;
    out.alice_dim = r;
    out.rho_A = rho_p.conjugate();
    for (size_t j = 0; j < states.size(); ++j) {
        CMat m = probs[j] * inv_sqrt * coef[j] * coef[j].adjoint() * inv_sqrt;
        out.alice_povm.push_back(hermitian_part(m).conjugate());
    }
    out.constraints = marginal_constraints(out.rho_A, 1);
    return out;
}

SourceReplacement source_replace_gram(const CMat& gram, const std::vector<double>& probs) {
    const int n = static_cast<int>(gram.rows());
    if (n == 0 || gram.cols() != n) throw InvalidInput("source_replace_gram: Gram matrix must be square");
    check_probs(probs, n);
    for (int i = 0; i < n; ++i)
        if (std::abs(gram(i, i) - 1.0) > 1e-9) throw InvalidInput("source_replace_gram: signal state is not normalised");
    SourceReplacement out;
    out.alice_dim = n;
    out.rho_A = CMat(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out.rho_A(i, j) = std::sqrt(probs[i] * probs[j]) * gram(j, i);
    out.rho_A = hermitian_part(out.rho_A);
    for (int j = 0; j < n; ++j) out.alice_povm.push_back(proj(n, j));
    out.constraints = marginal_constraints(out.rho_A, 1);
    return out;
}

CMat phase_error_projector() {
    CMat x(2, 2);
    x << 0.0, 1.0, 1.0, 0.0;
    return 0.5 * (identity(4) - kron(x, x));
}

Povm bb84_local_povm(double p_z) {
    Povm p;
    p.labels = kBb84Symbols;
    p.elements = {p_z * proj(2, 0), p_z * proj(2, 1), (1.0 - p_z) * projector(plus_ket()),
                  (1.0 - p_z) * projector(minus_ket())};
    return p;
}

Povm bb84_fine_povm(double p_z) {
    const Povm local = bb84_local_povm(p_z);
    Povm p;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            p.labels.push_back(kBb84Symbols[a] + "," + kBb84Symbols[b]);
            p.elements.push_back(kron(local.elements[a], local.elements[b]));
        }
    return p;
}

PostProcessingMap bb84_postproc(double p_z, bool compress) {
    const CMat I2 = identity(2);
    const CMat k0 = ket(2, 0), k1 = ket(2, 1);
    const double sz = std::sqrt(p_z), sx = std::sqrt(1.0 - p_z);
    // A -> A (x) public (x) private
    const CMat KAZ = sz * kron({proj(2, 0), k0, k0}) + sz * kron({proj(2, 1), k0, k1});
    const CMat KAX = sx * kron({projector(plus_ket()), k1, k0}) + sx * kron({projector(minus_ket()), k1, k1});
    const CMat KBZ = KAZ;
    const CMat KBX = KAX;
    // sifting on the public registers, ordering A At Ab B Bt Bb
    CMat Pi = CMat::Zero(64, 64);
    for (int s = 0; s < 2; ++s) Pi += kron({I2, proj(2, s), I2, I2, proj(2, s), I2});
    // key map on Alice's private Z outcome, output R A At Ab B Bt Bb
    CMat V = CMat::Zero(128, 64);
    for (int r = 0; r < 2; ++r) V += kron({ket(2, r), I2, proj(2, 0), proj(2, r), I2, proj(2, 0), I2});

    PostProcessingMap g;
    for (const CMat* a : {&KAZ, &KAX})
        for (const CMat* b : {&KBZ, &KBX}) {
            CMat k = V * Pi * kron(*a, *b);
            if (k.cwiseAbs().maxCoeff() > 0.0) g.kraus.push_back(k);
        }
    std::vector<int> b0, b1;
    for (int i = 0; i < 64; ++i) {
        b0.push_back(i);
        b1.push_back(64 + i);
    }
    g.pinching_blocks = {b0, b1};
    g.key_alphabet_size = 2;
    return compress ? compress_output(g) : g;
}

PostProcessingMap mdi_postproc(bool compress) {
    const CMat I2 = identity(2);
    PostProcessingMap g;
    for (int c = 0; c < 2; ++c) {
        CMat flag = ket(2, c) * ket(3, c).adjoint();  // success outcome c kept as a classical flag
        CMat k = CMat::Zero(16, 12);
        for (int r = 0; r < 2; ++r) k += kron({ket(2, r), proj(2, r), I2, flag});
        g.kraus.push_back(k);
    }
    std::vector<int> b0, b1;
    for (int i = 0; i < 8; ++i) {
        b0.push_back(i);
        b1.push_back(8 + i);
    }
    g.pinching_blocks = {b0, b1};
    return compress ? compress_output(g) : g;
}

static CMat dpr_alice_proj(int c, int n) {
    CMat p = CMat::Zero(4 * c, 4 * c);
    for (int k = 0; k < c; ++k) p(4 * k + n, 4 * k + n) = 1.0;
    return p;
}

PostProcessingMap dpr_postproc(int c, double p_z, bool compress) {
    CMat qubit = CMat::Zero(3, 3);
    qubit(0, 0) = qubit(1, 1) = 1.0;
    const int dout = 2 * 4 * c * 3 * 2;
    CMat kz = CMat::Zero(dout, 12 * c), kx = CMat::Zero(dout, 12 * c);
    for (int r = 0; r < 2; ++r) {
        kz += kron({ket(2, r), dpr_alice_proj(c, r), std::sqrt(p_z) * qubit, ket(2, 0)});
        kx += kron({ket(2, r), dpr_alice_proj(c, 2 + r), std::sqrt(1.0 - p_z) * qubit, ket(2, 1)});
    }
    PostProcessingMap g;
    g.kraus = {kz, kx};
    std::vector<int> b0, b1;
    for (int i = 0; i < dout / 2; ++i) {
        b0.push_back(i);
        b1.push_back(dout / 2 + i);
    }
    g.pinching_blocks = {b0, b1};
    return compress ? compress_output(g) : g;
}

Povm dpr_bob_povm() {
    Povm p;
    p.labels = {"Z0", "Z1", "X+", "X-", "vac"};
    auto embed = [](const CMat& q) {
        CMat m = CMat::Zero(3, 3);
        m.topLeftCorner(2, 2) = q;
        return m;
    };
    p.elements = {embed(0.5 * proj(2, 0)), embed(0.5 * proj(2, 1)), embed(0.5 * projector(plus_ket())),
                  embed(0.5 * projector(minus_ket())), proj(3, 2)};
    return p;
}

static const double kDprPhase[4] = {0.0, M_PI, M_PI / 2.0, 3.0 * M_PI / 2.0};

CMat dpr_gram(int c, double nu) {
    if (c < 1) throw InvalidInput("dpr: c must be at least 1");
    if (nu < 0.0) throw InvalidInput("dpr: intensity must be nonnegative");
    const int n = 4 * c;
    std::vector<cplx> ar(n), as(n);
    for (int k = 0; k < c; ++k)
        for (int j = 0; j < 4; ++j) {
            const double th = 2.0 * M_PI * k / c;
            ar[4 * k + j] = std::polar(std::sqrt(nu), th);
            as[4 * k + j] = std::polar(std::sqrt(nu), th + kDprPhase[j]);
        }
    // <a|b> = exp(-|a|^2/2 - |b|^2/2 + conj(a) b) per mode
    auto ov = [](cplx a, cplx b) { return std::exp(-0.5 * std::norm(a) - 0.5 * std::norm(b) + std::conj(a) * b); };
    CMat g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g(i, j) = ov(ar[i], ar[j]) * ov(as[i], as[j]);
    return g;
}

std::vector<double> dpr_signal_probs(int c, double p_z) {
    std::vector<double> p;
    for (int k = 0; k < c; ++k)
        for (int j = 0; j < 4; ++j) p.push_back((j < 2 ? p_z / 2.0 : (1.0 - p_z) / 2.0) / c);
    return p;
}

static void check_pz(double p_z) {
    if (!(p_z > 0.0 && p_z < 1.0)) throw InvalidInput("protocol: p_z must lie in (0,1)");
}

static ProtocolModel build_bb84(const ProtocolSpec& spec) {
    check_pz(spec.p_z);
    ProtocolModel m;
    m.name = spec.preset;
    m.dims = {2, 2};
    std::vector<CVec> states(4);
    for (int j = 0; j < 2; ++j) states[j] = ket(2, j).col(0);
    states[2] = plus_ket().col(0);
    states[3] = minus_ket().col(0);
    const double pz = spec.p_z;
    const auto sr = source_replace(states, {pz / 2, pz / 2, (1 - pz) / 2, (1 - pz) / 2});
    m.certainty = marginal_constraints(sr.rho_A, 2);
    m.postproc = bb84_postproc(pz);

    if (spec.povm == "phase") {
        const CMat pe = phase_error_projector();
        m.fine_povm.labels = {"err", "ok"};
        m.fine_povm.elements = {pe, identity(4) - pe};
        for (const auto& n : spec.coarse_grainings)
            if (n != "fine" && n != "phase")
                throw InvalidInput("bb84 with the two-outcome phase POVM supports only the phase coarse-graining");
        m.coarse_grainings = {CoarseGraining::identity(m.fine_povm.labels, "phase")};
        return m;
    }
    if (spec.povm != "fine") throw InvalidInput("bb84: unknown povm '" + spec.povm + "'");
    m.fine_povm = bb84_fine_povm(pz);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            const bool key = a < 2 && b < 2;
            m.key_rounds.alice.push_back(key ? a : -1);
            m.key_rounds.bob.push_back(key ? b : -1);
        }
    for (const auto& n : spec.coarse_grainings) {
        if (n == "fine") {
            m.coarse_grainings.push_back(CoarseGraining::identity(m.fine_povm.labels));
        } else if (n == "phase") {
            std::vector<int> g(16, 1);
            g[4 * 2 + 3] = 0;
            g[4 * 3 + 2] = 0;
            m.coarse_grainings.push_back(CoarseGraining::grouping("phase", {"err", "ok"}, g));
        } else if (n == "agreement") {
            std::vector<int> g(16, 4);
            for (int a = 0; a < 4; ++a) g[4 * a + a] = a;
            m.coarse_grainings.push_back(CoarseGraining::grouping("agreement", {"0,0", "1,1", "+,+", "-,-", "else"}, g));
        } else {
            throw InvalidInput("bb84: unknown coarse-graining '" + n + "'");
        }
    }
    return m;
}

static ProtocolModel build_mdi(const ProtocolSpec& spec) {
    check_pz(spec.p_z);
    ProtocolModel m;
    m.name = spec.preset;
    m.dims = {2, 2, 3};
    const Povm local = bb84_local_povm(spec.p_z);
    const std::vector<std::string> cl{"psi+", "psi-", "fail"};
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 3; ++c) {
                m.fine_povm.labels.push_back(local.labels[a] + "," + local.labels[b] + "," + cl[c]);
                m.fine_povm.elements.push_back(kron({local.elements[a], local.elements[b], proj(3, c)}));
                const bool key = a < 2 && b < 2 && c < 2;
                m.key_rounds.alice.push_back(key ? a : -1);
                m.key_rounds.bob.push_back(key ? b + 2 * c : -1);
            }
    m.certainty = marginal_constraints(identity(4) / 4.0, 3);
    m.postproc = mdi_postproc();
    m.sift_factor = spec.p_z * spec.p_z;
    for (const auto& n : spec.coarse_grainings)
        if (n != "fine") throw InvalidInput("mdi-bb84: only the fine coarse-graining is available");
    m.coarse_grainings = {CoarseGraining::identity(m.fine_povm.labels)};
    return m;
}

static ProtocolModel build_dpr(const ProtocolSpec& spec) {
    check_pz(spec.p_z);
    if (spec.c < 1) throw InvalidInput("dpr-bb84: c must be at least 1");
    if (!(spec.nu > 0.0)) throw InvalidInput("dpr-bb84: intensity must be positive");
    ProtocolModel m;
    m.name = spec.preset;
    const int c = spec.c;
    m.dims = {4 * c, 3};
    const auto sr = source_replace_gram(dpr_gram(c, spec.nu), dpr_signal_probs(c, spec.p_z));
    m.certainty = marginal_constraints(sr.rho_A, 3);
    const Povm bob = dpr_bob_povm();
    for (int j = 0; j < 4 * c; ++j)
        for (int b = 0; b < 5; ++b) {
            m.fine_povm.labels.push_back(std::to_string(j / 4) + "." + std::to_string(j % 4) + "," + bob.labels[b]);
            m.fine_povm.elements.push_back(kron(sr.alice_povm[j], bob.elements[b]));
            const int n = j % 4;
            int a = -1, y = -1;
            if (n < 2 && b < 2) {
                a = n;
                y = b;
            } else if (n >= 2 && b >= 2 && b < 4) {
                a = n - 2;
                y = b;
            }
            m.key_rounds.alice.push_back(a);
            m.key_rounds.bob.push_back(y);
        }
    m.postproc = dpr_postproc(c, spec.p_z);
    for (const auto& n : spec.coarse_grainings)
        if (n != "fine") throw InvalidInput("dpr-bb84: only the fine coarse-graining is available");
    m.coarse_grainings = {CoarseGraining::identity(m.fine_povm.labels)};
    return m;
}

ProtocolModel build_protocol(const ProtocolSpec& spec) {
    ProtocolModel m;
    if (spec.preset == "bb84" || spec.preset == "bb84-rotated")
        m = build_bb84(spec);
    else if (spec.preset == "mdi-bb84")
        m = build_mdi(spec);
    else if (spec.preset == "dpr-bb84")
        m = build_dpr(spec);
    else if (spec.preset == "custom") {
        if (!spec.custom) throw InvalidInput("custom protocol requires an explicit model");
        m = *spec.custom;
    } else
        throw InvalidInput("unknown protocol preset '" + spec.preset + "'");
    m.validate();
    return m;
}

Distribution probability_map(const CMat& rho, const Povm& povm) {
    if (rho.rows() != povm.dim() || rho.cols() != povm.dim())
        throw InvalidInput("probability_map: dimension mismatch");
    Distribution p(povm.size());
    for (int j = 0; j < povm.size(); ++j) {
        double v = inner(povm.elements[j], rho);
        if (v < 0.0) {
            if (v < -1e-10) throw DomainError("probability_map: negative probability; state is not PSD");
            v = 0.0;
        }
        p(j) = v;
    }
    return p;
}

Distribution probability_map(const DensityOperator& rho, const Povm& povm) {
    return probability_map(rho.matrix, povm);
}

Distribution coarse_grain(const Distribution& dist, const CoarseGraining& cg) {
    if (dist.size() != cg.source_size()) throw InvalidInput("coarse_grain: alphabet mismatch");
    return cg.table * dist;
}

double conditional_entropy_xy(const Distribution& dist, const KeyRoundTable& table) {
    if (table.empty()) throw InvalidInput("conditional_entropy_xy: protocol has no key-round table");
    if (static_cast<int>(table.alice.size()) != dist.size()) throw InvalidInput("conditional_entropy_xy: size mismatch");
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> bob;
    double total = 0.0;
    for (int j = 0; j < dist.size(); ++j) {
        if (table.alice[j] < 0) continue;
        const double p = std::max(0.0, dist(j));
        joint[{table.alice[j], table.bob[j]}] += p;
        bob[table.bob[j]] += p;
        total += p;
    }
    if (total <= 0.0) return 0.0;
    auto ent = [total](double p) { return p > 0.0 ? -(p / total) * std::log2(p / total) : 0.0; };
    double hxy = 0.0, hy = 0.0;
    for (const auto& [k, p] : joint) hxy += ent(p);
    for (const auto& [k, p] : bob) hy += ent(p);
    return std::max(0.0, hxy - hy);
}

}  // namespace finkey
