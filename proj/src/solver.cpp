#include "finkey/keyrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/QR>

namespace finkey {

const char* to_string(Mode m) {
    switch (m) {
        case Mode::Collective: return "collective";
        case Mode::Coherent: return "coherent";
        case Mode::Asymptotic: return "asymptotic";
    }
    return "?";
}

Mode mode_from_string(const std::string& s) {
    if (s == "collective") return Mode::Collective;
    if (s == "coherent") return Mode::Coherent;
    if (s == "asymptotic") return Mode::Asymptotic;
    throw InvalidInput("unknown mode '" + s + "' (expected collective, coherent or asymptotic)");
}

namespace {

// a stalled solve is still a usable direction; its infeasibility shows up in eps_sol
bool sdp_ok(const SdpSolution& s, double max_residual = 1e-6) {
    return s.status == SdpStatus::Optimal || (s.status == SdpStatus::MaxIter && s.primal_residual < max_residual);
}

CMat psd_clip(const CMat& m) {
    const Eig e = eig_hermitian(m);
    return spectral_apply(e, [](double x) { return x > 0.0 ? x : 0.0; });
}

// -log det via Cholesky; +inf when sigma is not positive definite
double neg_logdet(const CMat& s) {
    Eigen::LLT<CMat> llt(s);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (int i = 0; i < s.rows(); ++i) {
        const double di = llt.matrixL()(i, i).real();
        if (!(di > 0.0)) return std::numeric_limits<double>::infinity();
        acc -= 2.0 * std::log(di);
    }
    return acc;
}

double barrier_value(double t, const PostProcessingMap& map, const CMat& s, const RVec& v) {
    double val = neg_logdet(s);
    if (!std::isfinite(val)) return val;
    for (int j = 0; j < v.size(); ++j) {
        if (!(v(j) > 0.0)) return std::numeric_limits<double>::infinity();
        val -= std::log(v(j));
    }
    return val + t * f_eps(s, map);
}

// largest step keeping sigma + s ds > 0 and v + s dv > 0
double max_step(const CMat& s, const CMat& ds, const RVec& v, const RVec& dv) {
    double smax = std::numeric_limits<double>::infinity();
    Eigen::LLT<CMat> llt(s);
    if (llt.info() != Eigen::Success) return 0.0;
    const CMat Li = llt.matrixL().solve(CMat::Identity(s.rows(), s.cols()));
    const double lm = min_eigenvalue(hermitian_part(Li * ds * Li.adjoint()));
    if (lm < 0.0) smax = -1.0 / lm;
    for (int j = 0; j < v.size(); ++j)
        if (dv(j) < 0.0) smax = std::min(smax, -v(j) / dv(j));
    return smax;
}

double golden_section(const std::function<double(double)>& phi, int evals, double& best_val) {
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double best_x = 1.0;
    best_val = phi(1.0);
    int used = 1;
    auto keep = [&](double x, double fx) {
        if (fx < best_val) {
            best_val = fx;
            best_x = x;
        }
    };
    double a = 0.0, b = 1.0;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = phi(c), fd = phi(d);
    used += 2;
    keep(c, fc);
    keep(d, fd);
    while (used < evals) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = phi(c);
            keep(c, fc);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = phi(d);
            keep(d, fd);
        }
        ++used;
    }
    return best_x;
}

CMat shift_psd(const CMat& rho) {
    const double lm = min_eigenvalue(rho);
    return lm < 0.0 ? CMat(rho + std::abs(lm) * CMat::Identity(rho.rows(), rho.cols())) : rho;
}

// rho - V X V^dag with X the least-norm fix of the certainty rows, V spanning the range of rho
std::optional<CMat> range_correction(const CMat& rho, const LinearSet& set) {
    const Eig e = eig_hermitian(hermitian_part(rho));
    const double top = e.values.maxCoeff();
    int k = 0;
    while (k < e.values.size() && e.values(k) > 1e-9 * top) ++k;
    if (k == 0) return std::nullopt;
    const CMat V = e.vectors.leftCols(k);
    std::vector<int> rows;
    for (int i = 0; i < set.rows(); ++i)
        if (set.certainty[i]) rows.push_back(i);
    if (rows.empty()) return std::nullopt;
    RMat M(rows.size(), k * k);
    RVec r(rows.size());
    for (size_t t = 0; t < rows.size(); ++t) {
        const int i = rows[t];
        M.row(t) = herm_to_real(hermitian_part(V.adjoint() * set.G[i] * V)).transpose();
        r(t) = inner(set.G[i], rho) - set.b(i);
    }
    const RVec x = M.completeOrthogonalDecomposition().solve(r);
    if (!x.allFinite()) return std::nullopt;
    return hermitian_part(rho - V * real_to_herm(x, k) * V.adjoint());
}

}  // namespace

bool barrier_polish(const LinearSet& set, const PostProcessingMap& map, FeasiblePoint& x, const SolverKnobs& knobs) {
    const int d = set.d, nv = set.nv, ns = d * d, p = ns + nv;
    const RMat R = set.real_matrix();
    int rank = 0;
    {
        Eigen::ColPivHouseholderQR<RMat> qr(R.transpose());
        qr.setThreshold(1e-10);
        rank = static_cast<int>(qr.rank());
    }
    if (rank >= p) return false;
    std::vector<CMat> basis;  // the coordinate basis of herm_to_real
    for (int b = 0; b < ns; ++b) basis.push_back(real_to_herm(RVec::Unit(ns, b), d));

    CMat s = x.sigma;
    RVec v = x.v;
    const double nu = d + nv;
    double t = 1.0;
    bool moved = false;
    auto stop = [&](const char* why) {
        if (knobs.verbose) std::fprintf(stderr, "polish: stopped at t=%.3g (%s)\n", t, why);
        return moved;
    };
    while (true) {
        int it = 0;
        double last_dec = 0.0;
        for (; it < 30; ++it) {
            const double phi0 = barrier_value(t, map, s, v);
            if (!std::isfinite(phi0)) return stop("left the domain");
            // scaled coordinates: dsigma = s^1/2 E s^1/2, dv = v w; the barrier Hessian is the identity there
            const CMat sh = matrix_sqrt_psd(s);
            RMat S = RMat::Zero(p, p);
            for (int b = 0; b < ns; ++b) S.block(0, b, ns, 1) = herm_to_real(hermitian_part(sh * basis[b] * sh));
            for (int j = 0; j < nv; ++j) S(ns + j, ns + j) = v(j);
            Eigen::ColPivHouseholderQR<RMat> qr((R * S).transpose());
            const RMat Q = qr.householderQ();
            const RMat Z = Q.rightCols(p - rank);

            RVec g(p);
            g.head(ns) = herm_to_real(grad_f_eps(s, map));
            if (nv > 0) g.tail(nv).setZero();
            RVec gw = t * (S.transpose() * g);
            gw.head(ns) -= herm_to_real(identity(d));  // -log det in scaled coordinates
            if (nv > 0) gw.tail(nv).array() -= 1.0;
            RMat Hf = RMat::Zero(p, p);
            Hf.topLeftCorner(ns, ns) = hessian_f_eps(s, map);
            const RMat SZ = S * Z;
            RMat Hr = t * (SZ.transpose() * Hf * SZ) + RMat::Identity(p - rank, p - rank);
            Hr = 0.5 * (Hr + Hr.transpose()).eval();
            const RVec gr = Z.transpose() * gw;
            Eigen::LLT<RMat> llt(Hr);
            if (llt.info() != Eigen::Success) return stop("Hessian not positive");
            const RVec dz = llt.solve(-gr);
            if (!dz.allFinite()) return stop("non-finite step");
            const double dec = -gr.dot(dz);
            last_dec = dec;
            if (dec / 2.0 < 1e-10) break;
            const RVec dx = SZ * dz;
            const CMat ds = real_to_herm(dx.head(ns), d);
            const RVec dv = nv > 0 ? RVec(dx.tail(nv)) : RVec();
            double step = std::min(1.0, 0.99 * max_step(s, ds, v, dv));
            if (!(step > 0.0)) return stop("no room to move");
            bool accepted = false;
            for (int bt = 0; bt < 40; ++bt) {
                const CMat s1 = s + step * ds;
                const RVec v1 = nv > 0 ? RVec(v + step * dv) : RVec();
                const double phi1 = barrier_value(t, map, s1, v1);
                // near the centre the change in phi is below rounding; take the damped step
                if (std::isfinite(phi1) && (phi1 <= phi0 - 0.25 * step * dec || dec < 1e-6)) {
                    s = s1;
                    v = v1;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) return stop("line search failed");
            moved = true;
        }
        // an uncentred round is no better than Frank-Wolfe from the last centred point
        if (it == 30) return stop("not centred");
        x.sigma = s;
        x.v = v;
        if (knobs.verbose)
            std::fprintf(stderr, "polish: t=%.3g f=%.12g newton=%d dec=%.2e\n", t, f_eps(s, map), it, last_dec);
        if (nu / t < knobs.polish_gap) break;
        t *= 8.0;
    }
    return moved;
}

Step1Result step1_frank_wolfe(const LinearSet& set, const PostProcessingMap& map,
                              const std::optional<FeasiblePoint>& x0, const SolverKnobs& knobs) {
    FeasiblePoint x;
    if (x0) {
        x = *x0;
    } else {
        auto fp = find_feasible_point(set, knobs.sdp);
        if (!fp) throw DomainError("feasible set is empty");
        x = project_affine(set, *fp);
    }
    Step1Result out;
    if (knobs.verbose) std::fprintf(stderr, "start: margin %.3g f=%.12g\n", x.margin, f_eps(x.sigma, map));
    if (knobs.polish && x.margin > 1e-10) {
        FeasiblePoint y = x;
        try {
            out.polished = barrier_polish(set, map, y, knobs);
        } catch (const DomainError&) {
            out.polished = false;
        }
        if (out.polished && f_eps(y.sigma, map) <= f_eps(x.sigma, map)) x = y;
    }
    CMat s = x.sigma;
    RVec v = x.v;
    double fs = f_eps(s, map);
    out.trace.push_back(fs);
    for (int it = 0; it < knobs.max_iter; ++it) {
        const CMat g = grad_f_eps(s, map);
        const SdpSolution sol = solve(set.to_sdp(g), knobs.sdp);
        if (!sdp_ok(sol))
        {
            char buf[160];
            std::snprintf(buf, sizeof buf, "Frank-Wolfe subproblem failed: %s (primal residual %.2e, gap %.2e)",
                          to_string(sol.status), sol.primal_residual, sol.rel_gap);
            throw DomainError(buf);
        }
        const CMat star = psd_clip(hermitian_part(sol.primal[0]));
        RVec vstar;
        if (set.nv > 0) vstar = sol.primal[1].real().col(0).cwiseMax(0.0);
        const CMat ds = star - s;
        const double gap = inner(g, ds);
        out.last_gap = gap;
        if (knobs.verbose) std::fprintf(stderr, "fw %d: f=%.12g gap=%.3g\n", it, fs, gap);
        if (gap >= -knobs.eps_tol) break;
        double fbest = 0.0;
        const double lam = golden_section([&](double l) { return f_eps(CMat(s + l * ds), map); },
                                          knobs.line_search_evals, fbest);
        if (!(fbest < fs)) break;
        s += lam * ds;
        if (set.nv > 0) v += lam * (vstar - v);
        fs = fbest;
        ++out.iterations;
        out.trace.push_back(fs);
    }
    out.rho = s;
    out.v = v;
    out.value = fs;
    return out;
}

Expansion expand_imprecision(const CMat& rho, const RVec& v, const FeasibleSetSpec& spec, const LinearSet& set,
                             double eps_rep, bool corrections) {
    Expansion e;
    const RVec vv = set.nv > 0 ? v : RVec();
    auto violation = [&](const CMat& s) {
        const RVec r = set.residual(s, vv);
        double w = 0.0;
        for (int i = 0; i < set.rows(); ++i)
            if (set.certainty[i]) w = std::max(w, std::abs(r(i)));
        return w;
    };
    // candidates: rho itself, and rho corrected on the certainty rows inside its own range
    e.rho_shifted = shift_psd(rho);
    e.eps_sol = violation(e.rho_shifted);
    auto consider = [&](const std::optional<CMat>& c) {
        if (!c) return;
        const CMat s = shift_psd(*c);
        const double w = violation(s);
        // only worth it if eps' actually drops
        if (std::max(w, eps_rep) < std::max(e.eps_sol, eps_rep)) {
            e.rho_shifted = s;
            e.eps_sol = w;
        }
    };
    if (corrections) consider(range_correction(rho, set));
    if (corrections && set.marginal_dim > 0) {
        const auto fixed = fix_marginal(shift_psd(rho), set.marginal);
        consider(fixed);
        if (fixed) consider(range_correction(*fixed, set));
    }
    e.eps_prime = std::max(e.eps_sol, eps_rep);

    const bool free_f = spec.free_distributions();
    const int nsig = static_cast<int>(spec.observed.size());
    for (size_t k = 0; k < spec.entries.size(); ++k) {
        const auto& en = spec.entries[k];
        const int nk = en.cg.target_size();
        Distribution F = spec.observed;
        if (free_f && k < set.f_offset.size() && set.f_offset[k] >= 0)
            F = v.segment(set.f_offset[k], nsig).cwiseMax(0.0);
        const Distribution target = coarse_grain(F, en.cg);
        double dist = 0.0;
        for (int l = 0; l < nk; ++l) dist += std::abs(inner(en.effective.elements[l], e.rho_shifted) - target(l));
        e.mu_prime.push_back(std::max(en.mu + nk * e.eps_prime, dist + nk * e.eps_prime));
        if (free_f) {
            const auto& acc = *spec.acceptance;
            const double t = spec.t_per_entry.empty() ? acc.threshold : spec.t_per_entry[k];
            const double tv =
                (coarse_grain(F, acc.abort_map) - coarse_grain(acc.reference, acc.abort_map)).cwiseAbs().sum();
            e.t_prime.push_back(std::max(t, tv));
        }
    }
    return e;
}

Step2Result step2_dual_bound(const LinearSet& expanded, const PostProcessingMap& map, const CMat& rho,
                             double eps_prime, const SdpTolerances& tol) {
    Step2Result out;
    const CMat g = grad_f_eps(rho, map);
    const SdpSolution sol = solve(expanded.to_sdp(g), tol);
    out.status = to_string(sol.status);
    if (sol.status == SdpStatus::Infeasible || sol.status == SdpStatus::Unbounded || sol.dual.size() == 0 ||
        !sol.dual.allFinite())
        return out;
    out.y = sol.dual;
    out.sdp_dual = expanded.b.dot(sol.dual);

    // bound on Tr sigma from a certainty row proportional to the identity
    const int d = expanded.d;
    double tr_bound = -1.0;
    for (int i = 0; i < expanded.rows(); ++i) {
        if (!expanded.certainty[i]) continue;
        if (expanded.nv > 0 && expanded.A.row(i).cwiseAbs().maxCoeff() > 0.0) continue;
        const cplx c = expanded.G[i](0, 0);
        if (std::abs(c.imag()) > 0.0 || c.real() <= 0.0) continue;
        if ((expanded.G[i] - c * CMat::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-14) continue;
        tr_bound = (expanded.b(i) + eps_prime) / c.real();
        break;
    }
    if (tr_bound < 0.0) throw InvalidInput("certificate: the set has no trace-normalisation row");

    CMat S = g;
    double by = 0.0, relax = 0.0;
    for (int i = 0; i < expanded.rows(); ++i) {
        S -= sol.dual(i) * expanded.G[i];
        by += sol.dual(i) * expanded.b(i);
        if (expanded.certainty[i]) relax += std::abs(sol.dual(i));
    }
    S = hermitian_part(S);
    out.min_eig_slack = min_eigenvalue(S);
    double lp = 0.0;
    out.min_lp_slack = 0.0;
    if (expanded.nv > 0) {
        const RVec s = -expanded.A.transpose() * sol.dual;
        out.min_lp_slack = s.minCoeff();
        for (int j = 0; j < s.size(); ++j) lp += std::min(0.0, s(j)) * expanded.upper(j);
    }
    out.dual_value = by - eps_prime * relax + std::min(0.0, out.min_eig_slack) * tr_bound + lp;
    out.beta = f_eps(rho, map) - inner(rho, g) + out.dual_value;
    out.ok = std::isfinite(out.beta);
    return out;
}

FeasibleSetSpec make_feasible_spec(const Scenario& sc, bool asymptotic, const std::vector<double>& mu) {
    const auto& p = sc.protocol;
    FeasibleSetSpec spec;
    spec.dim = p.dim();
    spec.certainty = p.certainty;
    spec.observed = sc.observed;
    spec.acceptance = p.acceptance;
    spec.asymptotic = asymptotic;
    spec.marginal_dim = detect_marginal_dim(p.certainty, spec.dim);
    for (size_t k = 0; k < p.coarse_grainings.size(); ++k) {
        CgEntry e{p.coarse_grainings[k], p.coarse_grainings[k].effective(p.fine_povm), 0.0};
        if (!asymptotic) {
            if (k >= mu.size()) throw InvalidInput("one variation bound per coarse-graining is required");
            e.mu = mu[k];
        }
        spec.entries.push_back(std::move(e));
    }
    return spec;
}

namespace {

// slack variables for a supplied rho0 in unique-acceptance mode
std::optional<FeasiblePoint> point_from_rho(const FeasibleSetSpec& spec, const LinearSet& set, const CMat& rho) {
    if (spec.free_distributions()) return std::nullopt;
    FeasiblePoint x;
    x.sigma = rho;
    x.margin = 0.0;
    if (set.nv == 0) return x;
    x.v = RVec::Zero(set.nv);
    int p = 0;
    for (const auto& e : spec.entries) {
        const int nk = e.cg.target_size();
        const Distribution target = coarse_grain(spec.observed, e.cg);
        double used = 0.0;
        for (int l = 0; l < nk; ++l) {
            const double diff = inner(e.effective.elements[l], rho) - target(l);
            x.v(p + l) = std::max(0.0, diff);
            x.v(p + nk + l) = std::max(0.0, -diff);
            used += std::abs(diff);
        }
        if (used > e.mu) return std::nullopt;
        x.v(p + 2 * nk) = e.mu - used;
        p += 2 * nk + 1;
    }
    return x;
}

}  // namespace

BoundResult certified_bound(const FeasibleSetSpec& spec, const PostProcessingMap& map, const SolverKnobs& knobs,
                            const std::optional<CMat>& rho0) {
    spec.validate();
    map.validate();
    if (map.input_dim() != spec.dim) throw InvalidInput("post-processing map does not act on the feasible-set space");
    LinearSet set = build_linear_set(spec);
    if (spec.asymptotic) set = prune_dependent_rows(set);

    std::optional<FeasiblePoint> x0;
    if (rho0) {
        if (rho0->rows() != spec.dim) throw InvalidInput("rho0 has the wrong dimension");
        x0 = point_from_rho(spec, set, *rho0);
        if (x0 && set.residual(x0->sigma, x0->v).cwiseAbs().maxCoeff() > 1e-8) x0.reset();
        if (!x0 && knobs.verbose) std::fprintf(stderr, "rho0 is not feasible; ignoring it\n");
    }
    if (!x0) {
        auto fp = find_feasible_point(set, knobs.sdp);
        if (!fp) throw DomainError("feasible set is empty");
        x0 = project_affine(set, *fp);
        if (min_eigenvalue(x0->sigma) < 0.0) x0->sigma = psd_clip(x0->sigma);
    }

    BoundResult out;
    PostProcessingMap m = map;
    out.eps = choose_perturbation(x0->sigma, m, knobs.eps_start);
    m.perturbation_eps = out.eps;
    out.step1 = step1_frank_wolfe(set, m, x0, knobs);
    auto run_step2 = [&](const Expansion& ex) {
        if (knobs.verbose)
            for (size_t k = 0; k < spec.entries.size(); ++k)
                std::fprintf(stderr, "expand %zu: mu=%.6g mu'=%.6g eps_sol=%.3g\n", k, spec.entries[k].mu,
                             ex.mu_prime[k], ex.eps_sol);
        FeasibleSetSpec es = spec;
        for (size_t k = 0; k < es.entries.size(); ++k) es.entries[k].mu = ex.mu_prime[k];
        if (es.free_distributions()) es.t_per_entry = ex.t_prime;
        LinearSet eset = build_linear_set(es);
        if (es.asymptotic) eset = prune_dependent_rows(eset);
        return step2_dual_bound(eset, m, ex.rho_shifted, ex.eps_prime, knobs.sdp);
    };
    out.expansion = expand_imprecision(out.step1.rho, out.step1.v, spec, set, knobs.eps_rep, true);
    out.step2 = run_step2(out.expansion);
    // a corrected rho' trades eps' against mu'; either gives a valid bound, keep the better
    Expansion plain = expand_imprecision(out.step1.rho, out.step1.v, spec, set, knobs.eps_rep, false);
    if ((plain.rho_shifted - out.expansion.rho_shifted).cwiseAbs().maxCoeff() > 0.0) {
        Step2Result alt = run_step2(plain);
        if (alt.ok && (!out.step2.ok || alt.beta > out.step2.beta)) {
            out.expansion = std::move(plain);
            out.step2 = std::move(alt);
        }
    }
    out.zeta = zeta_eps(out.eps, m.output_dim());
    out.H = out.step2.beta - out.zeta;
    if (knobs.verbose)
        std::fprintf(stderr, "step2: b.y=%.12g rigorous=%.12g min_eig=%.3g min_lp=%.3g |y|_1=%.3g\n", out.step2.sdp_dual,
                     out.step2.dual_value, out.step2.min_eig_slack, out.step2.min_lp_slack,
                     out.step2.y.size() ? out.step2.y.lpNorm<1>() : 0.0);
    if (knobs.verbose)
        std::fprintf(stderr, "bound: alpha=%.12g beta=%.12g eps=%.3g zeta=%.3g eps'=%.3g status=%s\n",
                     out.step1.value, out.step2.beta, out.eps, out.zeta, out.expansion.eps_prime,
                     out.step2.status.c_str());
    return out;
}

double pass_probability(const Scenario& sc, const CMat& rho) {
    const auto& p = sc.protocol;
    if (!p.key_rounds.empty()) {
        const Distribution& dist = sc.expected ? *sc.expected : sc.observed;
        double acc = 0.0;
        for (int j = 0; j < dist.size(); ++j)
            if (p.key_rounds.alice[j] >= 0 && p.key_rounds.bob[j] >= 0) acc += dist(j);
        return acc;
    }
    return p.sift_factor * real_trace(apply_G(rho, p.postproc));
}

namespace {

double error_correction_entropy(const Scenario& sc) {
    if (sc.h_xy) return *sc.h_xy;
    if (sc.protocol.key_rounds.empty())
        throw InvalidInput("error-correction entropy is needed: supply h_xy or a key-round table");
    return conditional_entropy_xy(sc.expected ? *sc.expected : sc.observed, sc.protocol.key_rounds);
}

void check_scenario(const Scenario& sc) {
    sc.protocol.validate();
    if (sc.observed.size() != sc.protocol.fine_povm.size())
        throw InvalidInput("observed distribution does not match the POVM alphabet");
    if (sc.expected && sc.expected->size() != sc.observed.size())
        throw InvalidInput("expected distribution does not match the POVM alphabet");
    if ((sc.observed.array() < 0.0).any() || std::abs(sc.observed.sum() - 1.0) > 1e-9)
        throw InvalidInput("observed frequencies must be nonnegative and sum to 1");
}

}  // namespace

KeyRateResult finite_key_rate(const Scenario& sc) {
    if (sc.mode == Mode::Asymptotic) {
        KeyRateResult r;
        asymptotic_key_rate(sc, &r);
        return r;
    }
    check_scenario(sc);
    const bool coherent = sc.mode == Mode::Coherent;
    sc.budget.validate(coherent);
    const auto& fp = sc.finite;
    if (!(fp.N > 0.0)) throw InvalidInput("N must be positive");
    if (!(fp.m >= 1.0 && fp.m < fp.N)) throw InvalidInput("m must lie in [1, N)");
    if (!(fp.f_ec >= 1.0)) throw InvalidInput("f_EC must be at least 1");

    KeyRateResult out;
    const auto& p = sc.protocol;
    double n_sig = fp.N - fp.m;
    double k = 0.0;
    CoherentTerms ct;
    if (coherent) {
        k = fp.k > 0.0 ? fp.k : std::max(1.0, std::floor(1e-3 * fp.N));
        n_sig = (fp.N - fp.m - k) / fp.b;
        if (!(n_sig >= 1.0)) throw InvalidInput("coherent mode: no signals left after m and k");
        ct.r = coherent_r(fp.N, n_sig, fp.m, k, fp.b, sc.budget.qdf, p.dim());
        out.r = ct.r;
        if (ct.r > fp.N) throw InvalidInput("infeasible coherent parameters: r exceeds N; raise k or eps_qdf");
    }
    for (const auto& cg : p.coarse_grainings) {
        if (coherent) {
            const CoherentTerms c = coherent_params(fp.N, n_sig, fp.m, k, fp.b, sc.budget.qdf, sc.budget.pe,
                                                    sc.budget.bar, p.dim(), cg.target_size(), fp.d);
            out.mu.push_back(c.mu);
            ct.penalty = c.penalty;
        } else {
            out.mu.push_back(variation_bound_mu(sc.budget.pe, cg.target_size(), fp.m));
        }
    }

    const FeasibleSetSpec spec = make_feasible_spec(sc, false, out.mu);
    BoundResult b;
    try {
        b = certified_bound(spec, p.postproc, sc.knobs, sc.rho0);
    } catch (const DomainError& e) {
        out.status = std::string("infeasible: ") + e.what();
        return out;
    }
    out.alpha_hat = b.step1.value;
    out.beta = b.step2.beta;
    out.expansion = b.expansion;
    out.eps = b.eps;
    out.zeta = b.zeta;
    out.iterations = b.step1.iterations;
    if (!b.step2.ok) {
        out.status = "no-certificate: " + b.step2.status;
        return out;
    }
    out.p_pass = pass_probability(sc, b.step1.rho);
    if (!(out.p_pass > 0.0)) {
        out.status = "no key rounds";
        return out;
    }
    out.h_xy = error_correction_entropy(sc);
    const double n = fp.n >= 0.0 ? fp.n : out.p_pass * n_sig;
    const double H_mu = p.sift_factor * b.H / out.p_pass;
    double delta = 0.0, penalty = 0.0;
    if (coherent) {
        delta = coherent_delta(ct.r, std::max(n, 1.0), sc.budget.bar, fp.d);
        penalty = ct.penalty;
    } else {
        delta = delta_bar(sc.budget.bar, fp.d, n);
    }
    const double leak = leak_ec(n, fp.f_ec, out.h_xy, sc.budget.ec);
    out.terms = key_length(n, H_mu, delta, leak, sc.budget.pa, penalty);
    out.terms.rate = out.terms.ell / fp.N;
    out.ell = out.terms.ell;
    out.rate = out.terms.rate;
    return out;
}

double asymptotic_key_rate(const Scenario& sc, KeyRateResult* detail) {
    check_scenario(sc);
    KeyRateResult out;
    const FeasibleSetSpec spec = make_feasible_spec(sc, true, {});
    BoundResult b;
    try {
        b = certified_bound(spec, sc.protocol.postproc, sc.knobs, sc.rho0);
    } catch (const DomainError& e) {
        out.status = std::string("infeasible: ") + e.what();
        if (detail) *detail = out;
        return 0.0;
    }
    out.alpha_hat = b.step1.value;
    out.beta = b.step2.beta;
    out.expansion = b.expansion;
    out.eps = b.eps;
    out.zeta = b.zeta;
    out.iterations = b.step1.iterations;
    if (!b.step2.ok) {
        out.status = "no-certificate: " + b.step2.status;
        if (detail) *detail = out;
        return 0.0;
    }
    out.p_pass = pass_probability(sc, b.step1.rho);
    out.h_xy = error_correction_entropy(sc);
    const double f = sc.finite.f_ec;
    out.terms.H_mu = out.p_pass > 0.0 ? sc.protocol.sift_factor * b.H / out.p_pass : 0.0;
    out.rate = sc.protocol.sift_factor * b.H - out.p_pass * f * out.h_xy;
    out.terms.rate = out.rate;
    if (detail) *detail = out;
    return out.rate;
}

}  // namespace finkey
