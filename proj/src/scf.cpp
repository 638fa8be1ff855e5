#include "wigner/scf.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>

#include "wigner/errors.hpp"
#include "wigner/rng.hpp"

namespace wigner {

namespace {

// one index permutation (p,q,r,s) of a stored integral v:
// J(p,q) += D(r,s) v and K(p,r) += D(q,s) v
inline void accumulate(Eigen::MatrixXd& J, Eigen::MatrixXd& K, const Eigen::MatrixXd& D, int p,
                       int q, int r, int s, double v) {
    J(p, q) += D(r, s) * v;
    K(p, r) += D(q, s) * v;
}

// expand a canonical quadruple (i<=j, k<=l, bra<=ket) into its distinct
// permutations; pairing the mirrored updates keeps J and K bitwise symmetric
// for a bitwise-symmetric D
inline void scatter(Eigen::MatrixXd& J, Eigen::MatrixXd& K, const Eigen::MatrixXd& D, int i,
                    int j, int k, int l, double v) {
    const bool ij = (i != j), kl = (k != l);
    accumulate(J, K, D, i, j, k, l, v);
    if (ij) accumulate(J, K, D, j, i, k, l, v);
    if (kl) accumulate(J, K, D, i, j, l, k, v);
    if (ij && kl) accumulate(J, K, D, j, i, l, k, v);
    if (i != k || j != l) {
        accumulate(J, K, D, k, l, i, j, v);
        if (ij) accumulate(J, K, D, k, l, j, i, v);
        if (kl) accumulate(J, K, D, l, k, i, j, v);
        if (ij && kl) accumulate(J, K, D, l, k, j, i, v);
    }
}

Eigen::MatrixXd core_hamiltonian(const IntegralTables& tables, bool include_pin) {
    if (!include_pin) return tables.T;
    if (!tables.has_pin())
        throw std::invalid_argument("pinning requested but tables carry no pinning block");
    return tables.T + tables.Vpin;
}

} // namespace

void coulomb_exchange_reference(const EriStore& eri, const Eigen::MatrixXd& D,
                                Eigen::MatrixXd& J, Eigen::MatrixXd& K) {
    const int p = eri.n_basis();
    J.setZero(p, p);
    K.setZero(p, p);
    eri.for_each([&](int i, int j, int k, int l, double v) { scatter(J, K, D, i, j, k, l, v); });
}

void coulomb_exchange(const EriStore& eri, const Eigen::MatrixXd& D, Eigen::MatrixXd& J,
                      Eigen::MatrixXd& K) {
#ifndef _OPENMP
    coulomb_exchange_reference(eri, D, J, K);
#else
    const auto n = static_cast<std::int64_t>(eri.n_slots());
    if (omp_get_max_threads() == 1 || n < (1 << 14)) {
        coulomb_exchange_reference(eri, D, J, K);
        return;
    }
    const int p = eri.n_basis();
    J.setZero(p, p);
    K.setZero(p, p);
    std::vector<Eigen::MatrixXd> Jt, Kt;
#pragma omp parallel
    {
#pragma omp single
        {
            Jt.assign(static_cast<std::size_t>(omp_get_num_threads()),
                      Eigen::MatrixXd::Zero(p, p));
            Kt.assign(static_cast<std::size_t>(omp_get_num_threads()),
                      Eigen::MatrixXd::Zero(p, p));
        }
        auto& Jl = Jt[static_cast<std::size_t>(omp_get_thread_num())];
        auto& Kl = Kt[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(static)
        for (std::int64_t idx = 0; idx < n; ++idx) {
            const auto e = eri.entry(static_cast<std::size_t>(idx));
            if (e.value == 0.0) continue;
            scatter(Jl, Kl, D, e.i, e.j, e.k, e.l, e.value);
        }
    }
    // merge in thread order: reproducible for a fixed thread count
    for (const auto& m : Jt) J += m;
    for (const auto& m : Kt) K += m;
#endif
}

Eigen::MatrixXd fock_build(const IntegralTables& tables, const Eigen::MatrixXd& D,
                           bool include_pin) {
    Eigen::MatrixXd J, K;
    coulomb_exchange(tables.eri, D, J, K);
    return core_hamiltonian(tables, include_pin) + J - K;
}

double energy_from_density(const IntegralTables& tables, const Eigen::MatrixXd& D,
                           bool include_pin) {
    Eigen::MatrixXd J, K;
    coulomb_exchange(tables.eri, D, J, K);
    const Eigen::MatrixXd h = core_hamiltonian(tables, include_pin);
    return D.cwiseProduct(h).sum() + 0.5 * D.cwiseProduct(J - K).sum();
}

Eigen::MatrixXd canonical_orthogonalizer(const Eigen::MatrixXd& S, double tol, int n_required) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    if (es.info() != Eigen::Success) throw std::runtime_error("overlap eigendecomposition failed");
    const Eigen::VectorXd& ev = es.eigenvalues(); // ascending
    int first = 0;
    while (first < ev.size() && ev(first) < tol) ++first;
    const int kept = static_cast<int>(ev.size()) - first;
    if (kept < n_required)
        throw LinearDependenceCollapse("only " + std::to_string(kept) +
                                       " overlap eigendirections above " + std::to_string(tol) +
                                       " for " + std::to_string(n_required) + " electrons");
    Eigen::MatrixXd X(S.rows(), kept);
    for (int c = 0; c < kept; ++c)
        X.col(c) = es.eigenvectors().col(first + c) / std::sqrt(ev(first + c));
    return X;
}

namespace {

// Pulay DIIS over (Fock, residual) pairs in the orthonormal basis. Drops the
// oldest pair until the normal system solves cleanly; empty/failed -> latest.
Eigen::MatrixXd diis_extrapolate(std::deque<Eigen::MatrixXd>& fs,
                                 std::deque<Eigen::MatrixXd>& rs) {
    while (fs.size() > 1) {
        const int k = static_cast<int>(fs.size());
        Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(k + 1, k + 1);
        for (int a = 0; a < k; ++a)
            for (int b = a; b < k; ++b)
                lhs(a, b) = lhs(b, a) = rs[static_cast<std::size_t>(a)]
                                            .cwiseProduct(rs[static_cast<std::size_t>(b)])
                                            .sum();
        const double scale = lhs.topLeftCorner(k, k).cwiseAbs().maxCoeff();
        if (scale <= 0.0) return fs.back();
        lhs.topLeftCorner(k, k) /= scale;
        for (int a = 0; a < k; ++a) lhs(a, k) = lhs(k, a) = 1.0;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
        rhs(k) = 1.0;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
        if (lu.isInvertible()) {
            const Eigen::VectorXd c = lu.solve(rhs);
            if (c.head(k).allFinite() && (lhs * c - rhs).cwiseAbs().maxCoeff() < 1e-10) {
                Eigen::MatrixXd f = Eigen::MatrixXd::Zero(fs[0].rows(), fs[0].cols());
                for (int a = 0; a < k; ++a) f += c(a) * fs[static_cast<std::size_t>(a)];
                return f;
            }
        }
        fs.pop_front();
        rs.pop_front();
    }
    return fs.back();
}

} // namespace

ScfState scf_solve(const IntegralTables& tables, int n_electrons, const ScfOptions& opts,
                   bool include_pin, const std::optional<Eigen::MatrixXd>& initial_density) {
    const int p = static_cast<int>(tables.S.rows());
    if (n_electrons < 1) throw std::invalid_argument("n_electrons must be >= 1");
    const Eigen::MatrixXd hcore = core_hamiltonian(tables, include_pin);
    const Eigen::MatrixXd X = canonical_orthogonalizer(tables.S, opts.lindep_tol, n_electrons);
    const int m = static_cast<int>(X.cols());

    ScfState st;
    auto occupy = [&](const Eigen::MatrixXd& fo) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fo);
        st.mo_energies = es.eigenvalues();
        st.coeffs = X * es.eigenvectors().leftCols(n_electrons);
    };

    Eigen::MatrixXd D;
    if (initial_density) {
        D = *initial_density;
    } else {
        occupy(X.transpose() * hcore * X);
        if (opts.guess_noise > 0.0) {
            // symmetry-breaking noise on the orthonormal-basis coefficients,
            // re-orthonormalized by QR
            Eigen::MatrixXd co = X.transpose() * tables.S * st.coeffs;
            Rng rng(opts.seed);
            for (int c = 0; c < n_electrons; ++c)
                for (int r = 0; r < m; ++r) co(r, c) += opts.guess_noise * rng.uniform(-1.0, 1.0);
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(co);
            co = qr.householderQ() * Eigen::MatrixXd::Identity(m, n_electrons);
            st.coeffs = X * co;
        }
        D = st.coeffs * st.coeffs.transpose();
    }

    std::deque<Eigen::MatrixXd> diis_f, diis_r;
    Eigen::MatrixXd fo_used;
    double e_prev = 0.0;

    for (int it = 0; it < opts.max_iter; ++it) {
        Eigen::MatrixXd J, K;
        coulomb_exchange(tables.eri, D, J, K);
        const Eigen::MatrixXd F = hcore + J - K;
        const double e = D.cwiseProduct(hcore).sum() + 0.5 * D.cwiseProduct(J - K).sum();

        const Eigen::MatrixXd R =
            X.transpose() * (F * D * tables.S - tables.S * D * F) * X;
        st.commutator = R.cwiseAbs().maxCoeff();
        Eigen::MatrixXd fo = X.transpose() * F * X;

        diis_f.push_back(fo);
        diis_r.push_back(R);
        while (static_cast<int>(diis_f.size()) > opts.diis_depth) {
            diis_f.pop_front();
            diis_r.pop_front();
        }

        if (it < opts.damp_iters && it > 0) {
            const double g = opts.damping * (1.0 - static_cast<double>(it) / opts.damp_iters);
            fo = (1.0 - g) * fo + g * fo_used;
        } else if (it >= opts.damp_iters) {
            fo = diis_extrapolate(diis_f, diis_r);
        }
        fo_used = fo;

        occupy(fo);
        const Eigen::MatrixXd d_next = st.coeffs * st.coeffs.transpose();
        const double drms = (d_next - D).norm() / p;
        st.history.emplace_back(e, drms);
        st.iterations = it + 1;

        const bool done =
            it > 0 && drms < opts.conv_density_rms && std::fabs(e - e_prev) < opts.conv_energy;
        e_prev = e;
        D = d_next;
        if (done) {
            // one consistent final evaluation at the accepted density
            coulomb_exchange(tables.eri, D, J, K);
            const Eigen::MatrixXd ff = hcore + J - K;
            st.energy = D.cwiseProduct(hcore).sum() + 0.5 * D.cwiseProduct(J - K).sum();
            st.commutator = (X.transpose() * (ff * D * tables.S - tables.S * D * ff) * X)
                                .cwiseAbs()
                                .maxCoeff();
            st.density = D;
            st.converged = true;
            return st;
        }
    }

    st.density = D;
    st.energy = e_prev;
    st.converged = false;
    throw NotConverged(std::move(st), 0);
}

TwoStageResult two_stage_protocol(const IntegralTables& tables, int n_electrons,
                                  const ScfOptions& opts) {
    TwoStageResult out;
    if (opts.pin_charge != 0.0) {
        if (!tables.has_pin())
            throw std::invalid_argument("two-stage protocol needs tables with a pinning block");
        try {
            out.stage1 = scf_solve(tables, n_electrons, opts, true);
        } catch (NotConverged& e) {
            throw NotConverged(std::move(e.last), 1);
        }
        try {
            out.final_state = scf_solve(tables, n_electrons, opts, false, out.stage1->density);
        } catch (NotConverged& e) {
            throw NotConverged(std::move(e.last), 2);
        }
    } else {
        out.final_state = scf_solve(tables, n_electrons, opts, false);
    }
    return out;
}

} // namespace wigner
