// Times the production kernels against their serial reference
// implementations and reports the largest deviation for each pair:
//   - eri_build (FFT-factorized, parallel over bra pairs)
//     vs eri_build_direct (explicit double quadrature, serial)
//   - coulomb_exchange (parallel over store slots)
//     vs coulomb_exchange_reference (serial visitation)

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <chrono>
#include <cstdio>

#include "wigner/basis.hpp"
#include "wigner/integrals.hpp"
#include "wigner/rng.hpp"
#include "wigner/scf.hpp"
#include "wigner/torus.hpp"

using namespace wigner;

namespace {

double seconds_of(const std::function<void()>& body, int trials) {
    double best = 1e300;
    for (int t = 0; t < trials; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        body();
        best = std::min(best,
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                            .count());
    }
    return best;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernel benchmarks: parallel paths vs serial references"};
    int eri_n = 5;      // eri oracle basis is eri_n x eri_n (direct path is O(P^4 m^2))
    int contract_n = 12; // contraction basis is contract_n x contract_n
    int trials = 3;
    app.add_option("--eri-basis", eri_n, "basis edge for the ERI comparison (default 5)");
    app.add_option("--contract-basis", contract_n,
                   "basis edge for the J/K comparison (default 12)");
    app.add_option("--trials", trials, "repetitions per timing (best is reported)");
    CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
    std::printf("threads: %d\n\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (no OpenMP)\n\n");
#endif

    // --- ERI build: FFT factorization vs direct double quadrature ----------
    {
        const auto cell = cell_from_rs(105.0, 2, 1.0);
        const auto basis = build_basis(cell, eri_n, eri_n, 0.8);
        const auto grid = make_quadrature(cell, eri_n, eri_n);
        const auto kernel = coulomb_kernel_fourier(cell, grid);

        EriStore fast, ref;
        const double t_fast =
            seconds_of([&] { fast = eri_build(basis, grid, kernel); }, trials);
        const double t_ref =
            seconds_of([&] { ref = eri_build_direct(basis, grid, kernel); }, 1);

        double dev = 0.0;
        ref.for_each([&](int i, int j, int k, int l, double v) {
            dev = std::max(dev, std::fabs(fast.get(i, j, k, l) - v));
        });

        std::printf("eri build       %dx%d basis, %dx%d grid, %zu stored\n", eri_n, eri_n,
                    grid.mx, grid.my, fast.stored());
        std::printf("  fft+omp       %10.4f s\n", t_fast);
        std::printf("  direct serial %10.4f s   (%.1fx)\n", t_ref, t_ref / t_fast);
        std::printf("  max |dev|     %10.3e hartree\n\n", dev);
    }

    // --- J/K contraction: parallel slots vs serial reference ---------------
    {
        const auto cell = cell_from_rs(105.0, 4, 1.0);
        const auto basis = build_basis(cell, contract_n, contract_n, 0.8);
        const auto grid = make_quadrature(cell, contract_n, contract_n);
        const auto kernel = coulomb_kernel_fourier(cell, grid);
        const auto eri = eri_build(basis, grid, kernel);

        const int p = basis.size();
        Rng rng(7);
        Eigen::MatrixXd d(p, p);
        for (int i = 0; i < p; ++i)
            for (int j = i; j < p; ++j) d(i, j) = d(j, i) = rng.uniform(-0.01, 0.01);

        Eigen::MatrixXd j1, k1, j2, k2;
        const double t_par =
            seconds_of([&] { coulomb_exchange(eri, d, j1, k1); }, trials);
        const double t_ser =
            seconds_of([&] { coulomb_exchange_reference(eri, d, j2, k2); }, trials);

        const double dev = std::max((j1 - j2).cwiseAbs().maxCoeff(),
                                    (k1 - k2).cwiseAbs().maxCoeff());
        std::printf("j/k contraction %dx%d basis, %zu stored\n", contract_n, contract_n,
                    eri.stored());
        std::printf("  parallel      %10.4f s\n", t_par);
        std::printf("  serial ref    %10.4f s   (%.1fx)\n", t_ser, t_ser / t_par);
        std::printf("  max |dev|     %10.3e\n", dev);
    }
    return 0;
}
