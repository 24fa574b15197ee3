#include <benchmark/benchmark.h>

#include "msflow/kernels.hpp"
#include "msflow/synthetic.hpp"

namespace {

struct Fixture {
    msflow::AdmittanceMatrix y;
    Eigen::VectorXd delta;
    Eigen::VectorXd v;

    explicit Fixture(std::size_t n) {
        y = msflow::build_ybus(msflow::to_per_unit(msflow::synthetic_case(n, 7)));
        const auto m = static_cast<Eigen::Index>(n);
        delta = 0.1 * Eigen::VectorXd::Random(m);
        v = Eigen::VectorXd::Ones(m) + 0.05 * Eigen::VectorXd::Random(m);
    }
};

void BM_PowerTermsSerial(benchmark::State& st) {
    Fixture f(static_cast<std::size_t>(st.range(0)));
    Eigen::VectorXd sp, sq;
    for (auto _ : st) {
        msflow::kernels::power_terms_serial(f.y, f.delta, f.v, sp, sq);
        benchmark::DoNotOptimize(sp.data());
    }
}

void BM_PowerTermsParallel(benchmark::State& st) {
    Fixture f(static_cast<std::size_t>(st.range(0)));
    Eigen::VectorXd sp, sq;
    for (auto _ : st) {
        msflow::kernels::power_terms(f.y, f.delta, f.v, sp, sq);
        benchmark::DoNotOptimize(sp.data());
    }
    st.counters["threads"] = msflow::kernels::max_threads();
}

void BM_JacobianSerial(benchmark::State& st) {
    Fixture f(static_cast<std::size_t>(st.range(0)));
    Eigen::MatrixXd jf;
    for (auto _ : st) {
        msflow::kernels::full_jacobian_serial(f.y, f.delta, f.v, jf);
        benchmark::DoNotOptimize(jf.data());
    }
}

void BM_JacobianParallel(benchmark::State& st) {
    Fixture f(static_cast<std::size_t>(st.range(0)));
    Eigen::MatrixXd jf;
    for (auto _ : st) {
        msflow::kernels::full_jacobian(f.y, f.delta, f.v, jf);
        benchmark::DoNotOptimize(jf.data());
    }
    st.counters["threads"] = msflow::kernels::max_threads();
}

}  // namespace

BENCHMARK(BM_PowerTermsSerial)->RangeMultiplier(2)->Range(128, 2048);
BENCHMARK(BM_PowerTermsParallel)->RangeMultiplier(2)->Range(128, 2048);
BENCHMARK(BM_JacobianSerial)->RangeMultiplier(2)->Range(128, 1024);
BENCHMARK(BM_JacobianParallel)->RangeMultiplier(2)->Range(128, 1024);

BENCHMARK_MAIN();
