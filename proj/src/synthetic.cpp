#include "msflow/synthetic.hpp"

#include <random>

namespace msflow {

NetworkCase synthetic_case(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto between = [&](double a, double b) { return a + (b - a) * unit(rng); };

    NetworkCase c;
    c.s_base_mva = 100.0;
    c.v_base_kv = 110.0;
    for (std::size_t k = 0; k < n; ++k) {
        BusSpec b;
        b.id = static_cast<int>(k + 1);
        if (k == 0) {
            b.kind = BusKind::VD;
            b.v_kv = 110.0;
        } else if (unit(rng) < 0.2) {
            b.kind = BusKind::PV;
            b.v_kv = between(108.0, 114.0);
            b.p_mw = -between(10.0, 40.0);
        } else {
            b.kind = BusKind::PQ;
            b.p_mw = between(2.0, 15.0);
            b.q_mvar = between(0.0, 6.0);
            if (unit(rng) < 0.15) b.shunt_b_s = between(1e-5, 1e-4);
            if (unit(rng) < 0.1) b.shunt_g_s = between(1e-6, 1e-5);
        }
        c.buses.push_back(b);
    }

    auto branch = [&](std::size_t a, std::size_t b) {
        BranchSpec br;
        br.from = static_cast<int>(a + 1);
        br.to = static_cast<int>(b + 1);
        br.x_ohm = between(4.0, 15.0);
        br.r_ohm = br.x_ohm * between(0.1, 0.4);
        br.b_s = between(0.0, 5e-5);
        c.branches.push_back(br);
    };
    if (n == 2) branch(0, 1);
    for (std::size_t k = 0; n > 2 && k < n; ++k) branch(k, (k + 1) % n);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t k = 0; n > 3 && k < n / 3; ++k) {
        const auto a = pick(rng), b = pick(rng);
        const auto gap = a > b ? a - b : b - a;
        if (gap > 1 && gap < n - 1) branch(std::min(a, b), std::max(a, b));
    }
    return c;
}

}  // namespace msflow
