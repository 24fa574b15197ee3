#include <doctest.h>

#include "msflow/errors.hpp"
#include "support.hpp"

using namespace msflow;

TEST_CASE("flat start with zero injections has zero mismatch") {
    auto c = testing::fourbus();
    for (auto& b : c.buses) b.p_mw = b.q_mvar = 0.0;
    const auto g = Grid::from_case(c);
    const Partition part(g.net, SingleSlack{4});
    const auto s = flat_start(g, part);
    const Injections zero{Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4)};
    CHECK(mismatch(g, part, zero, s.delta, s.v, 0.0).lpNorm<Eigen::Infinity>() == 0.0);
    // the polar reference sums sines of loss angles, exact only to roundoff
    CHECK(mismatch(g, part, zero, s.delta, s.v, 0.0, true).lpNorm<Eigen::Infinity>() <
          1e-15 * g.y.magnitude.maxCoeff());
}

TEST_CASE("base case of the fourbus system") {
    const auto sc = prepare_scenario(testing::fourbus(), SingleSlack{4});
    CHECK(std::abs(testing::mw(sc.grid, sc.base, 4) + 22.1951) < 1e-3);
    CHECK(sc.base.slack_power * 100.0 == doctest::Approx(-22.1951).epsilon(5e-5));
    CHECK(sc.base.losses * 100.0 == doctest::Approx(2.1951).epsilon(5e-5));
    CHECK(sc.base.mismatch_norm < 1e-8);
    const auto bus = bus_mismatch(sc.grid, sc.base.p, sc.base.q, sc.base.delta, sc.base.v);
    CHECK(bus.dp.lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK(bus.dq.lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("lossless base case") {
    const auto sc = prepare_scenario(testing::fourbus_lossless(), SingleSlack{4});
    CHECK(std::abs(testing::mw(sc.grid, sc.base, 4) + 20.0) < 1e-6);
    CHECK(std::abs(sc.base.balance) < 1e-9);
}

TEST_CASE("mismatch is additive in the injections") {
    const auto sc = prepare_scenario(testing::fourbus(), SingleSlack{4});
    const double eps = 1.0 / 1024.0;
    Injections inj = sc.injections;
    const auto r0 = mismatch(sc.grid, sc.partition, inj, sc.base.delta, sc.base.v, 0.0);
    inj.p(1) += eps;
    const auto r1 = mismatch(sc.grid, sc.partition, inj, sc.base.delta, sc.base.v, 0.0);
    const auto row = *sc.partition.p_row(1);
    CHECK(r1(row) - r0(row) == doctest::Approx(eps).epsilon(1e-12));
    Eigen::VectorXd diff = r1 - r0;
    diff(row) = 0.0;
    CHECK(diff.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("lossless transfer beyond the line limit diverges") {
    auto c = testing::fourbus_lossless();
    c.buses[1].p_mw = -340.0;
    c.buses[2].p_mw = 340.0;
    const auto g = Grid::from_case(c);
    const Partition part(g.net, SingleSlack{4});
    try {
        newton_solve(g, part, Injections::from_network(g.net));
        FAIL("expected divergence");
    } catch (const Error& e) {
        CHECK_FALSE(e.is_input_error());
    }
    CHECK_THROWS_AS(prepare_scenario(c, SingleSlack{4}), Error);
}

TEST_CASE("iteration limit is reported") {
    const auto g = Grid::from_case(testing::fourbus());
    const Partition part(g.net, SingleSlack{4});
    SolverOptions o;
    o.max_iterations = 1;
    try {
        newton_solve(g, part, Injections::from_network(g.net), o);
        FAIL("expected MaxIterations");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MaxIterations);
    }
}

TEST_CASE("Newton converges quadratically from flat start") {
    const auto g = Grid::from_case(testing::fourbus());
    const Partition part(g.net, SingleSlack{4});
    const auto s = newton_solve(g, part, Injections::from_network(g.net), testing::tight());
    const auto& r = s.residual_history;
    REQUIRE(r.size() >= 3);
    int checked = 0;
    for (std::size_t k = 0; k + 1 < r.size(); ++k) {
        if (r[k] >= 1e-2 || r[k + 1] < 1e-13) continue;
        CHECK(r[k + 1] <= 10.0 * r[k] * r[k]);
        ++checked;
    }
    CHECK(checked >= 1);
}

TEST_CASE("moving the slack keeps the state") {
    for (const auto& c : {testing::fourbus(), testing::ninebus()}) {
        const int ref = c.buses[to_per_unit(c).reference_bus()].id;
        const auto a = prepare_scenario(c, SingleSlack{ref}, testing::tight());
        // first PV bus
        int other = 0;
        for (const auto& b : c.buses)
            if (b.kind == BusKind::PV) {
                other = b.id;
                break;
            }
        REQUIRE(other != 0);
        const auto b = prepare_scenario(c, SingleSlack{other}, testing::tight());
        const auto k = static_cast<Eigen::Index>(b.grid.net.index_of(other));
        const double shift = b.base.delta(k) - a.base.delta(k);
        CHECK((b.base.delta.array() - shift - a.base.delta.array()).abs().maxCoeff() < 1e-9);
        CHECK((b.base.v - a.base.v).lpNorm<Eigen::Infinity>() < 1e-9);
        CHECK((b.base.p - a.base.p).lpNorm<Eigen::Infinity>() < 1e-9);
    }
}

TEST_CASE("indicator participation reproduces the single slack") {
    for (const auto& c : {testing::fourbus(), testing::ninebus()}) {
        const int ref = c.buses[to_per_unit(c).reference_bus()].id;
        const auto single = prepare_scenario(c, SingleSlack{ref}, testing::tight());
        const auto dist = prepare_scenario(c, DistributedSlack{{{ref, 1.0}}, ref, true}, testing::tight());
        CHECK((single.base.delta - dist.base.delta).lpNorm<Eigen::Infinity>() < 1e-9);
        CHECK((single.base.v - dist.base.v).lpNorm<Eigen::Infinity>() < 1e-9);
        CHECK((single.base.p - dist.base.p).lpNorm<Eigen::Infinity>() < 1e-9);
        CHECK(std::abs(single.base.slack_power - dist.base.slack_power) < 1e-9);
    }
}

TEST_CASE("distributed slack shares the balance") {
    const auto sc = prepare_scenario(testing::fourbus(), DistributedSlack{{{2, 0.5}, {4, 0.5}}, 4, true});
    const auto& p = sc.base.p;
    CHECK(p(1) - (-0.5) == doctest::Approx(0.5 * sc.base.slack_power));
    CHECK(p(3) == doctest::Approx(0.5 * sc.base.slack_power));
    CHECK(p(0) == doctest::Approx(0.2));
    const auto bus = bus_mismatch(sc.grid, sc.base.p, sc.base.q, sc.base.delta, sc.base.v);
    CHECK(bus.dp.lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("slack model validation") {
    const auto g = Grid::from_case(testing::fourbus());
    CHECK_THROWS_AS(Partition(g.net, SingleSlack{9}), Error);
    CHECK_THROWS_AS(Partition(g.net, DistributedSlack{{{2, 0.4}, {4, 0.5}}, 4, true}), Error);
    CHECK_THROWS_AS(Partition(g.net, DistributedSlack{{{2, -0.5}, {4, 1.5}}, 4, true}), Error);
    CHECK_NOTHROW(Partition(g.net, DistributedSlack{{{2, -0.5}, {4, 1.5}}, 4, false}));
    CHECK_THROWS_AS(Partition(g.net, DistributedSlack{{{2, 1.0}}, 7, true}), Error);
    CHECK_THROWS_AS(Partition(g.net, DistributedSlack{{}, 4, true}), Error);

    const auto g9 = Grid::from_case(testing::ninebus());
    const auto pq = g9.net.buses[1].id;
    REQUIRE(g9.net.buses[1].kind == BusKind::PQ);
    CHECK_THROWS_AS(Partition(g9.net, DistributedSlack{{{1, 1.0}}, pq, true}), Error);
}

TEST_CASE("partition layout") {
    const auto g = Grid::from_case(testing::ninebus());
    const Partition single(g.net, SingleSlack{1});
    std::size_t pq = 0;
    for (const auto& b : g.net.buses) pq += b.kind == BusKind::PQ;
    CHECK(single.dimension() == g.size() - 1 + pq);
    CHECK_FALSE(single.p_row(0).has_value());

    const Partition dist(g.net, DistributedSlack{{{1, 0.5}, {3, 0.5}}, 1, true});
    CHECK(dist.dimension() == g.size() + pq);
    CHECK(dist.p_row(0).has_value());
    CHECK(dist.unknowns().back().quantity == Quantity::SlackPower);

    const auto s = flat_start(g, dist);
    const Eigen::VectorXd x = dist.pack(s.delta, s.v, 0.25);
    Eigen::VectorXd d = Eigen::VectorXd::Constant(9, 3.0), v = s.v;
    for (std::size_t k = 0; k < 9; ++k)
        if (!dist.voltage_fixed(k)) v(static_cast<Eigen::Index>(k)) = 7.0;
    double ps = 0.0;
    dist.unpack(x, d, v, ps);
    CHECK(ps == 0.25);
    CHECK((v - s.v).norm() == 0.0);
    CHECK(d(0) == 3.0);
    CHECK(d.tail(8).norm() == 0.0);
}

TEST_CASE("loss balance equals series losses without shunts") {
    testing::StateGenerator gen(testing::fourbus(), 5);
    for (const auto& sc : gen.draw(8, testing::tight())) {
        CHECK(std::abs(-sc.base.balance - sc.base.losses) < 1e-9);
    }
}

TEST_CASE("jacobian blocks of the all-PV fourbus case") {
    const auto sc = prepare_scenario(testing::fourbus(), SingleSlack{4});
    const auto jac = jacobians(sc.grid, sc.partition, sc.base);
    REQUIRE(jac.load_flow.rows() == 3);
    CHECK((jac.load_flow - jac.full.topLeftCorner(3, 3)).norm() == 0.0);
    REQUIRE(jac.augmented);
    CHECK(jac.augmented->rows() == 4);
    CHECK((*jac.augmented - jac.full.topLeftCorner(4, 4)).norm() == 0.0);
}

TEST_CASE("distributed load-flow jacobian carries the participation column") {
    const auto sc = prepare_scenario(testing::fourbus(), DistributedSlack{{{2, 0.5}, {4, 0.5}}, 4, true});
    const auto jac = jacobians(sc.grid, sc.partition, sc.base);
    REQUIRE(jac.load_flow.rows() == 4);
    CHECK_FALSE(jac.augmented.has_value());
    const Eigen::VectorXd col = jac.load_flow.col(3);
    CHECK(col(0) == 0.0);
    CHECK(col(1) == 0.5);
    CHECK(col(2) == 0.0);
    CHECK(col(3) == 0.5);
}

TEST_CASE("block determinant equals det of the load-flow jacobian") {
    for (const auto& c : {testing::fourbus(), testing::ninebus()}) {
        const auto sc = prepare_scenario(c, SingleSlack{c.buses[to_per_unit(c).reference_bus()].id});
        const auto jf = full_jacobian(sc.grid, sc.base.delta, sc.base.v);
        const double a = dependent_jacobian(jf, sc.partition).determinant();
        const double b = reduced_jacobians(jf, sc.partition).load_flow.determinant();
        CHECK(testing::rel_err(a, b, 0.0) < 1e-9);
    }
}
