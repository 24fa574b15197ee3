#include "msflow/scenario.hpp"

#include "msflow/errors.hpp"

namespace msflow {

Scenario prepare_scenario(const NetworkCase& c, const SlackModel& slack, const SolverOptions& opts) {
    Grid grid = Grid::from_case(c);
    Partition part(grid.net, slack);
    const auto ref = grid.net.reference_bus();

    auto solve = [&](const Partition& p, const Injections& inj, const SteadyState* warm) {
        try {
            return newton_solve(grid, p, inj, opts, warm);
        } catch (const Error& e) {
            if (e.is_input_error()) throw;
            throw Error(ErrorCode::BaseCaseInfeasible, std::string("base case does not solve: ") + e.what());
        }
    };

    if (part.distributed() || part.slack_bus() == ref) {
        Injections inj = Injections::from_network(grid.net);
        SteadyState s = solve(part, inj, nullptr);
        return {std::move(grid), std::move(part), std::move(inj), std::move(s)};
    }

    const Partition own(grid.net, SingleSlack{grid.net.buses[ref].id});
    const Injections case_inj = Injections::from_network(grid.net);
    const SteadyState first = solve(own, case_inj, nullptr);
    Injections inj{first.p, case_inj.q};
    SteadyState s = solve(part, inj, &first);
    return {std::move(grid), std::move(part), std::move(inj), std::move(s)};
}

}  // namespace msflow
