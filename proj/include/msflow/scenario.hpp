#pragma once

#include "msflow/network.hpp"
#include "msflow/partition.hpp"
#include "msflow/powerflow.hpp"

namespace msflow {

/// A solved operating point under a chosen slack model.
struct Scenario {
    Grid grid;
    Partition partition;
    Injections injections;  // independent powers the partition holds fixed
    SteadyState base;
};

/// Solves the case under its own VD bus. A different single slack is then
/// applied to that solved state: every bus power is frozen at its solved
/// value and the slack role moves, so the old VD bus keeps its generation.
/// Distributed slack solves the case injections directly.
Scenario prepare_scenario(const NetworkCase& c, const SlackModel& slack, const SolverOptions& opts = {});

}  // namespace msflow
