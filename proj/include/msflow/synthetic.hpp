#pragma once

#include <cstdint>

#include "msflow/network.hpp"

namespace msflow {

/// Random meshed test network: a ring with extra chords, bus 1 as VD, about
/// a fifth of the rest PV, the others PQ with light loads. Branches carry
/// line charging and a few buses get shunts. Intended for tests and
/// benchmarks; the same seed always yields the same case.
NetworkCase synthetic_case(std::size_t n, std::uint64_t seed);

}  // namespace msflow
