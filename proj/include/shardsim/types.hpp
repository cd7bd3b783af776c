// Core scalar/vector aliases shared across the library.
//
// Shard-indexed quantities (interaction counts, workloads, costs, potentials)
// are dense k-vectors; Eigen arrays give us elementwise expressions without
// hand-rolled loops. Everything is templated on the scalar at the alias level
// so the math core stays scalar-generic even though the simulator runs in
// double.
#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace shardsim {

template <typename Scalar>
using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

// Workhorse vector type: one entry per shard, indexed 0..k-1 internally.
// Shard ids in APIs are 1-based; the -1/+1 conversion happens at call
// boundaries only.
using Vec = Array<double>;

// Dense account handle produced by AccountInterner. 32 bits is plenty for
// desk-scale traces and keeps per-transaction storage small.
using AccountIdx = std::uint32_t;

}  // namespace shardsim
