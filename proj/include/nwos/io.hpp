#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "nwos/trainer.hpp"
#include "nwos/walker.hpp"

namespace nwos {

// Shortest decimal representation that parses back to the same bits.
std::string format_double(double v);

// Header iteration,seconds,loss,rel_l2. The seconds column is written as 0 so
// identical runs produce identical bytes; wall-clock timing lives in the run
// summary instead.
void write_convergence_csv(const std::string& path, const ConvergenceLog& log);

// Lines of comma-separated coordinates, optional blank lines and '#' comments.
// expected_dim -1 infers the width from the first row.
PointBatch read_points_csv(const std::string& path, int expected_dim = -1);

// Header x1,...,xd,estimate,stderr,mean_steps; one row per point.
void write_estimates_csv(const std::string& path, const PointBatch& points,
                         const PointwiseEstimate& est);

std::uint64_t fnv1a64(std::string_view text);

// Hash of the semantic configuration: sorted key=value lines. Callers exclude
// fields that do not affect results (output paths, thread counts).
std::uint64_t config_hash(const std::map<std::string, std::string>& fields);
std::string hex64(std::uint64_t v);

}  // namespace nwos
