#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "distcox/csv.hpp"

namespace distcox {

// Fixed default so demo shards are reproducible run to run.
inline constexpr std::uint64_t kDefaultPartitionSeed = 20180319;

// Deterministically shuffles the rows of a pooled delimited file under the
// seed, splits them into shards of the given sizes, and appends a dp_cd
// column valued 1..K. Throws SizeMismatch when the sizes do not sum to the
// row count or the output path count differs.
void partition_csv(const std::filesystem::path& pooled,
                   const std::vector<std::size_t>& sizes, std::uint64_t seed,
                   const std::vector<std::filesystem::path>& out_paths);

// In-memory variant returning the shard tables (with the dp_cd column).
std::vector<csv::Table> partition_table(const csv::Table& pooled,
                                        const std::vector<std::size_t>& sizes,
                                        std::uint64_t seed);

}  // namespace distcox
