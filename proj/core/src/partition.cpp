#include "distcox/partition.hpp"

#include <numeric>
#include <random>

#include "distcox/error.hpp"
#include "distcox/model.hpp"

namespace distcox {

namespace {

// Fisher-Yates with explicit rejection sampling; std::shuffle's draw order is
// implementation-defined, this is not.
void shuffle_indices(std::vector<std::size_t>& idx, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v;
    do {
      v = rng();
    } while (v >= limit);
    std::swap(idx[i - 1], idx[v % bound]);
  }
}

}  // namespace

std::vector<csv::Table> partition_table(const csv::Table& pooled,
                                        const std::vector<std::size_t>& sizes,
                                        std::uint64_t seed) {
  const std::size_t total =
      std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (total != pooled.rows.size())
    throw SizeMismatch("shard sizes sum to " + std::to_string(total) +
                       " but the file has " + std::to_string(pooled.rows.size()) +
                       " rows");
  if (pooled.find_column(kPartnerVar))
    throw SizeMismatch(std::string("input already has a ") + kPartnerVar +
                       " column");

  std::vector<std::size_t> idx(pooled.rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  shuffle_indices(idx, seed);

  std::vector<csv::Table> shards;
  std::size_t next = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    csv::Table shard;
    shard.columns = pooled.columns;
    shard.columns.push_back(kPartnerVar);
    for (std::size_t i = 0; i < sizes[k]; ++i, ++next) {
      auto row = pooled.rows[idx[next]];
      row.push_back(std::to_string(k + 1));
      shard.rows.push_back(std::move(row));
    }
    shards.push_back(std::move(shard));
  }
  return shards;
}

void partition_csv(const std::filesystem::path& pooled,
                   const std::vector<std::size_t>& sizes, std::uint64_t seed,
                   const std::vector<std::filesystem::path>& out_paths) {
  if (out_paths.size() != sizes.size())
    throw SizeMismatch("need one output path per shard");
  const auto shards = partition_table(csv::read_table(pooled), sizes, seed);
  for (std::size_t k = 0; k < shards.size(); ++k)
    csv::write_table(out_paths[k], shards[k]);
}

}  // namespace distcox
