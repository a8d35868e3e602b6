#pragma once

#include <filesystem>

#include "distcox/csv.hpp"
#include "distcox/model.hpp"

namespace distcox {

// Builds a partner's analysis dataset from a delimited text file. Rows where
// any referenced variable is missing or non-numeric are dropped and counted
// in dropped_rows; the event indicator derives from the censoring variable
// (event = value != censoring_level). Throws MissingColumn, EmptyDataset,
// NonPositiveTime, or ConfigError for invalid weight/frequency values.
AnalysisDataset ingest_dataset(const std::filesystem::path& file,
                               const ModelSpec& spec, int partner_id);

AnalysisDataset ingest_table(const csv::Table& table, const ModelSpec& spec,
                             int partner_id);

}  // namespace distcox
