#pragma once

#include <filesystem>

#include "distcox/orchestrate.hpp"

namespace distcox {

// Materializes the run's output-dataset catalog as `<run_id>_<table>.csv`
// files in the given msoc directory (created if absent). Values are written
// at full precision; every table is present for a converged run, while a
// non-converged run keeps the bookkeeping tables and omits the estimate
// tables. Returns the files written, in a deterministic order.
std::vector<std::filesystem::path> write_bundle(
    const RunOutputs& out, const std::filesystem::path& msoc_dir);

// Renders a plain-text report from a written bundle directory, plus the
// residual scatter data (mean martingale vs mean linear predictor per bin,
// sized by count, one series per partner) as a data file and a static SVG.
// Returns the report path. Throws IoFailure when a required table is absent.
std::filesystem::path render_report(const std::filesystem::path& msoc_dir,
                                    const std::string& run_id,
                                    const std::filesystem::path& dest_dir);

}  // namespace distcox
