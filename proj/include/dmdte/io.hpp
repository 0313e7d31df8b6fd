#pragma once

#include <filesystem>

#include <json.hpp>

#include "dmdte/dmd.hpp"
#include "dmdte/forecast.hpp"
#include "dmdte/signal.hpp"
#include "dmdte/spdmd.hpp"

namespace dmdte {

using json = nlohmann::json;

/// Rows are time steps; the header row holds node ids after a leading step /
/// timestamp column, which only fixes ordering. Blank cells are missing.
SignalMatrix load_csv(const std::filesystem::path& path, double step_seconds = 1.0);

/// Inverse layout of load_csv; masked entries are written blank.
void write_csv(const SignalMatrix& signal, const std::filesystem::path& path);

/// Complex numbers as [re, im] pairs; modes as nested row arrays of pairs.
json to_json(const DmdDecomposition& dec);
DmdDecomposition decomposition_from_json(const json& j);

/// Horizon keys "3", "6", "12" plus overall aggregates.
json to_json(const MetricsReport& report);

/// CSV "gamma,nonzero_count,fit_loss,flags".
void write_spdmd_path(const SpdmdSweep& sweep, const std::filesystem::path& path);

/// Atomically replaces `path` with `text`.
void write_text(const std::filesystem::path& path, const std::string& text);

std::string format_double(double v);

} // namespace dmdte
