#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spikesamp/calcium.hpp"
#include "spikesamp/hybrid.hpp"
#include "spikesamp/mh.hpp"
#include "spikesamp/network.hpp"

namespace spikesamp {

using Json = nlohmann::json;

// Reading helpers throw ConfigError on malformed input.
Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

// Network file: {"N", "delta", "nonlinearity", "kernels": [[i, j, lag, weight], ...],
// "baselines": [[b_0] or [b_0, b_1, ...] per neuron]}. Lags are 1-based bins.
Json network_to_json(const NetworkModel& model);
NetworkModel network_from_json(const Json& j);

// Generator settings; missing keys keep their defaults, unknown keys are rejected.
NetworkGenConfig network_gen_from_json(const Json& j, NetworkGenConfig base = {});
Json network_gen_to_json(const NetworkGenConfig& cfg);

CalciumModel calcium_from_json(const Json& j, CalciumModel base = {});
Json calcium_to_json(const CalciumModel& cal);

HybridConfig hybrid_from_json(const Json& j, HybridConfig base = {});
Json hybrid_to_json(const HybridConfig& cfg);

// Raster CSV: header "neuron,bin", one row per spike, neuron-major order.
void write_raster_csv(std::ostream& os, const SpikeRaster& raster);
// Dimensions are not stored in the file and must be supplied.
SpikeRaster read_raster_csv(std::istream& is, int neurons, int bins, double delta);

// Fluorescence CSV: header "frame,value"; frame k sits at bin (k+1)*spacing-1.
void write_fluorescence_csv(std::ostream& os, const FluorescenceTrace& trace);
FluorescenceTrace read_fluorescence_csv(std::istream& is, int spacing);

// Samples CSV: header "sample,neuron,bin", one row per spike.
void write_samples_header(std::ostream& os);
void write_sample_rows(std::ostream& os, int sample, const SpikeRaster& raster, std::span<const int> hidden);

// Marginals CSV: header "bin,rate".
void write_marginals_csv(std::ostream& os, const std::vector<double>& rate);

Json stats_to_json(const ChainStats& stats);

// Shortest round-trip decimal form of a double; used for every CSV value.
std::string format_double(double v);

// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace spikesamp
