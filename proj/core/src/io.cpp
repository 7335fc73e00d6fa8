#include "spikesamp/io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <map>
#include <sstream>

#include "spikesamp/errors.hpp"

namespace spikesamp {

namespace {

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + what);
  }
}

template <typename T>
void read_field(const Json& j, const char* key, T& out, const std::string& what) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(what + "." + key + ": " + e.what());
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

template <typename T>
T parse_number(const std::string& text, int line) {
  T v{};
  const char* b = text.data();
  const char* e = b + text.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\r' || e[-1] == '\t')) --e;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) throw ConfigError("bad number '" + text + "' on CSV line " + std::to_string(line));
  return v;
}

// Data lines of a CSV with the expected header.
std::vector<std::vector<std::string>> read_csv(std::istream& is, const std::string& header, std::size_t columns) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty CSV, expected header '" + header + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw ConfigError("CSV header '" + line + "' does not match '" + header + "'");
  std::vector<std::vector<std::string>> rows;
  int n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != columns) throw ConfigError("CSV line " + std::to_string(n) + " has the wrong column count");
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("invalid JSON in '" + path.string() + "': " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

void write_json_file(const std::filesystem::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

Json network_to_json(const NetworkModel& model) {
  Json kernels = Json::array();
  for (const auto& e : model.entries()) {
    auto w = e.kernel.weights();
    for (std::size_t l = 0; l < w.size(); ++l) {
      if (w[l] != 0.0) kernels.push_back({e.post, e.pre, static_cast<int>(l) + 1, w[l]});
    }
  }
  Json baselines = Json::array();
  for (int i = 0; i < model.neurons(); ++i) baselines.push_back(model.baseline_series(i));
  return {{"N", model.neurons()},
          {"delta", model.delta()},
          {"nonlinearity", model.nonlinearity().name()},
          {"kernels", kernels},
          {"baselines", baselines}};
}

NetworkModel network_from_json(const Json& j) {
  check_keys(j, {"N", "delta", "nonlinearity", "kernels", "baselines"}, "network");
  int n = 0;
  double delta = 0.0;
  std::string link = "exp";
  read_field(j, "N", n, "network");
  read_field(j, "delta", delta, "network");
  read_field(j, "nonlinearity", link, "network");
  if (n < 1) throw ConfigError("network.N must be >= 1");
  if (!(delta > 0.0)) throw ConfigError("network.delta must be positive");
  std::vector<std::vector<double>> baselines;
  read_field(j, "baselines", baselines, "network");
  if (static_cast<int>(baselines.size()) != n) throw ConfigError("network.baselines must have N entries");
  for (const auto& b : baselines) {
    if (b.empty()) throw ConfigError("network.baselines entries must be non-empty");
  }
  std::map<std::pair<int, int>, std::vector<double>> weights;
  if (j.contains("kernels")) {
    const auto& ks = j.at("kernels");
    if (!ks.is_array()) throw ConfigError("network.kernels must be an array");
    for (const auto& k : ks) {
      if (!k.is_array() || k.size() != 4) throw ConfigError("kernel entries are [i, j, lag, weight]");
      int post, pre, lag;
      double w;
      try {
        post = k[0].get<int>();
        pre = k[1].get<int>();
        lag = k[2].get<int>();
        w = k[3].get<double>();
      } catch (const Json::exception& e) {
        throw ConfigError(std::string("kernel entry: ") + e.what());
      }
      if (post < 0 || post >= n || pre < 0 || pre >= n) throw ConfigError("kernel neuron index out of range");
      if (lag < 1) throw ConfigError("kernel lags must be >= 1 (strictly causal)");
      auto& v = weights[{post, pre}];
      if (static_cast<int>(v.size()) < lag) v.resize(lag, 0.0);
      v[lag - 1] = w;
    }
  }
  std::vector<NetworkModel::Entry> entries;
  for (auto& [key, w] : weights) entries.push_back({key.first, key.second, CouplingKernel(std::move(w))});
  return NetworkModel(n, delta, std::move(baselines), std::move(entries), Nonlinearity::from_name(link));
}

NetworkGenConfig network_gen_from_json(const Json& j, NetworkGenConfig c) {
  const std::string w = "network generator";
  check_keys(j,
             {"neurons", "delta", "fraction_excitatory", "connection_probability", "coupling_time_constant",
              "coupling_support", "absolute_refractory", "self_inhibition_timescale", "self_support",
              "self_inhibition_amplitude", "excitatory_weight", "inhibitory_weight", "target_rate",
              "coupling_scale", "pilot_duration", "rate_tolerance"},
             w);
  read_field(j, "neurons", c.neurons, w);
  read_field(j, "delta", c.delta, w);
  read_field(j, "fraction_excitatory", c.fraction_excitatory, w);
  read_field(j, "connection_probability", c.connection_probability, w);
  read_field(j, "coupling_time_constant", c.coupling_time_constant, w);
  read_field(j, "coupling_support", c.coupling_support, w);
  read_field(j, "absolute_refractory", c.absolute_refractory, w);
  read_field(j, "self_inhibition_timescale", c.self_inhibition_timescale, w);
  read_field(j, "self_support", c.self_support, w);
  read_field(j, "self_inhibition_amplitude", c.self_inhibition_amplitude, w);
  read_field(j, "excitatory_weight", c.excitatory_weight, w);
  read_field(j, "inhibitory_weight", c.inhibitory_weight, w);
  read_field(j, "target_rate", c.target_rate, w);
  read_field(j, "coupling_scale", c.coupling_scale, w);
  read_field(j, "pilot_duration", c.pilot_duration, w);
  read_field(j, "rate_tolerance", c.rate_tolerance, w);
  return c;
}

Json network_gen_to_json(const NetworkGenConfig& c) {
  return {{"neurons", c.neurons},
          {"delta", c.delta},
          {"fraction_excitatory", c.fraction_excitatory},
          {"connection_probability", c.connection_probability},
          {"coupling_time_constant", c.coupling_time_constant},
          {"coupling_support", c.coupling_support},
          {"absolute_refractory", c.absolute_refractory},
          {"self_inhibition_timescale", c.self_inhibition_timescale},
          {"self_support", c.self_support},
          {"self_inhibition_amplitude", c.self_inhibition_amplitude},
          {"excitatory_weight", c.excitatory_weight},
          {"inhibitory_weight", c.inhibitory_weight},
          {"target_rate", c.target_rate},
          {"coupling_scale", c.coupling_scale},
          {"pilot_duration", c.pilot_duration},
          {"rate_tolerance", c.rate_tolerance}};
}

CalciumModel calcium_from_json(const Json& j, CalciumModel c) {
  const std::string w = "calcium";
  check_keys(j,
             {"name", "tau", "amplitude", "baseline", "saturation", "kd", "gain", "offset", "noise_slope",
              "noise_floor", "frame_rate", "gibbs_time_constants", "esnr_per_bin", "esnr_per_frame"},
             w);
  read_field(j, "tau", c.tau, w);
  read_field(j, "amplitude", c.amplitude, w);
  read_field(j, "baseline", c.baseline, w);
  if (j.contains("saturation")) {
    std::string s;
    read_field(j, "saturation", s, w);
    if (s == "hill") {
      c.saturation = Saturation::hill;
    } else if (s == "linear") {
      c.saturation = Saturation::linear;
    } else {
      throw ConfigError("calcium.saturation must be 'hill' or 'linear'");
    }
  }
  read_field(j, "kd", c.kd, w);
  read_field(j, "gain", c.gain, w);
  read_field(j, "offset", c.offset, w);
  read_field(j, "noise_slope", c.noise_slope, w);
  read_field(j, "noise_floor", c.noise_floor, w);
  read_field(j, "frame_rate", c.frame_rate, w);
  read_field(j, "gibbs_time_constants", c.gibbs_time_constants, w);
  return c;
}

Json calcium_to_json(const CalciumModel& c) {
  return {{"tau", c.tau},
          {"amplitude", c.amplitude},
          {"baseline", c.baseline},
          {"saturation", c.saturation == Saturation::hill ? "hill" : "linear"},
          {"kd", c.kd},
          {"gain", c.gain},
          {"offset", c.offset},
          {"noise_slope", c.noise_slope},
          {"noise_floor", c.noise_floor},
          {"frame_rate", c.frame_rate},
          {"gibbs_time_constants", c.gibbs_time_constants}};
}

HybridConfig hybrid_from_json(const Json& j, HybridConfig c) {
  const std::string w = "hybrid";
  check_keys(j, {"t_max", "variant", "tilt_self_tail", "exact", "state_cap"}, w);
  read_field(j, "t_max", c.t_max, w);
  if (j.contains("variant")) {
    std::string v;
    read_field(j, "variant", v, w);
    c.variant = hybrid_variant_from_string(v);
  }
  read_field(j, "tilt_self_tail", c.tilt_self_tail, w);
  read_field(j, "exact", c.exact, w);
  read_field(j, "state_cap", c.state_cap, w);
  return c;
}

Json hybrid_to_json(const HybridConfig& c) {
  return {{"t_max", c.t_max},
          {"variant", to_string(c.variant)},
          {"tilt_self_tail", c.tilt_self_tail},
          {"exact", c.exact},
          {"state_cap", c.state_cap}};
}

void write_raster_csv(std::ostream& os, const SpikeRaster& raster) {
  os << "neuron,bin\n";
  for (int i = 0; i < raster.neurons(); ++i) {
    for (int t = 0; t < raster.bins(); ++t) {
      if (raster.at(i, t)) os << i << ',' << t << '\n';
    }
  }
}

SpikeRaster read_raster_csv(std::istream& is, int neurons, int bins, double delta) {
  SpikeRaster r(neurons, bins, delta);
  int line = 1;
  for (const auto& row : read_csv(is, "neuron,bin", 2)) {
    ++line;
    const int i = parse_number<int>(row[0], line);
    const int t = parse_number<int>(row[1], line);
    if (i < 0 || i >= neurons || t < 0 || t >= bins) throw ConfigError("raster spike out of range on line " + std::to_string(line));
    r.set(i, t, true);
  }
  return r;
}

void write_fluorescence_csv(std::ostream& os, const FluorescenceTrace& trace) {
  os << "frame,value\n";
  for (std::size_t k = 0; k < trace.size(); ++k) os << k << ',' << format_double(trace.values[k]) << '\n';
}

FluorescenceTrace read_fluorescence_csv(std::istream& is, int spacing) {
  if (spacing < 1) throw ConfigError("frame spacing must be >= 1");
  FluorescenceTrace trace;
  int line = 1;
  for (const auto& row : read_csv(is, "frame,value", 2)) {
    ++line;
    const int k = parse_number<int>(row[0], line);
    const int bin = (k + 1) * spacing - 1;
    if (k < 0 || (!trace.bins.empty() && bin <= trace.bins.back())) {
      throw ConfigError("frame indices must be non-negative and strictly increasing");
    }
    trace.bins.push_back(bin);
    trace.values.push_back(parse_number<double>(row[1], line));
  }
  return trace;
}

void write_samples_header(std::ostream& os) { os << "sample,neuron,bin\n"; }

void write_sample_rows(std::ostream& os, int sample, const SpikeRaster& raster, std::span<const int> hidden) {
  for (int i : hidden) {
    for (int t = 0; t < raster.bins(); ++t) {
      if (raster.at(i, t)) os << sample << ',' << i << ',' << t << '\n';
    }
  }
}

void write_marginals_csv(std::ostream& os, const std::vector<double>& rate) {
  os << "bin,rate\n";
  for (std::size_t t = 0; t < rate.size(); ++t) os << t << ',' << format_double(rate[t]) << '\n';
}

Json stats_to_json(const ChainStats& s) {
  return {{"proposals", s.proposals},
          {"accepted", s.accepted},
          {"acceptance_rate", s.acceptance_rate()},
          {"clamped", s.clamped},
          {"seconds", s.seconds}};
}

}  // namespace spikesamp
