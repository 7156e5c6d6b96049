#include "poolid/frame.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "poolid/errors.hpp"

namespace poolid {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}
}  // namespace

int SignalFrame::channel_index(const std::string& name) const {
  for (size_t i = 0; i < channels.size(); ++i) {
    if (channels[i].name == name) return static_cast<int>(i);
  }
  throw DataError("unknown channel name: " + name);
}

std::vector<int> SignalFrame::input_indices() const {
  std::vector<int> idx;
  for (size_t i = 0; i < channels.size(); ++i) {
    if (channels[i].role == ChannelRole::kInput) idx.push_back((int)i);
  }
  return idx;
}

std::vector<int> SignalFrame::output_indices() const {
  std::vector<int> idx;
  for (size_t i = 0; i < channels.size(); ++i) {
    if (channels[i].role == ChannelRole::kOutput) idx.push_back((int)i);
  }
  return idx;
}

Eigen::MatrixXd SignalFrame::inputs() const {
  auto idx = input_indices();
  Eigen::MatrixXd m(n_samples(), (Eigen::Index)idx.size());
  for (size_t j = 0; j < idx.size(); ++j) m.col((Eigen::Index)j) = values.col(idx[j]);
  return m;
}

Eigen::MatrixXd SignalFrame::outputs() const {
  auto idx = output_indices();
  Eigen::MatrixXd m(n_samples(), (Eigen::Index)idx.size());
  for (size_t j = 0; j < idx.size(); ++j) m.col((Eigen::Index)j) = values.col(idx[j]);
  return m;
}

SignalFrame SignalFrame::slice(Eigen::Index i0, Eigen::Index i1) const {
  if (i0 < 0 || i1 < i0 || i1 > n_samples()) {
    throw DataError("slice out of range");
  }
  SignalFrame out;
  out.start_time = time_at(i0);
  out.sample_period = sample_period;
  out.channels = channels;
  out.values = values.middleRows(i0, i1 - i0);
  return out;
}

SignalFrame SignalFrame::slice_time(UnixTime t0, UnixTime t1) const {
  auto clampi = [&](std::int64_t i) {
    if (i < 0) return (Eigen::Index)0;
    if (i > n_samples()) return n_samples();
    return (Eigen::Index)i;
  };
  std::int64_t i0 = (t0 - start_time + sample_period - 1) / sample_period;
  std::int64_t i1 = (t1 - start_time + sample_period - 1) / sample_period;
  return slice(clampi(i0), clampi(i1));
}

std::vector<ChannelSpec> benchmark_schema() {
  using R = ChannelRole;
  return {
      {"boiler_power_kw", "kW", R::kInput},
      {"valve1_pct", "%", R::kInput},
      {"valve2_pct", "%", R::kInput},
      {"air_temp_c", "degC", R::kInput},
      {"air_humidity_pct", "%", R::kInput},
      {"outdoor_temp_c", "degC", R::kInput},
      {"recycle_flow1_m3h", "m3/h", R::kInput},
      {"recycle_flow2_m3h", "m3/h", R::kInput},
      {"refill_flow_m3h", "m3/h", R::kInput},
      {"hall_energy_kw", "kW", R::kInput},
      {"pool1_temp_c", "degC", R::kOutput},
      {"pool2_temp_c", "degC", R::kOutput},
  };
}

SignalFrame load_frame(const std::string& path,
                       const std::vector<ChannelSpec>& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty dataset file: " + path);
  auto header = split_csv_line(line);
  if (header.empty() || header[0] != "timestamp") {
    throw DataError(path + ": header must start with 'timestamp'");
  }

  // Map schema channel -> file column.
  std::vector<int> colmap(schema.size(), -1);
  for (size_t s = 0; s < schema.size(); ++s) {
    for (size_t c = 1; c < header.size(); ++c) {
      if (header[c] == schema[s].name) colmap[s] = static_cast<int>(c);
    }
    if (colmap[s] < 0) {
      throw DataError(path + ": schema channel '" + schema[s].name +
                      "' not found in file header");
    }
  }
  for (size_t c = 1; c < header.size(); ++c) {
    bool known = false;
    for (size_t s = 0; s < schema.size(); ++s) {
      if (header[c] == schema[s].name) known = true;
    }
    if (!known) throw DataError(path + ": unknown column name '" + header[c] + "'");
  }

  std::vector<UnixTime> times;
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": wrong field count");
    }
    UnixTime t;
    try {
      t = parse_iso8601(fields[0]);
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    std::vector<double> row(schema.size(), kNaN);
    for (size_t s = 0; s < schema.size(); ++s) {
      const std::string& f = fields[(size_t)colmap[s]];
      if (f.empty()) continue;
      double v;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw DataError(path + ":" + std::to_string(lineno) +
                        ": unparsable value '" + f + "'");
      }
      row[s] = v;
    }
    times.push_back(t);
    rows.push_back(std::move(row));
  }
  if (times.empty()) throw DataError(path + ": no data rows");

  // Infer period from the smallest positive gap; enforce monotonicity and
  // fill timestamp gaps with missing rows.
  std::int64_t period = 0;
  for (size_t i = 1; i < times.size(); ++i) {
    std::int64_t d = times[i] - times[i - 1];
    if (d <= 0) {
      throw DataError(path + ": non-monotonic timestamps near row " +
                      std::to_string(i + 1));
    }
    if (period == 0 || d < period) period = d;
  }
  if (period == 0) period = 60;

  SignalFrame frame;
  frame.start_time = times[0];
  frame.sample_period = period;
  frame.channels = schema;
  std::int64_t span = (times.back() - times.front()) / period + 1;
  if ((times.back() - times.front()) % period != 0) {
    throw DataError(path + ": timestamps not on a uniform grid");
  }
  frame.values.setConstant(span, (Eigen::Index)schema.size(), kNaN);
  for (size_t i = 0; i < times.size(); ++i) {
    std::int64_t r = (times[i] - times[0]) / period;
    if ((times[i] - times[0]) % period != 0) {
      throw DataError(path + ": timestamp off the uniform grid at row " +
                      std::to_string(i + 2));
    }
    for (size_t s = 0; s < rows[i].size(); ++s) {
      frame.values((Eigen::Index)r, (Eigen::Index)s) = rows[i][s];
    }
  }
  return frame;
}

void save_frame(const SignalFrame& frame, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file: " + path);
  out << "timestamp";
  for (const auto& c : frame.channels) out << ',' << c.name;
  out << '\n';
  for (Eigen::Index i = 0; i < frame.n_samples(); ++i) {
    out << format_iso8601(frame.time_at(i));
    for (Eigen::Index j = 0; j < frame.n_channels(); ++j) {
      out << ',';
      double v = frame.values(i, j);
      if (!std::isnan(v)) out << format_double(v);
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace poolid
