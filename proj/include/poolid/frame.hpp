#ifndef POOLID_FRAME_HPP
#define POOLID_FRAME_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "poolid/timeutil.hpp"

namespace poolid {

enum class ChannelRole { kInput, kOutput };

struct ChannelSpec {
  std::string name;
  std::string unit;
  ChannelRole role = ChannelRole::kInput;
};

// Uniformly sampled multivariate time series. Row i is the sample at
// start_time + i * sample_period. Missing cells are quiet NaN; a frame is
// "clean" when it contains none.
struct SignalFrame {
  UnixTime start_time = 0;
  std::int64_t sample_period = 60;  // seconds
  std::vector<ChannelSpec> channels;
  Eigen::MatrixXd values;  // n_samples x n_channels

  Eigen::Index n_samples() const { return values.rows(); }
  Eigen::Index n_channels() const { return values.cols(); }
  UnixTime time_at(Eigen::Index i) const {
    return start_time + static_cast<std::int64_t>(i) * sample_period;
  }
  UnixTime end_time() const { return time_at(n_samples()); }  // exclusive

  int channel_index(const std::string& name) const;
  std::vector<int> input_indices() const;
  std::vector<int> output_indices() const;
  Eigen::Index n_inputs() const { return (Eigen::Index)input_indices().size(); }
  Eigen::Index n_outputs() const {
    return (Eigen::Index)output_indices().size();
  }

  // Columns of `values` restricted to input/output channels, in schema order.
  Eigen::MatrixXd inputs() const;
  Eigen::MatrixXd outputs() const;

  // Rows [i0, i1) as a new frame.
  SignalFrame slice(Eigen::Index i0, Eigen::Index i1) const;
  // Rows covering [t0, t1).
  SignalFrame slice_time(UnixTime t0, UnixTime t1) const;

  bool has_missing() const { return values.hasNaN(); }
};

// The benchmark channel layout: 10 inputs followed by the two pool
// temperatures as outputs.
std::vector<ChannelSpec> benchmark_schema();

// CSV I/O in the benchmark format: header `timestamp,<names...>`, ISO-8601
// UTC timestamps, empty field = missing. Columns are reordered to match
// `schema`; gaps in the timestamp grid become NaN rows.
SignalFrame load_frame(const std::string& path,
                       const std::vector<ChannelSpec>& schema);
void save_frame(const SignalFrame& frame, const std::string& path);

}  // namespace poolid

#endif
