#ifndef POOLID_DATA_HPP
#define POOLID_DATA_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "poolid/frame.hpp"

namespace poolid {

struct NormalizationStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // stddev floored at kMinScale

  static constexpr double kMinScale = 1e-9;
};

// Result of fault cleaning. When a missing run exceeds max_gap the frame is
// not returned; `long_gaps` carries the [begin, end) index ranges so the
// caller can split the dataset around them.
struct CleanOutcome {
  std::optional<SignalFrame> frame;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> long_gaps;
  bool ok() const { return frame.has_value(); }
};

CleanOutcome clean_faults(const SignalFrame& frame, int max_gap = 5,
                          double spike_sigma = 6.0, int median_window = 31);

// Splits around long gaps and cleans each piece. Pieces shorter than
// min_section samples are dropped.
std::vector<SignalFrame> clean_and_split(const SignalFrame& frame,
                                         int max_gap = 5,
                                         double spike_sigma = 6.0,
                                         Eigen::Index min_section = 2);

// Block mean over `factor` consecutive samples; trailing remainder dropped.
SignalFrame resample_moving_average(const SignalFrame& frame, int factor);

NormalizationStats fit_normalization(const std::vector<SignalFrame>& frames);
SignalFrame apply_normalization(const SignalFrame& frame,
                                const NormalizationStats& stats);
SignalFrame invert_normalization(const SignalFrame& frame,
                                 const NormalizationStats& stats);

// One multi-step prediction task: `past` holds the last past_len samples of
// all channels ending at the anchor (inclusive); future_inputs holds the
// inputs u[anchor .. anchor+P-1] that drive the P transitions and
// future_outputs the targets y[anchor+1 .. anchor+P].
struct AnchorWindow {
  Eigen::Index anchor_index = 0;
  Eigen::MatrixXd past;            // past_len x n_channels
  Eigen::MatrixXd past_inputs;     // past_len x n_u (schema order)
  Eigen::MatrixXd past_outputs;    // past_len x n_y
  Eigen::MatrixXd future_inputs;   // P x n_u
  Eigen::MatrixXd future_outputs;  // P x n_y
};

std::vector<AnchorWindow> make_anchor_windows(const SignalFrame& frame,
                                              Eigen::Index past_len,
                                              Eigen::Index P,
                                              Eigen::Index stride = 1);

struct Section {
  std::string label;
  SignalFrame frame;
};

struct DatasetSplit {
  std::vector<Section> train;
  std::vector<Section> validation;
  std::vector<Section> test;
  std::vector<Section> scenarios;
};

// Throws DataError if any two sections overlap in time or the temporal
// extremes are not test sections.
void check_split_invariants(const DatasetSplit& split);

// Declarative split manifest: label -> [start, end) per role.
struct ManifestEntry {
  std::string label;
  std::string role;  // train | validation | test | scenario
  UnixTime start = 0;
  UnixTime end = 0;
};

std::vector<ManifestEntry> load_manifest(const std::string& path);
void save_manifest(const std::vector<ManifestEntry>& entries,
                   const std::string& path);

// Slices `timeline` frames (assumed clean, disjoint, time-ordered) into a
// DatasetSplit per the manifest.
DatasetSplit apply_manifest(const std::vector<SignalFrame>& timeline,
                            const std::vector<ManifestEntry>& entries);

// Normalization stats serialization (JSON).
void save_stats(const NormalizationStats& stats,
                const std::vector<ChannelSpec>& channels,
                const std::string& path);
NormalizationStats load_stats(const std::string& path);

}  // namespace poolid

#endif
