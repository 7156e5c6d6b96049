#include "poolid/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "poolid/errors.hpp"

namespace poolid {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median_of(std::vector<double>& v) {
  if (v.empty()) return kNaN;
  size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    double lo = *std::max_element(v.begin(), v.begin() + mid);
    m = 0.5 * (lo + m);
  }
  return m;
}
}  // namespace

CleanOutcome clean_faults(const SignalFrame& frame, int max_gap,
                          double spike_sigma, int median_window) {
  CleanOutcome out;
  const Eigen::Index n = frame.n_samples();
  const Eigen::Index nc = frame.n_channels();

  // A row is missing if every cell is NaN; long runs of missing rows split
  // the dataset. Per-channel short NaN runs are interpolated below.
  std::vector<bool> row_missing(static_cast<size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    row_missing[(size_t)i] = frame.values.row(i).hasNaN();
  }
  Eigen::Index i = 0;
  while (i < n) {
    if (!row_missing[(size_t)i]) {
      ++i;
      continue;
    }
    Eigen::Index j = i;
    while (j < n && row_missing[(size_t)j]) ++j;
    if (j - i > max_gap) out.long_gaps.emplace_back(i, j);
    i = j;
  }
  if (!out.long_gaps.empty()) return out;

  SignalFrame cleaned = frame;
  // Linear interpolation of short NaN runs, per channel.
  for (Eigen::Index c = 0; c < nc; ++c) {
    Eigen::Index k = 0;
    while (k < n) {
      if (!std::isnan(cleaned.values(k, c))) {
        ++k;
        continue;
      }
      Eigen::Index j = k;
      while (j < n && std::isnan(cleaned.values(j, c))) ++j;
      if (k == 0 || j == n) {
        // Edge run: hold the nearest value.
        double v = (k == 0) ? cleaned.values(j, c) : cleaned.values(k - 1, c);
        if (k == 0 && j == n) {
          throw DataError("channel entirely missing: " +
                          cleaned.channels[(size_t)c].name);
        }
        for (Eigen::Index t = k; t < j; ++t) cleaned.values(t, c) = v;
      } else {
        double a = cleaned.values(k - 1, c);
        double b = cleaned.values(j, c);
        for (Eigen::Index t = k; t < j; ++t) {
          double w = double(t - (k - 1)) / double(j - (k - 1));
          cleaned.values(t, c) = a + w * (b - a);
        }
      }
      k = j;
    }
  }

  // Spike removal: rolling median +/- spike_sigma * (1.4826 * MAD). The
  // window is kept symmetric (shrunk near the edges): a one-sided window
  // biases the median on smooth trends and flags legitimate samples.
  const Eigen::Index half = median_window / 2;
  Eigen::MatrixXd orig = cleaned.values;
  for (Eigen::Index c = 0; c < nc; ++c) {
    for (Eigen::Index t = 0; t < n; ++t) {
      Eigen::Index h = std::min({half, t, n - 1 - t});
      if (h < 3) continue;  // too close to the edge to judge
      Eigen::Index lo = t - h;
      Eigen::Index hi = t + h + 1;
      std::vector<double> win;
      win.reserve((size_t)(hi - lo));
      for (Eigen::Index s = lo; s < hi; ++s) {
        if (s != t) win.push_back(orig(s, c));
      }
      double med = median_of(win);
      std::vector<double> dev(win.size());
      for (size_t s = 0; s < win.size(); ++s) dev[s] = std::abs(win[s] - med);
      double mad = median_of(dev);
      double robust_sd = 1.4826 * mad;
      if (robust_sd <= 0) continue;  // flat window: nothing to flag
      if (std::abs(orig(t, c) - med) > spike_sigma * robust_sd) {
        cleaned.values(t, c) = med;
      }
    }
  }
  out.frame = std::move(cleaned);
  return out;
}

std::vector<SignalFrame> clean_and_split(const SignalFrame& frame, int max_gap,
                                         double spike_sigma,
                                         Eigen::Index min_section) {
  std::vector<SignalFrame> out;
  std::vector<SignalFrame> pending{frame};
  while (!pending.empty()) {
    SignalFrame f = std::move(pending.back());
    pending.pop_back();
    if (f.n_samples() < min_section) continue;
    CleanOutcome c = clean_faults(f, max_gap, spike_sigma);
    if (c.ok()) {
      out.push_back(std::move(*c.frame));
      continue;
    }
    Eigen::Index prev = 0;
    for (auto [b, e] : c.long_gaps) {
      if (b - prev >= min_section) pending.push_back(f.slice(prev, b));
      prev = e;
    }
    if (f.n_samples() - prev >= min_section) {
      pending.push_back(f.slice(prev, f.n_samples()));
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.start_time < b.start_time;
  });
  return out;
}

SignalFrame resample_moving_average(const SignalFrame& frame, int factor) {
  if (factor < 1) throw ConfigError("resample factor must be >= 1");
  if (factor == 1) return frame;
  SignalFrame out;
  out.start_time = frame.start_time;
  out.sample_period = frame.sample_period * factor;
  out.channels = frame.channels;
  Eigen::Index n_out = frame.n_samples() / factor;
  out.values.resize(n_out, frame.n_channels());
  for (Eigen::Index i = 0; i < n_out; ++i) {
    out.values.row(i) =
        frame.values.middleRows(i * factor, factor).colwise().mean();
  }
  return out;
}

NormalizationStats fit_normalization(const std::vector<SignalFrame>& frames) {
  if (frames.empty()) throw DataError("fit_normalization: no frames");
  const Eigen::Index nc = frames[0].n_channels();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(nc);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(nc);
  double count = 0;
  for (const auto& f : frames) {
    if (f.n_channels() != nc) throw DataError("channel count mismatch");
    sum += f.values.colwise().sum().transpose();
    sumsq += f.values.array().square().colwise().sum().matrix().transpose();
    count += static_cast<double>(f.n_samples());
  }
  if (count == 0) throw DataError("fit_normalization: no samples");
  NormalizationStats stats;
  stats.mean = sum / count;
  stats.scale = ((sumsq / count).array() - stats.mean.array().square())
                    .max(0.0)
                    .sqrt()
                    .max(NormalizationStats::kMinScale)
                    .matrix();
  return stats;
}

SignalFrame apply_normalization(const SignalFrame& frame,
                                const NormalizationStats& stats) {
  if (frame.n_channels() != stats.mean.size()) {
    throw DataError("apply_normalization: channel count mismatch");
  }
  SignalFrame out = frame;
  out.values =
      (frame.values.rowwise() - stats.mean.transpose()).array().rowwise() /
      stats.scale.transpose().array();
  return out;
}

SignalFrame invert_normalization(const SignalFrame& frame,
                                 const NormalizationStats& stats) {
  if (frame.n_channels() != stats.mean.size()) {
    throw DataError("invert_normalization: channel count mismatch");
  }
  SignalFrame out = frame;
  out.values =
      (frame.values.array().rowwise() * stats.scale.transpose().array())
          .rowwise() +
      stats.mean.transpose().array();
  return out;
}

std::vector<AnchorWindow> make_anchor_windows(const SignalFrame& frame,
                                              Eigen::Index past_len,
                                              Eigen::Index P,
                                              Eigen::Index stride) {
  if (past_len < 1 || P < 1 || stride < 1) {
    throw ConfigError("make_anchor_windows: past_len, P, stride must be >= 1");
  }
  std::vector<AnchorWindow> windows;
  const Eigen::Index n = frame.n_samples();
  if (n < past_len + P) return windows;
  const auto in_idx = frame.input_indices();
  const auto out_idx = frame.output_indices();
  for (Eigen::Index a = past_len - 1; a + P < n; a += stride) {
    AnchorWindow w;
    w.anchor_index = a;
    w.past = frame.values.middleRows(a - past_len + 1, past_len);
    w.past_inputs.resize(past_len, (Eigen::Index)in_idx.size());
    w.past_outputs.resize(past_len, (Eigen::Index)out_idx.size());
    for (Eigen::Index r = 0; r < past_len; ++r) {
      for (size_t j = 0; j < in_idx.size(); ++j) {
        w.past_inputs(r, (Eigen::Index)j) = w.past(r, in_idx[j]);
      }
      for (size_t j = 0; j < out_idx.size(); ++j) {
        w.past_outputs(r, (Eigen::Index)j) = w.past(r, out_idx[j]);
      }
    }
    w.future_inputs.resize(P, (Eigen::Index)in_idx.size());
    w.future_outputs.resize(P, (Eigen::Index)out_idx.size());
    for (Eigen::Index p = 0; p < P; ++p) {
      for (size_t j = 0; j < in_idx.size(); ++j) {
        w.future_inputs(p, (Eigen::Index)j) = frame.values(a + p, in_idx[j]);
      }
      for (size_t j = 0; j < out_idx.size(); ++j) {
        w.future_outputs(p, (Eigen::Index)j) =
            frame.values(a + 1 + p, out_idx[j]);
      }
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

namespace {
void collect(const std::vector<Section>& sections, const char* role,
             std::vector<std::pair<UnixTime, UnixTime>>& ranges,
             std::vector<std::string>& roles) {
  for (const auto& s : sections) {
    ranges.emplace_back(s.frame.start_time, s.frame.end_time());
    roles.emplace_back(role);
  }
}
}  // namespace

void check_split_invariants(const DatasetSplit& split) {
  std::vector<std::pair<UnixTime, UnixTime>> ranges;
  std::vector<std::string> roles;
  collect(split.train, "train", ranges, roles);
  collect(split.validation, "validation", ranges, roles);
  collect(split.test, "test", ranges, roles);
  collect(split.scenarios, "scenario", ranges, roles);
  if (ranges.empty()) throw DataError("empty split");

  std::vector<size_t> order(ranges.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return ranges[a].first < ranges[b].first;
  });
  for (size_t i = 1; i < order.size(); ++i) {
    if (ranges[order[i]].first < ranges[order[i - 1]].second) {
      throw DataError("split sections overlap in time");
    }
  }
  if (!split.test.empty()) {
    if (roles[order.front()] != "test" || roles[order.back()] != "test") {
      throw DataError("temporal extremes must be test sections");
    }
  }
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("manifest parse error: " + std::string(e.what()));
  }
  std::vector<ManifestEntry> entries;
  for (const auto& e : j.at("sections")) {
    ManifestEntry m;
    m.label = e.at("label").get<std::string>();
    m.role = e.at("role").get<std::string>();
    m.start = parse_iso8601(e.at("start").get<std::string>());
    m.end = parse_iso8601(e.at("end").get<std::string>());
    if (m.role != "train" && m.role != "validation" && m.role != "test" &&
        m.role != "scenario") {
      throw DataError("manifest: unknown role '" + m.role + "'");
    }
    if (m.end <= m.start) throw DataError("manifest: empty section " + m.label);
    entries.push_back(std::move(m));
  }
  return entries;
}

void save_manifest(const std::vector<ManifestEntry>& entries,
                   const std::string& path) {
  nlohmann::json sections = nlohmann::json::array();
  for (const auto& e : entries) {
    sections.push_back({{"label", e.label},
                        {"role", e.role},
                        {"start", format_iso8601(e.start)},
                        {"end", format_iso8601(e.end)}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << nlohmann::json{{"sections", sections}}.dump(2) << '\n';
}

DatasetSplit apply_manifest(const std::vector<SignalFrame>& timeline,
                            const std::vector<ManifestEntry>& entries) {
  DatasetSplit split;
  for (const auto& e : entries) {
    bool found = false;
    for (const auto& f : timeline) {
      SignalFrame s = f.slice_time(e.start, e.end);
      if (s.n_samples() == 0) continue;
      found = true;
      Section sec{e.label, std::move(s)};
      if (e.role == "train") split.train.push_back(std::move(sec));
      else if (e.role == "validation") split.validation.push_back(std::move(sec));
      else if (e.role == "test") split.test.push_back(std::move(sec));
      else split.scenarios.push_back(std::move(sec));
    }
    if (!found) throw DataError("manifest section has no data: " + e.label);
  }
  return split;
}

void save_stats(const NormalizationStats& stats,
                const std::vector<ChannelSpec>& channels,
                const std::string& path) {
  nlohmann::json j;
  for (Eigen::Index i = 0; i < stats.mean.size(); ++i) {
    j["channels"].push_back({{"name", channels[(size_t)i].name},
                             {"mean", stats.mean(i)},
                             {"scale", stats.scale(i)}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write stats: " + path);
  out << j.dump(2) << '\n';
}

NormalizationStats load_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stats: " + path);
  nlohmann::json j;
  in >> j;
  const auto& ch = j.at("channels");
  NormalizationStats stats;
  stats.mean.resize((Eigen::Index)ch.size());
  stats.scale.resize((Eigen::Index)ch.size());
  for (size_t i = 0; i < ch.size(); ++i) {
    stats.mean((Eigen::Index)i) = ch[i].at("mean").get<double>();
    stats.scale((Eigen::Index)i) = ch[i].at("scale").get<double>();
  }
  return stats;
}

}  // namespace poolid
