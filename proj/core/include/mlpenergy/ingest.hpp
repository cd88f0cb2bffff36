#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace mlpe {

struct PowerSample {
  std::string node_id;
  double timestamp_s = 0;
  double watts = 0;
};

struct JobMetadata {
  std::string dataset;
  std::string shape;
  int depth = 2;
  std::uint64_t ntp = 0;
  std::string hardware_class; // "cpu" | "gpu"
  std::int64_t epochs = 1;
  std::int64_t train_batches = 1;
  std::int64_t test_batches = 0;
};

struct JobRecord {
  std::string run_id;
  std::string node_id;
  std::string node_type;
  double start_s = 0;
  double end_s = 0;
  JobMetadata meta;
};

struct DatasetDims {
  std::int64_t n_features = 1;
  std::int64_t n_outputs = 1;
  std::int64_t n_train = 1;
  std::int64_t n_test = 0;
  std::int64_t batch_size = 256;
  int dtype_bytes = 4;
};

using DatasetTable = std::map<std::string, DatasetDims>;

struct MeasuredRun {
  std::string run_id;
  std::string node_type;
  JobMetadata meta;
  std::optional<DatasetDims> dims;
  double raw_energy_j = 0;
  double runtime_s = 0;
  std::optional<double> standardized_energy_j;
  std::vector<std::string> flags; // sorted, unique
  bool dropped = false;
  std::string dropped_by; // primary filter for report accounting

  // window statistics feeding the filters
  double min_watts = 0;
  bool has_samples = false;

  void add_flag(const std::string& flag);
  bool has_flag(const std::string& flag) const;
};

// Trapezoidal integral of the piecewise-linear power curve over [start, end].
// Endpoint powers interpolate between bracketing samples; beyond the series
// ends the nearest sample value extends as a constant. The samples must be
// one node's series, time sorted. errc::missing_data when empty.
double integrate_energy(std::span<const PowerSample> node_series, double start_s, double end_s);

// Power at one instant under the same interpolation rules.
double power_at(std::span<const PowerSample> node_series, double t);

struct FilterOptions {
  double long_runtime_cutoff_s = 75000;
  double sigma_threshold = 4;
};

struct FilterReport {
  std::int64_t input = 0;
  std::int64_t retained = 0;
  std::int64_t missing_data = 0;
  std::int64_t zero_watts = 0;
  std::int64_t long_runtime = 0;
  std::int64_t sigma_outlier = 0;
  std::int64_t sigma_groups_skipped = 0; // groups of size < 2

  std::int64_t dropped() const { return missing_data + zero_watts + long_runtime + sigma_outlier; }
};

// Marks dropped runs in place (flags plus dropped_by) and reports per-filter
// counts. Attribution order: missing data, zero-watt samples, the hard
// runtime cutoff, then the per-group log-runtime sigma filter computed over
// the survivors grouped by (dataset, ntp, hardware_class).
FilterReport apply_filters(std::vector<MeasuredRun>& runs, const FilterOptions& options = {});

// Per-node-type idle power: the `quantile` quantile (lower nearest rank) of
// that type's power samples. errc::insufficient_samples below min_samples.
std::map<std::string, double> estimate_idle_power(const std::vector<PowerSample>& samples,
                                                  const std::map<std::string, std::string>& node_type_of,
                                                  const std::set<std::string>& required_types,
                                                  double quantile = 0.02, std::size_t min_samples = 50);

inline double standardize_energy(double raw_energy_j, double runtime_s, double node_idle_w,
                                 double reference_idle_w) {
  return raw_energy_j - (node_idle_w - reference_idle_w) * runtime_s;
}

struct Overheads {
  double energy_j = 0;
  double runtime_s = 0;
};

// q-quantile (lower nearest rank) of runtime and standardized energy over the
// reference runs, independently. errc::no_reference_runs when empty.
Overheads estimate_overheads(std::span<const MeasuredRun* const> reference_runs, double q = 0.05);

struct IngestOptions {
  std::string reference_node_type;
  bool subtract_overheads = false;
  // Reference subset for overheads: this dataset (default: the smallest one
  // by total data points among runs with known dims) and ntp <= max_ntp.
  std::optional<std::string> reference_dataset;
  std::uint64_t reference_max_ntp = 1024;
  double idle_quantile = 0.02;
  double overhead_quantile = 0.05;
  FilterOptions filters;
  // Bypasses idle estimation (e.g. from published per-type quantiles).
  std::optional<std::map<std::string, double>> idle_power_override;
};

struct IngestResult {
  std::vector<MeasuredRun> runs; // retained, sorted by run_id
  std::vector<MeasuredRun> rejected;
  FilterReport report;
  std::map<std::string, double> idle_power_w;
  std::optional<Overheads> overheads;
};

IngestResult ingest_runs(std::vector<PowerSample> samples, std::vector<JobRecord> jobs,
                         const DatasetTable& datasets, const IngestOptions& options);

// Delimited text formats (CSV with a header row, no quoting).
std::vector<PowerSample> read_power_csv(std::istream& in, const std::string& source);
std::vector<JobRecord> read_jobs_csv(std::istream& in, const std::string& source);
DatasetTable read_datasets_csv(std::istream& in, const std::string& source);
std::map<std::string, double> read_idle_csv(std::istream& in, const std::string& source);
void write_run_table(std::ostream& out, std::span<const MeasuredRun> runs);
std::vector<MeasuredRun> read_run_table(std::istream& in, const std::string& source);

} // namespace mlpe
