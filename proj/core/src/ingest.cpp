#include "mlpenergy/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mlpenergy/csv.hpp"
#include "mlpenergy/errors.hpp"
#include "mlpenergy/stats.hpp"

namespace mlpe {

void MeasuredRun::add_flag(const std::string& flag) {
  const auto it = std::lower_bound(flags.begin(), flags.end(), flag);
  if (it == flags.end() || *it != flag)
    flags.insert(it, flag);
}

bool MeasuredRun::has_flag(const std::string& flag) const {
  return std::binary_search(flags.begin(), flags.end(), flag);
}

double power_at(std::span<const PowerSample> series, double t) {
  if (series.empty())
    raise(errc::missing_data, "no power samples");
  if (t <= series.front().timestamp_s)
    return series.front().watts;
  if (t >= series.back().timestamp_s)
    return series.back().watts;
  const auto after = std::upper_bound(series.begin(), series.end(), t,
                                      [](double value, const PowerSample& s) { return value < s.timestamp_s; });
  const auto before = after - 1;
  const double span = after->timestamp_s - before->timestamp_s;
  if (span <= 0)
    return after->watts;
  const double frac = (t - before->timestamp_s) / span;
  return before->watts + (after->watts - before->watts) * frac;
}

double integrate_energy(std::span<const PowerSample> series, double start_s, double end_s) {
  if (series.empty())
    raise(errc::missing_data, "no power samples overlap the run window");
  if (!(start_s < end_s))
    raise(errc::numeric, "integration window must satisfy start < end");

  double total = 0;
  double t_prev = start_s;
  double p_prev = power_at(series, start_s);
  for (const auto& sample : series) {
    if (sample.timestamp_s <= start_s)
      continue;
    if (sample.timestamp_s >= end_s)
      break;
    total += (p_prev + sample.watts) / 2 * (sample.timestamp_s - t_prev);
    t_prev = sample.timestamp_s;
    p_prev = sample.watts;
  }
  total += (p_prev + power_at(series, end_s)) / 2 * (end_s - t_prev);
  return total;
}

namespace {

constexpr const char* kFlagMissing = "missing_data";
constexpr const char* kFlagZeroWatts = "zero_watts";
constexpr const char* kFlagLongRuntime = "long_runtime";
constexpr const char* kFlagSigma = "sigma_outlier";
constexpr const char* kFlagNegative = "suspicious_negative_energy";
constexpr const char* kFlagNoDims = "no_task_dims";

void drop(MeasuredRun& run, const char* flag) {
  run.add_flag(flag);
  if (!run.dropped) {
    run.dropped = true;
    run.dropped_by = flag;
  }
}

} // namespace

FilterReport apply_filters(std::vector<MeasuredRun>& runs, const FilterOptions& options) {
  FilterReport report;
  report.input = static_cast<std::int64_t>(runs.size());

  for (auto& run : runs) {
    if (!run.has_samples) {
      drop(run, kFlagMissing);
      continue; // no window statistics to inspect
    }
    if (run.min_watts <= 0)
      drop(run, kFlagZeroWatts);
    if (run.runtime_s > options.long_runtime_cutoff_s)
      drop(run, kFlagLongRuntime);
  }

  // Log-runtime outliers against runs with the same dataset, parameter count,
  // and hardware class, computed over the survivors of the filters above.
  std::map<std::string, std::vector<MeasuredRun*>> groups;
  for (auto& run : runs) {
    if (run.dropped)
      continue;
    groups[run.meta.dataset + "\x1f" + std::to_string(run.meta.ntp) + "\x1f" + run.meta.hardware_class]
        .push_back(&run);
  }
  for (auto& [key, members] : groups) {
    if (members.size() < 2) {
      ++report.sigma_groups_skipped;
      continue;
    }
    std::vector<double> logs;
    logs.reserve(members.size());
    for (const auto* run : members)
      logs.push_back(std::log(run->runtime_s));
    const double mu = stats::mean(logs);
    const double sigma = std::sqrt(stats::variance(logs, mu));
    if (sigma == 0)
      continue;
    for (std::size_t i = 0; i < members.size(); ++i)
      if (std::abs(logs[i] - mu) > options.sigma_threshold * sigma)
        drop(*members[i], kFlagSigma);
  }

  for (const auto& run : runs) {
    if (!run.dropped) {
      ++report.retained;
      continue;
    }
    if (run.dropped_by == kFlagMissing)
      ++report.missing_data;
    else if (run.dropped_by == kFlagZeroWatts)
      ++report.zero_watts;
    else if (run.dropped_by == kFlagLongRuntime)
      ++report.long_runtime;
    else if (run.dropped_by == kFlagSigma)
      ++report.sigma_outlier;
  }
  return report;
}

std::map<std::string, double> estimate_idle_power(const std::vector<PowerSample>& samples,
                                                  const std::map<std::string, std::string>& node_type_of,
                                                  const std::set<std::string>& required_types,
                                                  double quantile, std::size_t min_samples) {
  std::map<std::string, std::vector<double>> by_type;
  for (const auto& sample : samples) {
    const auto it = node_type_of.find(sample.node_id);
    if (it == node_type_of.end())
      continue;
    if (required_types.contains(it->second))
      by_type[it->second].push_back(sample.watts);
  }
  std::map<std::string, double> idle;
  for (const auto& type : required_types) {
    const auto it = by_type.find(type);
    const std::size_t count = it == by_type.end() ? 0 : it->second.size();
    if (count < min_samples)
      raise(errc::insufficient_samples, "node type '" + type + "' has " + std::to_string(count) +
                                            " power samples; " + std::to_string(min_samples) +
                                            " required to estimate idle power");
    idle[type] = stats::quantile_nearest_rank(it->second, quantile);
  }
  return idle;
}

Overheads estimate_overheads(std::span<const MeasuredRun* const> reference_runs, double q) {
  if (reference_runs.empty())
    raise(errc::no_reference_runs, "no reference runs to estimate overheads from");
  std::vector<double> runtimes;
  std::vector<double> energies;
  for (const auto* run : reference_runs) {
    runtimes.push_back(run->runtime_s);
    energies.push_back(run->standardized_energy_j.value_or(run->raw_energy_j));
  }
  return {stats::quantile_nearest_rank(energies, q), stats::quantile_nearest_rank(runtimes, q)};
}

namespace {

struct NodeSeries {
  std::vector<PowerSample> samples; // sorted by time, duplicate stamps collapsed
};

std::map<std::string, NodeSeries> partition_samples(std::vector<PowerSample> samples) {
  std::stable_sort(samples.begin(), samples.end(), [](const PowerSample& a, const PowerSample& b) {
    if (a.node_id != b.node_id)
      return a.node_id < b.node_id;
    return a.timestamp_s < b.timestamp_s;
  });
  std::map<std::string, NodeSeries> by_node;
  for (auto& sample : samples) {
    auto& series = by_node[sample.node_id].samples;
    if (!series.empty() && series.back().timestamp_s == sample.timestamp_s)
      series.back() = sample; // duplicate timestamp: keep the last record
    else
      series.push_back(std::move(sample));
  }
  return by_node;
}

} // namespace

IngestResult ingest_runs(std::vector<PowerSample> samples, std::vector<JobRecord> jobs,
                         const DatasetTable& datasets, const IngestOptions& options) {
  IngestResult result;
  const auto by_node = partition_samples(std::move(samples));

  std::map<std::string, std::string> node_type_of;
  for (const auto& job : jobs) {
    const auto [it, inserted] = node_type_of.emplace(job.node_id, job.node_type);
    if (!inserted && it->second != job.node_type)
      raise(errc::parse, "node '" + job.node_id + "' appears with node types '" + it->second +
                             "' and '" + job.node_type + "'");
  }

  // One run may span several job rows (one per node); energies add up.
  std::map<std::string, std::vector<const JobRecord*>> by_run;
  for (const auto& job : jobs) {
    if (!(job.end_s > job.start_s))
      raise(errc::parse, "run '" + job.run_id + "': job end must be after start");
    by_run[job.run_id].push_back(&job);
  }

  std::vector<MeasuredRun> runs;
  runs.reserve(by_run.size());
  for (const auto& [run_id, records] : by_run) {
    MeasuredRun run;
    run.run_id = run_id;
    run.node_type = records.front()->node_type;
    run.meta = records.front()->meta;
    if (const auto it = datasets.find(run.meta.dataset); it != datasets.end())
      run.dims = it->second;
    else
      run.add_flag(kFlagNoDims);

    double min_start = std::numeric_limits<double>::infinity();
    double max_end = -std::numeric_limits<double>::infinity();
    double energy = 0;
    double min_watts = std::numeric_limits<double>::infinity();
    bool missing = false;
    for (const auto* record : records) {
      min_start = std::min(min_start, record->start_s);
      max_end = std::max(max_end, record->end_s);
      const auto node = by_node.find(record->node_id);
      if (node == by_node.end() || node->second.samples.empty()) {
        missing = true;
        continue;
      }
      const auto& series = node->second.samples;
      energy += integrate_energy(series, record->start_s, record->end_s);
      for (const auto& sample : series) {
        if (sample.timestamp_s < record->start_s || sample.timestamp_s > record->end_s)
          continue;
        min_watts = std::min(min_watts, sample.watts);
      }
    }
    run.runtime_s = max_end - min_start;
    run.has_samples = !missing;
    run.raw_energy_j = missing ? 0 : energy;
    run.min_watts = std::isfinite(min_watts) ? min_watts : 0;
    if (!missing && !std::isfinite(min_watts))
      run.min_watts = power_at(by_node.at(records.front()->node_id).samples, min_start);
    runs.push_back(std::move(run));
  }
  // map iteration already yields run_id order; keep the contract explicit
  std::sort(runs.begin(), runs.end(),
            [](const MeasuredRun& a, const MeasuredRun& b) { return a.run_id < b.run_id; });

  result.report = apply_filters(runs, options.filters);

  std::set<std::string> required_types;
  for (const auto& run : runs)
    if (!run.dropped)
      required_types.insert(run.node_type);
  if (!options.reference_node_type.empty())
    required_types.insert(options.reference_node_type);

  if (!required_types.empty()) {
    if (options.idle_power_override) {
      for (const auto& type : required_types)
        if (!options.idle_power_override->contains(type))
          raise(errc::config_mismatch, "idle power table lacks node type '" + type + "'");
      result.idle_power_w = *options.idle_power_override;
    } else {
      std::vector<PowerSample> all_samples;
      for (const auto& [node, series] : by_node)
        all_samples.insert(all_samples.end(), series.samples.begin(), series.samples.end());
      result.idle_power_w = estimate_idle_power(all_samples, node_type_of, required_types,
                                                options.idle_quantile);
    }
  }

  const double reference_idle =
      options.reference_node_type.empty() ? 0 : result.idle_power_w.at(options.reference_node_type);
  for (auto& run : runs) {
    if (run.dropped)
      continue;
    const double node_idle =
        options.reference_node_type.empty() ? 0 : result.idle_power_w.at(run.node_type);
    const double standardized =
        standardize_energy(run.raw_energy_j, run.runtime_s, node_idle, reference_idle);
    run.standardized_energy_j = standardized;
    if (standardized <= 0)
      run.add_flag(kFlagNegative);
  }

  // Overheads from the reference subset: smallest dataset, small networks.
  std::string reference_dataset;
  if (options.reference_dataset) {
    reference_dataset = *options.reference_dataset;
  } else {
    std::int64_t smallest = std::numeric_limits<std::int64_t>::max();
    for (const auto& [name, dims] : datasets) {
      const std::int64_t total = dims.n_train + dims.n_test;
      if (total < smallest) {
        smallest = total;
        reference_dataset = name;
      }
    }
  }
  std::vector<const MeasuredRun*> reference_runs;
  for (const auto& run : runs)
    if (!run.dropped && run.meta.dataset == reference_dataset && run.meta.ntp <= options.reference_max_ntp)
      reference_runs.push_back(&run);
  if (!reference_runs.empty())
    result.overheads = estimate_overheads(reference_runs, options.overhead_quantile);

  if (options.subtract_overheads) {
    if (!result.overheads)
      raise(errc::no_reference_runs,
            "overhead subtraction requested but no runs match the reference subset (dataset '" +
                reference_dataset + "', ntp <= " + std::to_string(options.reference_max_ntp) + ")");
    for (auto& run : runs) {
      if (run.dropped || !run.standardized_energy_j)
        continue;
      run.standardized_energy_j = *run.standardized_energy_j - result.overheads->energy_j;
      if (*run.standardized_energy_j <= 0)
        run.add_flag(kFlagNegative);
    }
  }

  for (auto& run : runs) {
    if (run.dropped)
      result.rejected.push_back(std::move(run));
    else
      result.runs.push_back(std::move(run));
  }
  return result;
}

std::vector<PowerSample> read_power_csv(std::istream& in, const std::string& source) {
  const auto table = csv::read_table(in, source);
  const auto node = table.column("node_id");
  const auto time = table.column("timestamp_s");
  const auto watts = table.column("watts");
  std::vector<PowerSample> samples;
  samples.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    PowerSample sample;
    sample.node_id = table.rows[i][node];
    sample.timestamp_s = csv::field_double(table, i, time);
    sample.watts = csv::field_double(table, i, watts);
    if (sample.watts < 0)
      raise(errc::parse, source + ":" + std::to_string(csv::Table::line_of_row(i)) +
                             ": negative power reading");
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::vector<JobRecord> read_jobs_csv(std::istream& in, const std::string& source) {
  const auto table = csv::read_table(in, source);
  const auto run = table.column("run_id");
  const auto node = table.column("node_id");
  const auto type = table.column("node_type");
  const auto start = table.column("start_s");
  const auto end = table.column("end_s");
  const auto dataset = table.column("dataset");
  const auto shape = table.column("shape");
  const auto depth = table.column("depth");
  const auto ntp = table.column("ntp");
  const auto hardware = table.column("hardware_class");
  const auto epochs = table.column("epochs");
  const auto train_batches = table.column("train_batches");
  const auto test_batches = table.column("test_batches");

  std::vector<JobRecord> jobs;
  jobs.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    JobRecord job;
    job.run_id = table.rows[i][run];
    job.node_id = table.rows[i][node];
    job.node_type = table.rows[i][type];
    job.start_s = csv::field_double(table, i, start);
    job.end_s = csv::field_double(table, i, end);
    job.meta.dataset = table.rows[i][dataset];
    job.meta.shape = table.rows[i][shape];
    job.meta.depth = static_cast<int>(csv::field_int(table, i, depth));
    job.meta.ntp = static_cast<std::uint64_t>(csv::field_int(table, i, ntp));
    job.meta.hardware_class = table.rows[i][hardware];
    job.meta.epochs = csv::field_int(table, i, epochs);
    job.meta.train_batches = csv::field_int(table, i, train_batches);
    job.meta.test_batches = csv::field_int(table, i, test_batches);
    jobs.push_back(std::move(job));
  }
  return jobs;
}

DatasetTable read_datasets_csv(std::istream& in, const std::string& source) {
  const auto table = csv::read_table(in, source);
  const auto name = table.column("dataset");
  const auto features = table.column("n_features");
  const auto outputs = table.column("n_outputs");
  const auto train = table.column("n_train");
  const auto test = table.column("n_test");
  const auto batch = table.column("batch_size");
  const auto dtype = table.column("dtype_bytes");
  DatasetTable datasets;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    DatasetDims dims;
    dims.n_features = csv::field_int(table, i, features);
    dims.n_outputs = csv::field_int(table, i, outputs);
    dims.n_train = csv::field_int(table, i, train);
    dims.n_test = csv::field_int(table, i, test);
    dims.batch_size = csv::field_int(table, i, batch);
    dims.dtype_bytes = static_cast<int>(csv::field_int(table, i, dtype));
    datasets[table.rows[i][name]] = dims;
  }
  return datasets;
}

std::map<std::string, double> read_idle_csv(std::istream& in, const std::string& source) {
  const auto table = csv::read_table(in, source);
  const auto type = table.column("node_type");
  const auto idle = table.column("idle_power_w");
  std::map<std::string, double> idle_power;
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    idle_power[table.rows[i][type]] = csv::field_double(table, i, idle);
  return idle_power;
}

namespace {

constexpr const char* kRunTableHeader =
    "run_id,node_type,hardware_class,dataset,shape,depth,ntp,epochs,train_batches,test_batches,"
    "n_features,n_outputs,n_train,n_test,batch_size,dtype_bytes,"
    "runtime_s,raw_energy_j,standardized_energy_j,flags";

std::string join_flags(const std::vector<std::string>& flags) {
  std::string joined;
  for (const auto& flag : flags)
    joined += (joined.empty() ? "" : ";") + flag;
  return joined;
}

} // namespace

void write_run_table(std::ostream& out, std::span<const MeasuredRun> runs) {
  out << kRunTableHeader << "\n";
  for (const auto& run : runs) {
    out << run.run_id << ',' << run.node_type << ',' << run.meta.hardware_class << ','
        << run.meta.dataset << ',' << run.meta.shape << ',' << run.meta.depth << ',' << run.meta.ntp
        << ',' << run.meta.epochs << ',' << run.meta.train_batches << ',' << run.meta.test_batches
        << ',';
    if (run.dims) {
      out << run.dims->n_features << ',' << run.dims->n_outputs << ',' << run.dims->n_train << ','
          << run.dims->n_test << ',' << run.dims->batch_size << ',' << run.dims->dtype_bytes;
    } else {
      out << ",,,,,";
    }
    out << ',' << csv::format_number(run.runtime_s) << ',' << csv::format_number(run.raw_energy_j)
        << ',';
    if (run.standardized_energy_j)
      out << csv::format_number(*run.standardized_energy_j);
    out << ',' << join_flags(run.flags) << "\n";
  }
}

std::vector<MeasuredRun> read_run_table(std::istream& in, const std::string& source) {
  const auto table = csv::read_table(in, source);
  const auto run_id = table.column("run_id");
  const auto node_type = table.column("node_type");
  const auto hardware = table.column("hardware_class");
  const auto dataset = table.column("dataset");
  const auto shape = table.column("shape");
  const auto depth = table.column("depth");
  const auto ntp = table.column("ntp");
  const auto epochs = table.column("epochs");
  const auto train_batches = table.column("train_batches");
  const auto test_batches = table.column("test_batches");
  const auto features = table.column("n_features");
  const auto outputs = table.column("n_outputs");
  const auto train = table.column("n_train");
  const auto test = table.column("n_test");
  const auto batch = table.column("batch_size");
  const auto dtype = table.column("dtype_bytes");
  const auto runtime = table.column("runtime_s");
  const auto raw = table.column("raw_energy_j");
  const auto standardized = table.column("standardized_energy_j");
  const auto flags = table.column("flags");

  std::vector<MeasuredRun> runs;
  runs.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    MeasuredRun run;
    run.run_id = table.rows[i][run_id];
    run.node_type = table.rows[i][node_type];
    run.meta.hardware_class = table.rows[i][hardware];
    run.meta.dataset = table.rows[i][dataset];
    run.meta.shape = table.rows[i][shape];
    run.meta.depth = static_cast<int>(csv::field_int(table, i, depth));
    run.meta.ntp = static_cast<std::uint64_t>(csv::field_int(table, i, ntp));
    run.meta.epochs = csv::field_int(table, i, epochs);
    run.meta.train_batches = csv::field_int(table, i, train_batches);
    run.meta.test_batches = csv::field_int(table, i, test_batches);
    if (!table.rows[i][features].empty()) {
      DatasetDims dims;
      dims.n_features = csv::field_int(table, i, features);
      dims.n_outputs = csv::field_int(table, i, outputs);
      dims.n_train = csv::field_int(table, i, train);
      dims.n_test = csv::field_int(table, i, test);
      dims.batch_size = csv::field_int(table, i, batch);
      dims.dtype_bytes = static_cast<int>(csv::field_int(table, i, dtype));
      run.dims = dims;
    }
    run.runtime_s = csv::field_double(table, i, runtime);
    run.raw_energy_j = csv::field_double(table, i, raw);
    if (!table.rows[i][standardized].empty())
      run.standardized_energy_j = csv::field_double(table, i, standardized);
    if (!table.rows[i][flags].empty())
      for (auto& flag : csv::split(table.rows[i][flags], ';'))
        run.add_flag(flag);
    run.has_samples = true;
    runs.push_back(std::move(run));
  }
  return runs;
}

} // namespace mlpe
