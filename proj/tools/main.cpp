// mlpenergy: model, predict, fit, and measure MLP training energy from
// architecture-derived working sets placed into a memory hierarchy.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mlpenergy/advisor.hpp"
#include "mlpenergy/arch.hpp"
#include "mlpenergy/coefficients.hpp"
#include "mlpenergy/csv.hpp"
#include "mlpenergy/energy_model.hpp"
#include "mlpenergy/errors.hpp"
#include "mlpenergy/fitting.hpp"
#include "mlpenergy/hardware.hpp"
#include "mlpenergy/ingest.hpp"
#include "mlpenergy/worksets.hpp"

namespace {

using mlpe::csv::format_number;

int exit_code_for(mlpe::errc code) {
  switch (code) {
  case mlpe::errc::config_mismatch:
    return 3;
  case mlpe::errc::numeric:
  case mlpe::errc::degenerate_design:
  case mlpe::errc::degenerate_row:
  case mlpe::errc::invalid_measurement:
    return 4;
  default:
    return 2; // parse and input validation problems
  }
}

struct TaskFlags {
  std::int64_t features = 1;
  std::int64_t outputs = 1;
  std::int64_t train = 1;
  std::int64_t test = 0;
  std::int64_t batch = 256;
  int dtype_bytes = 4;

  void attach(CLI::App* cmd) {
    cmd->add_option("--features", features, "Input features per datum");
    cmd->add_option("--outputs", outputs, "Output width of the task");
    cmd->add_option("--train", train, "Training data points");
    cmd->add_option("--test", test, "Test data points");
    cmd->add_option("--batch", batch, "Batch size (data points)");
    cmd->add_option("--dtype-bytes", dtype_bytes, "Bytes per scalar (2, 4, or 8)");
  }

  mlpe::TaskSpec task() const {
    mlpe::TaskSpec t;
    t.n_features = features;
    t.n_outputs = outputs;
    t.n_train = train;
    t.n_test = test;
    t.batch_size = batch;
    t.dtype_bytes = dtype_bytes;
    t.validate();
    return t;
  }
};

struct ArchFlags {
  std::string shape = "rectangle";
  int depth = 2;
  std::uint64_t ntp = 0;
  std::vector<std::int64_t> widths;
  std::int64_t input_width = 0;
  bool residual = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--shape", shape, "Shape family (rectangle, rectangle_residual, trapezoid, "
                                      "exponential, wide_first_<N>x)");
    cmd->add_option("--depth", depth, "Layer count including the output layer");
    cmd->add_option("--ntp", ntp, "Target trainable-parameter count");
    cmd->add_option("--widths", widths, "Explicit layer widths (overrides --shape/--ntp)")
        ->delimiter(',');
    cmd->add_option("--input-width", input_width, "Input width for --widths");
    cmd->add_flag("--residual", residual, "Residual links for --widths");
  }

  mlpe::NetworkArchitecture resolve(const mlpe::TaskSpec& task) const {
    if (!widths.empty()) {
      mlpe::NetworkArchitecture arch;
      arch.input_width = input_width > 0 ? input_width : task.n_features;
      arch.layer_widths = widths;
      arch.residual = residual;
      arch.validate();
      return arch;
    }
    if (ntp == 0)
      mlpe::raise(mlpe::errc::parse, "either --widths or --ntp is required");
    return mlpe::solve_widths(mlpe::ShapeFamily::parse(shape), depth, ntp, task);
  }
};

enum class Format { table, json_lines };

Format parse_format(const std::string& text) {
  if (text == "table")
    return Format::table;
  if (text == "json-lines")
    return Format::json_lines;
  mlpe::raise(mlpe::errc::parse, "unknown --format '" + text + "' (table or json-lines)");
}

std::string json_field(const std::string& key, const std::string& value) {
  return "\"" + key + "\":\"" + value + "\"";
}

std::string json_number(const std::string& key, double value) {
  return "\"" + key + "\":" + format_number(value);
}

mlpe::PlacementPolicy parse_policy(const std::string& text) {
  if (text == "whole-set")
    return mlpe::PlacementPolicy::whole_set;
  if (text == "per-layer")
    return mlpe::PlacementPolicy::per_layer;
  mlpe::raise(mlpe::errc::parse, "unknown --placement '" + text + "' (whole-set or per-layer)");
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    mlpe::raise(mlpe::errc::parse, "cannot open '" + path + "'");
  return in;
}

// ---------------------------------------------------------------- worksets

int cmd_worksets(const std::string& hardware_path, const TaskFlags& task_flags,
                 const ArchFlags& arch_flags, const std::string& policy_text,
                 const std::string& format_text) {
  const auto format = parse_format(format_text);
  const auto hw = mlpe::HardwareSpec::load(hardware_path);
  const auto task = task_flags.task();
  const auto arch = arch_flags.resolve(task);
  const auto ws = mlpe::compute_working_sets(arch, task);
  const auto placement = mlpe::place_working_sets(ws, hw, parse_policy(policy_text));

  const auto label = [&](std::size_t level) { return hw.levels[level].label; };
  struct Row {
    const char* name;
    double bytes;
    std::size_t level;
  };
  const Row rows[] = {
      {"dataset", static_cast<double>(ws.dataset_bytes), placement.dataset},
      {"forward", static_cast<double>(ws.forward_bytes), placement.forward},
      {"forward_test", static_cast<double>(ws.forward_test_bytes), placement.forward_test},
      {"backward", static_cast<double>(ws.backward_bytes), placement.backward},
      {"inter_layer_max", static_cast<double>(ws.max_inter_layer_bytes()), placement.inter_layer_max},
  };
  const std::string ordering = "inter_layer(" + label(placement.inter_layer_max) +
                               ") <= forward_test(" + label(placement.forward_test) + ") <= forward(" +
                               label(placement.forward) + ") = backward(" + label(placement.backward) +
                               ") <= dataset(" + label(placement.dataset) + ")";

  if (format == Format::table) {
    std::cout << "ntp " << mlpe::count_parameters(arch) << "\n";
    std::cout << "working_set,bytes,level\n";
    for (const auto& row : rows)
      std::cout << row.name << ',' << format_number(row.bytes) << ',' << label(row.level) << "\n";
    std::cout << "ordering " << ordering << "\n";
  } else {
    std::cout << "{" << json_field("record", "architecture")
              << ",\"ntp\":" << mlpe::count_parameters(arch) << "}\n";
    for (const auto& row : rows)
      std::cout << "{" << json_field("record", "working_set") << "," << json_field("set", row.name)
                << "," << json_number("bytes", row.bytes) << ","
                << json_field("level", label(row.level)) << "}\n";
    std::cout << "{" << json_field("record", "ordering") << "," << json_field("chain", ordering)
              << "}\n";
  }
  return 0;
}

// ----------------------------------------------------------------- predict

int cmd_predict(const std::string& hardware_path, const std::string& coeffs_path,
                const TaskFlags& task_flags, const ArchFlags& arch_flags,
                const mlpe::RunCounts& counts, const std::string& policy_text,
                const std::string& format_text) {
  const auto format = parse_format(format_text);
  const auto hw = mlpe::HardwareSpec::load(hardware_path);
  const auto coeffs = mlpe::EnergyCoefficients::load(coeffs_path);
  coeffs.check_compatible(hw);
  const auto task = task_flags.task();
  const auto arch = arch_flags.resolve(task);
  const auto ws = mlpe::compute_working_sets(arch, task);
  const auto placement = mlpe::place_working_sets(ws, hw, parse_policy(policy_text));
  const auto ops = mlpe::count_ops(arch, task);
  const auto row =
      mlpe::build_design_row(counts, ws, placement, ops, arch.depth(), hw.level_count());
  const auto breakdown = mlpe::energy_breakdown(row, coeffs);

  std::vector<std::pair<std::string, double>> terms = {
      {"run_overhead_j", breakdown.run_overhead_j},
      {"pass_overhead_j", breakdown.pass_overhead_j},
      {"operations_j", breakdown.operations_j},
      {"layers_j", breakdown.layers_j},
  };
  for (std::size_t i = 0; i < breakdown.per_level_j.size(); ++i)
    terms.push_back({"phi_" + hw.levels[i].label + "_j", breakdown.per_level_j[i]});

  if (format == Format::table) {
    std::cout << "total_j " << format_number(breakdown.total()) << "\n";
    for (const auto& [name, value] : terms)
      std::cout << name << ' ' << format_number(value) << "\n";
  } else {
    std::cout << "{" << json_field("record", "total") << ","
              << json_number("energy_j", breakdown.total()) << "}\n";
    for (const auto& [name, value] : terms)
      std::cout << "{" << json_field("record", "term") << "," << json_field("term", name) << ","
                << json_number("energy_j", value) << "}\n";
  }
  return 0;
}

// ------------------------------------------------------------------ ingest

int cmd_ingest(const std::string& power_path, const std::string& jobs_path,
               const std::string& datasets_path, const std::string& idle_path,
               const std::string& output_path, mlpe::IngestOptions options,
               const std::string& format_text) {
  const auto format = parse_format(format_text);
  auto power_in = open_input(power_path);
  auto samples = mlpe::read_power_csv(power_in, power_path);
  auto jobs_in = open_input(jobs_path);
  auto jobs = mlpe::read_jobs_csv(jobs_in, jobs_path);
  mlpe::DatasetTable datasets;
  if (!datasets_path.empty()) {
    auto in = open_input(datasets_path);
    datasets = mlpe::read_datasets_csv(in, datasets_path);
  }
  if (!idle_path.empty()) {
    auto in = open_input(idle_path);
    options.idle_power_override = mlpe::read_idle_csv(in, idle_path);
  }

  const auto result = mlpe::ingest_runs(std::move(samples), std::move(jobs), datasets, options);

  std::ostream* table_out = &std::cout;
  std::ofstream file_out;
  if (!output_path.empty()) {
    file_out.open(output_path);
    if (!file_out)
      mlpe::raise(mlpe::errc::parse, "cannot write '" + output_path + "'");
    table_out = &file_out;
  }
  mlpe::write_run_table(*table_out, result.runs);

  std::ostream& report_out = output_path.empty() ? std::cerr : std::cout;
  const auto& report = result.report;
  if (format == Format::table) {
    report_out << "filter,count\n";
    report_out << "input," << report.input << "\n";
    report_out << "missing_data," << report.missing_data << "\n";
    report_out << "zero_watts," << report.zero_watts << "\n";
    report_out << "long_runtime," << report.long_runtime << "\n";
    report_out << "sigma_outlier," << report.sigma_outlier << "\n";
    report_out << "sigma_groups_skipped," << report.sigma_groups_skipped << "\n";
    report_out << "retained," << report.retained << "\n";
    for (const auto& [type, idle] : result.idle_power_w)
      report_out << "idle_power_w[" << type << "]," << format_number(idle) << "\n";
    if (result.overheads) {
      report_out << "overhead_energy_j," << format_number(result.overheads->energy_j) << "\n";
      report_out << "overhead_runtime_s," << format_number(result.overheads->runtime_s) << "\n";
    }
  } else {
    report_out << "{" << json_field("record", "filter_report") << ",\"input\":" << report.input
               << ",\"missing_data\":" << report.missing_data << ",\"zero_watts\":" << report.zero_watts
               << ",\"long_runtime\":" << report.long_runtime
               << ",\"sigma_outlier\":" << report.sigma_outlier
               << ",\"sigma_groups_skipped\":" << report.sigma_groups_skipped
               << ",\"retained\":" << report.retained << "}\n";
    for (const auto& [type, idle] : result.idle_power_w)
      report_out << "{" << json_field("record", "idle_power") << "," << json_field("node_type", type)
                 << "," << json_number("idle_power_w", idle) << "}\n";
    if (result.overheads)
      report_out << "{" << json_field("record", "overheads") << ","
                 << json_number("energy_j", result.overheads->energy_j) << ","
                 << json_number("runtime_s", result.overheads->runtime_s) << "}\n";
  }
  return 0;
}

// --------------------------------------------------------------------- fit

struct FitRow {
  std::string run_id;
  std::vector<double> features;
  double measured = 0;
};

std::vector<FitRow> design_rows_from_runs(const std::vector<mlpe::MeasuredRun>& runs,
                                          const mlpe::HardwareSpec& hw,
                                          mlpe::PlacementPolicy policy) {
  std::vector<FitRow> rows;
  for (const auto& run : runs) {
    if (run.dropped)
      continue;
    if (!run.dims)
      mlpe::raise(mlpe::errc::parse,
                  "run '" + run.run_id + "' lacks task dimensions; supply --datasets at ingest time");
    mlpe::TaskSpec task;
    task.n_features = run.dims->n_features;
    task.n_outputs = run.dims->n_outputs;
    task.n_train = run.dims->n_train;
    task.n_test = run.dims->n_test;
    task.batch_size = run.dims->batch_size;
    task.dtype_bytes = run.dims->dtype_bytes;
    const auto arch =
        mlpe::solve_widths(mlpe::ShapeFamily::parse(run.meta.shape), run.meta.depth, run.meta.ntp, task);
    const auto ws = mlpe::compute_working_sets(arch, task);
    const auto placement = mlpe::place_working_sets(ws, hw, policy);
    const auto ops = mlpe::count_ops(arch, task);
    const mlpe::RunCounts counts{run.meta.epochs, run.meta.train_batches, run.meta.test_batches};
    FitRow row;
    row.run_id = run.run_id;
    row.features =
        mlpe::build_design_row(counts, ws, placement, ops, arch.depth(), hw.level_count()).features;
    const double measured = run.standardized_energy_j.value_or(run.raw_energy_j);
    if (!(measured > 0))
      mlpe::raise(mlpe::errc::invalid_measurement,
                  "run '" + run.run_id + "' has non-positive measured energy");
    row.measured = measured;
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_fit(const std::string& runs_path, const std::string& hardware_path,
            const std::string& coeffs_out, const std::string& residuals_out, double holdout,
            const mlpe::FitConfig& config, const std::string& hardware_class,
            const std::string& policy_text) {
  const auto hw = mlpe::HardwareSpec::load(hardware_path);
  auto runs_in = open_input(runs_path);
  const auto runs = mlpe::read_run_table(runs_in, runs_path);
  auto rows = design_rows_from_runs(runs, hw, parse_policy(policy_text));
  if (rows.empty())
    mlpe::raise(mlpe::errc::parse, runs_path + ": no usable runs");

  // Deterministic holdout split.
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = i;
  if (holdout > 0) {
    std::mt19937_64 rng(config.seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  const auto holdout_count = static_cast<std::size_t>(holdout * static_cast<double>(rows.size()));
  const std::size_t train_count = rows.size() - holdout_count;
  if (train_count == 0)
    mlpe::raise(mlpe::errc::parse, "--holdout leaves no training rows");

  std::vector<std::string> labels;
  for (const auto& level : hw.levels)
    labels.push_back(level.label);

  mlpe::FitProblem problem;
  problem.coefficient_names = mlpe::coefficient_names(labels);
  for (std::size_t i = 0; i < train_count; ++i) {
    const auto& row = rows[order[i]];
    problem.rows.push_back(row.features);
    problem.measured_j.push_back(row.measured);
    problem.labels.push_back(row.run_id);
  }

  const auto result = mlpe::fit(problem, config);
  for (const auto& warning : result.warnings)
    std::cerr << "warning: " << warning << "\n";

  auto fitted = mlpe::coefficients_from_vector(result.coefficients, labels,
                                               hardware_class.empty() ? hw.name : hardware_class);
  if (!coeffs_out.empty())
    fitted.save(coeffs_out);
  else
    std::cout << fitted.to_json();

  const auto evaluate = [&](std::size_t begin, std::size_t end, double& mean_abs, double& rms_log) {
    double abs_sum = 0, log_sum = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& row = rows[order[i]];
      double predicted = 0;
      for (std::size_t j = 0; j < row.features.size(); ++j)
        predicted += row.features[j] * result.coefficients[j];
      const double ratio = predicted / row.measured;
      abs_sum += std::abs(ratio - 1);
      log_sum += std::log(ratio) * std::log(ratio);
    }
    const auto n = static_cast<double>(end - begin);
    mean_abs = n > 0 ? abs_sum / n : 0;
    rms_log = n > 0 ? std::sqrt(log_sum / n) : 0;
  };

  std::cout << "rows " << train_count << "\n";
  std::cout << "iterations " << result.iterations << "\n";
  std::cout << "converged " << (result.converged ? "yes" : "no") << "\n";
  std::cout << "mean_abs_rel_error " << format_number(result.mean_abs_rel_error) << "\n";
  std::cout << "rms_log_ratio " << format_number(result.rms_log_ratio) << "\n";
  if (holdout_count > 0) {
    double mean_abs = 0, rms_log = 0;
    evaluate(train_count, rows.size(), mean_abs, rms_log);
    std::cout << "holdout_rows " << holdout_count << "\n";
    std::cout << "holdout_mean_abs_rel_error " << format_number(mean_abs) << "\n";
    std::cout << "holdout_rms_log_ratio " << format_number(rms_log) << "\n";
  }

  if (!residuals_out.empty()) {
    std::ofstream out(residuals_out);
    if (!out)
      mlpe::raise(mlpe::errc::parse, "cannot write '" + residuals_out + "'");
    out << "run_id,split,measured_j,predicted_j,ratio\n";
    std::vector<std::pair<std::string, std::size_t>> ordered;
    for (std::size_t i = 0; i < rows.size(); ++i)
      ordered.push_back({rows[order[i]].run_id, i});
    std::sort(ordered.begin(), ordered.end());
    for (const auto& [run_id, position] : ordered) {
      const auto& row = rows[order[position]];
      double predicted = 0;
      for (std::size_t j = 0; j < row.features.size(); ++j)
        predicted += row.features[j] * result.coefficients[j];
      out << run_id << ',' << (position < train_count ? "train" : "holdout") << ','
          << format_number(row.measured) << ',' << format_number(predicted) << ','
          << format_number(predicted / row.measured) << "\n";
    }
  }
  return 0;
}

// ------------------------------------------------------------------ advise

int cmd_advise(const std::string& hardware_path, const std::string& coeffs_path,
               const TaskFlags& task_flags, const std::string& shape_text, int depth,
               const std::string& epoch_table_path, const std::string& loss_table_path,
               const std::string& runs_path, double target_loss, const std::string& format_text) {
  const auto format = parse_format(format_text);
  const auto hw = mlpe::HardwareSpec::load(hardware_path);
  const auto coeffs = mlpe::EnergyCoefficients::load(coeffs_path);
  coeffs.check_compatible(hw);
  const auto task = task_flags.task();
  const auto shape = mlpe::ShapeFamily::parse(shape_text);

  std::optional<mlpe::EpochModel> epoch_model;
  if (!epoch_table_path.empty()) {
    auto in = open_input(epoch_table_path);
    const auto table = mlpe::csv::read_table(in, epoch_table_path);
    const auto ntp_col = table.column("ntp");
    const auto epoch_col = table.column("minimizing_epoch");
    std::vector<std::pair<double, double>> points;
    for (std::size_t i = 0; i < table.rows.size(); ++i)
      points.push_back({mlpe::csv::field_double(table, i, ntp_col),
                        mlpe::csv::field_double(table, i, epoch_col)});
    epoch_model = mlpe::fit_epoch_model(points);
  }

  const auto picks = mlpe::recommend_ntp(task, shape, depth, hw, coeffs, epoch_model);
  if (format == Format::table) {
    if (picks.empty())
      std::cout << "no candidate working set lands within a factor of two of any cache level\n";
    else
      std::cout << "rank,ntp,anchor,level,anchor_bytes,effective_capacity_bytes,"
                   "energy_per_datum_j,energy_to_loss_j\n";
    for (std::size_t i = 0; i < picks.size(); ++i) {
      const auto& pick = picks[i];
      std::cout << (i + 1) << ',' << pick.ntp << ',' << mlpe::Recommendation::anchor_name(pick.anchor)
                << ',' << pick.level_label << ',' << format_number(pick.anchor_bytes) << ','
                << format_number(pick.anchor_capacity_bytes) << ','
                << format_number(pick.energy_per_datum_j) << ','
                << (pick.energy_to_loss_j ? format_number(*pick.energy_to_loss_j) : "") << "\n";
    }
  } else {
    for (std::size_t i = 0; i < picks.size(); ++i) {
      const auto& pick = picks[i];
      std::cout << "{" << json_field("record", "recommendation") << ",\"rank\":" << (i + 1)
                << ",\"ntp\":" << pick.ntp << ","
                << json_field("anchor", mlpe::Recommendation::anchor_name(pick.anchor)) << ","
                << json_field("level", pick.level_label) << ","
                << json_number("anchor_bytes", pick.anchor_bytes) << ","
                << json_number("effective_capacity_bytes", pick.anchor_capacity_bytes) << ","
                << json_number("energy_per_datum_j", pick.energy_per_datum_j);
      if (pick.energy_to_loss_j)
        std::cout << "," << json_number("energy_to_loss_j", *pick.energy_to_loss_j);
      std::cout << "}\n";
    }
  }

  if (!loss_table_path.empty()) {
    if (runs_path.empty())
      mlpe::raise(mlpe::errc::parse, "--loss-table needs --runs to join energies by run_id");
    auto runs_in = open_input(runs_path);
    const auto runs = mlpe::read_run_table(runs_in, runs_path);
    std::map<std::string, const mlpe::MeasuredRun*> by_id;
    for (const auto& run : runs)
      by_id[run.run_id] = &run;

    auto in = open_input(loss_table_path);
    const auto table = mlpe::csv::read_table(in, loss_table_path);
    const auto run_col = table.column("run_id");
    const auto loss_col = table.column("loss");
    std::vector<mlpe::LossGridPoint> grid;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const auto it = by_id.find(table.rows[i][run_col]);
      if (it == by_id.end())
        continue; // loss rows without a joined run are skipped
      mlpe::LossGridPoint point;
      point.ntp = it->second->meta.ntp;
      point.loss = mlpe::csv::field_double(table, i, loss_col);
      point.energy_j = it->second->standardized_energy_j.value_or(it->second->raw_energy_j);
      grid.push_back(point);
    }
    const auto isoloss = mlpe::isoloss_energy(grid, target_loss);
    if (format == Format::table) {
      std::cout << "isoloss_ntp,energy_j\n";
      for (const auto& point : isoloss)
        std::cout << point.ntp << ',' << format_number(point.energy_j) << "\n";
    } else {
      for (const auto& point : isoloss)
        std::cout << "{" << json_field("record", "isoloss") << ",\"ntp\":" << point.ntp << ","
                  << json_number("energy_j", point.energy_j) << ","
                  << json_number("target_loss", target_loss) << "}\n";
    }
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Training-energy modeling for fully connected networks"};
  app.require_subcommand(1);

  std::string hardware_path, coeffs_path, format_text = "table", policy_text = "whole-set";
  TaskFlags task_flags;
  ArchFlags arch_flags;

  auto* worksets = app.add_subcommand("worksets", "Working-set sizes and memory-level placement");
  worksets->add_option("--hardware", hardware_path, "Hardware spec file")->required();
  task_flags.attach(worksets);
  arch_flags.attach(worksets);
  worksets->add_option("--placement", policy_text, "whole-set or per-layer");
  worksets->add_option("--format", format_text, "table or json-lines");

  auto* predict = app.add_subcommand("predict", "Total-energy prediction with per-term breakdown");
  mlpe::RunCounts counts;
  predict->add_option("--hardware", hardware_path, "Hardware spec file")->required();
  predict->add_option("--coeffs", coeffs_path, "Coefficient file")->required();
  task_flags.attach(predict);
  arch_flags.attach(predict);
  predict->add_option("--epochs", counts.epochs, "Training epochs")->required();
  predict->add_option("--train-batches", counts.train_batches, "Training batches per epoch");
  predict->add_option("--test-batches", counts.test_batches, "Test batches per epoch");
  predict->add_option("--placement", policy_text, "whole-set or per-layer");
  predict->add_option("--format", format_text, "table or json-lines");

  auto* ingest = app.add_subcommand("ingest", "Power/job join, filters, standardized energies");
  std::string power_path, jobs_path, datasets_path, idle_path, output_path;
  mlpe::IngestOptions ingest_options;
  std::string reference_dataset;
  ingest->add_option("--power", power_path, "Power samples (node_id,timestamp_s,watts)")->required();
  ingest->add_option("--jobs", jobs_path, "Scheduler job records")->required();
  ingest->add_option("--reference-node-type", ingest_options.reference_node_type,
                     "Node type energies are standardized to")
      ->required();
  ingest->add_option("--datasets", datasets_path, "Dataset dimension table to join");
  ingest->add_option("--idle-table", idle_path, "Published idle power per node type (skips estimation)");
  ingest->add_option("--output", output_path, "Run-table destination (default stdout)");
  ingest->add_flag("--subtract-overheads", ingest_options.subtract_overheads,
                   "Subtract the reference-subset energy overhead from standardized energies");
  ingest->add_option("--reference-dataset", reference_dataset,
                     "Reference dataset for overheads (default: smallest by data points)");
  ingest->add_option("--reference-max-ntp", ingest_options.reference_max_ntp,
                     "Max ntp for overhead reference runs");
  ingest->add_option("--format", format_text, "table or json-lines");

  auto* fit = app.add_subcommand("fit", "Estimate coefficients from a measured-run table");
  std::string runs_path, coeffs_out, residuals_out, hardware_class;
  double holdout = 0;
  mlpe::FitConfig fit_config;
  fit->add_option("--runs", runs_path, "Run table produced by ingest")->required();
  fit->add_option("--hardware", hardware_path, "Hardware spec file")->required();
  fit->add_option("--coeffs-out", coeffs_out, "Write the fitted coefficient file here");
  fit->add_option("--residuals-out", residuals_out, "Write the per-run residual table here");
  fit->add_option("--holdout", holdout, "Holdout fraction in [0,1)")->check(CLI::Range(0.0, 0.95));
  fit->add_option("--seed", fit_config.seed, "Seed for restarts and the holdout split");
  fit->add_option("--tol", fit_config.tolerance, "Projected-gradient convergence tolerance");
  fit->add_option("--max-iterations", fit_config.max_iterations, "Iteration cap per start");
  fit->add_option("--hardware-class", hardware_class, "Label recorded in the coefficient file");
  fit->add_option("--placement", policy_text, "whole-set or per-layer");

  auto* advise = app.add_subcommand("advise", "Cache-anchored network-size recommendations");
  std::string shape_text = "rectangle", epoch_table_path, loss_table_path, advise_runs_path;
  int advise_depth = 2;
  double target_loss = 0;
  advise->add_option("--hardware", hardware_path, "Hardware spec file")->required();
  advise->add_option("--coeffs", coeffs_path, "Coefficient file")->required();
  task_flags.attach(advise);
  advise->add_option("--shape", shape_text, "Shape family");
  advise->add_option("--depth", advise_depth, "Layer count including the output layer");
  advise->add_option("--epoch-table", epoch_table_path, "ntp,minimizing_epoch observations");
  advise->add_option("--loss-table", loss_table_path, "run_id,loss table for isoloss queries");
  advise->add_option("--runs", advise_runs_path, "Run table joined with --loss-table");
  advise->add_option("--target-loss", target_loss, "Isoloss target");
  advise->add_option("--format", format_text, "table or json-lines");

  CLI11_PARSE(app, argc, argv);

  try {
    if (worksets->parsed())
      return cmd_worksets(hardware_path, task_flags, arch_flags, policy_text, format_text);
    if (predict->parsed())
      return cmd_predict(hardware_path, coeffs_path, task_flags, arch_flags, counts, policy_text,
                         format_text);
    if (ingest->parsed()) {
      if (!reference_dataset.empty())
        ingest_options.reference_dataset = reference_dataset;
      return cmd_ingest(power_path, jobs_path, datasets_path, idle_path, output_path, ingest_options,
                        format_text);
    }
    if (fit->parsed())
      return cmd_fit(runs_path, hardware_path, coeffs_out, residuals_out, holdout, fit_config,
                     hardware_class, policy_text);
    if (advise->parsed())
      return cmd_advise(hardware_path, coeffs_path, task_flags, shape_text, advise_depth,
                        epoch_table_path, loss_table_path, advise_runs_path, target_loss, format_text);
  } catch (const mlpe::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
