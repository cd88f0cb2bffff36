#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "mlpenergy/arch.hpp"
#include "mlpenergy/coefficients.hpp"
#include "mlpenergy/energy_model.hpp"
#include "mlpenergy/hardware.hpp"
#include "mlpenergy/ingest.hpp"
#include "mlpenergy/worksets.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run_cli(const std::string& args, const std::string& stderr_sink = "/dev/null") {
  const std::string command = std::string(MLPENERGY_CLI_PATH) + " " + args + " 2>" + stderr_sink;
  CommandResult result;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buffer[4096];
  std::size_t n = 0;
  while ((n = fread(buffer, 1, sizeof(buffer), pipe)) > 0)
    result.output.append(buffer, n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

const fs::path& fixture_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "mlpenergy_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string data_path(const std::string& relative) {
  return std::string(MLPENERGY_DATA_DIR) + "/" + relative;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << content;
}

// Golden ingest fixture: ten clean runs, one sigma outlier, one over the hard
// runtime cutoff, one with a zero-watt reading, one with no power data.
void write_ingest_fixture() {
  std::ostringstream power;
  power << "node_id,timestamp_s,watts\n";
  for (int i = 0; i <= 2000; ++i)
    power << "nodeA," << i * 60 << ",250\n";
  for (int i = 0; i <= 100; ++i)
    power << "nodeZ," << i * 60 << "," << (i == 30 ? 0 : 250) << "\n";
  write_file(fixture_dir() / "power.csv", power.str());

  std::ostringstream jobs;
  jobs << "run_id,node_id,node_type,start_s,end_s,dataset,shape,depth,ntp,hardware_class,"
          "epochs,train_batches,test_batches\n";
  const auto row = [&](const std::string& id, const std::string& node, double start, double end) {
    jobs << id << ',' << node << ",cpu1," << start << ',' << end
         << ",wine,rectangle,3,1024,cpu,10,20,4\n";
  };
  // clean runs, runtimes 900..1200 s
  for (int i = 0; i < 10; ++i)
    row("clean" + std::to_string(i), "nodeA", 1000 + 3000.0 * i, 1000 + 3000.0 * i + 900 + 30.0 * i);
  row("outlier_sigma", "nodeA", 40000, 100000);       // 60000 s, ~20 sigma out in log space
  row("outlier_long", "nodeA", 20000, 100000);        // 80000 s > 75000 s cutoff
  row("zero_watt", "nodeZ", 1500, 2100);              // spans the 0 W reading at t=1800
  row("no_power", "ghost", 1000, 2000);               // node without samples
  write_file(fixture_dir() / "jobs.csv", jobs.str());

  write_file(fixture_dir() / "datasets.csv",
             "dataset,n_features,n_outputs,n_train,n_test,batch_size,dtype_bytes\n"
             "wine,11,1,4898,1000,256,4\n");
}

} // namespace

TEST_CASE("worksets reproduces the tiny hand-computed example") {
  const auto result = run_cli("worksets --hardware " + data_path("hardware/cpu1.json") +
                              " --widths 3,3,1 --input-width 4 --features 4 --outputs 1"
                              " --train 10 --test 5 --batch 2 --dtype-bytes 4");
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("forward,124,L1") != std::string::npos);
  CHECK(result.output.find("backward,304,L1") != std::string::npos);
  CHECK(result.output.find("dataset,300,L1") != std::string::npos);
  CHECK(result.output.find("inter_layer_max,56,L1") != std::string::npos);
  CHECK(result.output.find("ordering") != std::string::npos);
}

TEST_CASE("a two-megaparameter net lands its parameter block in gpu RAM") {
  const auto result = run_cli("worksets --hardware " + data_path("hardware/gpu1.json") +
                              " --shape rectangle --depth 2 --ntp 2097152 --features 16"
                              " --outputs 1 --train 50000 --test 10000 --batch 256");
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("forward,8388580,RAM") != std::string::npos);
}

TEST_CASE("missing input files exit 2 with no partial output") {
  const auto result = run_cli("worksets --hardware /no/such/file.json --ntp 1024");
  CHECK(result.exit_code == 2);
  CHECK(result.output.empty());
}

TEST_CASE("level-label mismatch between coefficients and hardware exits 3") {
  const auto result = run_cli("predict --hardware " + data_path("hardware/cpu1.json") +
                              " --coeffs " + data_path("coefficients/gpu.json") +
                              " --ntp 1024 --features 16 --epochs 1");
  CHECK(result.exit_code == 3);
}

TEST_CASE("predict with zero epochs prints the run overhead") {
  const auto result = run_cli("predict --hardware " + data_path("hardware/cpu1.json") +
                              " --coeffs " + data_path("coefficients/cpu.json") +
                              " --shape rectangle --depth 3 --ntp 4096 --features 16 --outputs 1"
                              " --train 1000 --test 100 --batch 256 --epochs 0");
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("total_j 10200") == 0);
}

TEST_CASE("predict term breakdown sums to the total") {
  const auto result = run_cli("predict --hardware " + data_path("hardware/gpu1.json") +
                              " --coeffs " + data_path("coefficients/gpu.json") +
                              " --shape rectangle --depth 6 --ntp 1048576 --features 16 --outputs 1"
                              " --train 50000 --test 10000 --batch 256 --epochs 12"
                              " --train-batches 196 --test-batches 40 --format json-lines");
  CHECK(result.exit_code == 0);
  double total = 0, sum = 0;
  std::istringstream lines(result.output);
  std::string line;
  while (std::getline(lines, line)) {
    const auto doc = json::parse(line);
    if (doc.at("record") == "total")
      total = doc.at("energy_j").get<double>();
    else if (doc.at("record") == "term")
      sum += doc.at("energy_j").get<double>();
  }
  CHECK(total > 0);
  CHECK(sum == doctest::Approx(total).epsilon(1e-9));
}

TEST_CASE("identical invocations produce byte-identical output") {
  const std::string args = "predict --hardware " + data_path("hardware/cpu1.json") + " --coeffs " +
                           data_path("coefficients/cpu.json") +
                           " --shape trapezoid --depth 5 --ntp 300000 --features 32 --outputs 4"
                           " --train 100000 --test 5000 --batch 256 --epochs 7 --train-batches 391"
                           " --test-batches 20";
  const auto first = run_cli(args);
  const auto second = run_cli(args);
  CHECK(first.exit_code == 0);
  CHECK(first.output == second.output);
  CHECK(!first.output.empty());
}

TEST_CASE("ingest golden fixture reports one drop per filter") {
  write_ingest_fixture();
  const auto runs_file = (fixture_dir() / "runs.csv").string();
  const auto result = run_cli("ingest --power " + (fixture_dir() / "power.csv").string() +
                              " --jobs " + (fixture_dir() / "jobs.csv").string() +
                              " --datasets " + (fixture_dir() / "datasets.csv").string() +
                              " --reference-node-type cpu1 --idle-table " + data_path("idle_power.csv") +
                              " --output " + runs_file);
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("missing_data,1") != std::string::npos);
  CHECK(result.output.find("zero_watts,1") != std::string::npos);
  CHECK(result.output.find("long_runtime,1") != std::string::npos);
  CHECK(result.output.find("sigma_outlier,1") != std::string::npos);
  CHECK(result.output.find("retained,10") != std::string::npos);

  // constant 250 W: every retained run's raw energy is 250 * runtime
  std::ifstream in(runs_file);
  const auto runs = mlpe::read_run_table(in, runs_file);
  REQUIRE(runs.size() == 10);
  for (const auto& run : runs) {
    CHECK(run.raw_energy_j == doctest::Approx(250 * run.runtime_s).epsilon(1e-9));
    // cpu1 against the cpu1 reference: standardization is a no-op
    CHECK(*run.standardized_energy_j == doctest::Approx(run.raw_energy_j).epsilon(1e-9));
  }
}

TEST_CASE("ingest of an empty jobs file yields an empty table and zero counts") {
  write_file(fixture_dir() / "empty_jobs.csv",
             "run_id,node_id,node_type,start_s,end_s,dataset,shape,depth,ntp,hardware_class,"
             "epochs,train_batches,test_batches\n");
  write_file(fixture_dir() / "tiny_power.csv", "node_id,timestamp_s,watts\nn,0,100\n");
  const auto result = run_cli("ingest --power " + (fixture_dir() / "tiny_power.csv").string() +
                              " --jobs " + (fixture_dir() / "empty_jobs.csv").string() +
                              " --reference-node-type cpu1 --idle-table " + data_path("idle_power.csv") +
                              " --output " + (fixture_dir() / "empty_runs.csv").string());
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("input,0") != std::string::npos);
  CHECK(result.output.find("retained,0") != std::string::npos);
  std::ifstream in(fixture_dir() / "empty_runs.csv");
  std::string header, extra;
  CHECK(std::getline(in, header));
  CHECK(!std::getline(in, extra));
}

TEST_CASE("malformed rows exit 2 with the line number") {
  write_file(fixture_dir() / "bad_power.csv", "node_id,timestamp_s,watts\nn,12,oops\n");
  write_file(fixture_dir() / "any_jobs.csv",
             "run_id,node_id,node_type,start_s,end_s,dataset,shape,depth,ntp,hardware_class,"
             "epochs,train_batches,test_batches\n");
  const auto stderr_file = (fixture_dir() / "stderr.txt").string();
  const auto result = run_cli("ingest --power " + (fixture_dir() / "bad_power.csv").string() +
                                  " --jobs " + (fixture_dir() / "any_jobs.csv").string() +
                                  " --reference-node-type cpu1",
                              stderr_file);
  CHECK(result.exit_code == 2);
  std::ifstream err(stderr_file);
  std::stringstream buffer;
  buffer << err.rdbuf();
  CHECK(buffer.str().find("bad_power.csv:2") != std::string::npos);
}

namespace {

// Synthetic run table the way the fit subcommand will rebuild it: solve the
// architecture from (shape, depth, ntp), then price it with the bundled
// coefficients.
void write_synthetic_run_table(const fs::path& path, int count, std::uint64_t seed) {
  using namespace mlpe;
  const auto hw = HardwareSpec::builtin_cpu1();
  const auto coeffs = EnergyCoefficients::builtin_cpu();
  std::mt19937_64 rng(seed);
  std::vector<MeasuredRun> runs;
  for (int i = 0; i < count; ++i) {
    TaskSpec task;
    task.n_features = 2 + static_cast<std::int64_t>(rng() % 40);
    task.n_outputs = 1 + static_cast<std::int64_t>(rng() % 4);
    task.n_train = 1000 + static_cast<std::int64_t>(rng() % 3000000);
    task.n_test = task.n_train / 5;
    task.batch_size = 256;

    const char* shapes[] = {"rectangle", "trapezoid", "exponential", "wide_first_4x"};
    const std::string shape = shapes[rng() % 4];
    const int depth = 2 + static_cast<int>(rng() % 10);
    const auto exponent = 5 + rng() % 18;
    const auto target = std::uint64_t{1} << exponent;

    NetworkArchitecture arch;
    try {
      arch = solve_widths(ShapeFamily::parse(shape), depth, target, task);
    } catch (const error&) {
      --i;
      continue;
    }
    const auto ntp = count_parameters(arch);
    arch = solve_widths(ShapeFamily::parse(shape), depth, ntp, task);

    const auto ws = compute_working_sets(arch, task);
    const auto placement = place_working_sets(ws, hw);
    const auto ops = count_ops(arch, task);
    RunCounts counts;
    counts.epochs = 1 + static_cast<std::int64_t>(rng() % 50);
    counts.train_batches = (task.n_train + task.batch_size - 1) / task.batch_size;
    counts.test_batches = (task.n_test + task.batch_size - 1) / task.batch_size;
    const double energy = total_energy(counts, ws, placement, ops, arch.depth(), coeffs);

    MeasuredRun run;
    run.run_id = "syn" + std::to_string(i);
    run.node_type = "cpu1";
    run.meta = {"synthetic", shape, depth, ntp, "cpu", counts.epochs, counts.train_batches,
                counts.test_batches};
    run.dims = DatasetDims{task.n_features, task.n_outputs, task.n_train, task.n_test,
                           task.batch_size, task.dtype_bytes};
    run.runtime_s = 1000;
    run.raw_energy_j = energy;
    run.standardized_energy_j = energy;
    runs.push_back(std::move(run));
  }
  std::ofstream out(path);
  write_run_table(out, runs);
}

} // namespace

TEST_CASE("fit recovers the bundled coefficients from a synthetic run table") {
  const auto runs_file = fixture_dir() / "synthetic_runs.csv";
  write_synthetic_run_table(runs_file, 500, 2024);
  const auto coeffs_file = (fixture_dir() / "fitted.json").string();
  const auto residuals_file = (fixture_dir() / "residuals.csv").string();
  const auto result = run_cli("fit --runs " + runs_file.string() + " --hardware " +
                              data_path("hardware/cpu1.json") + " --coeffs-out " + coeffs_file +
                              " --residuals-out " + residuals_file + " --holdout 0.2");
  CHECK(result.exit_code == 0);

  const auto fitted = mlpe::EnergyCoefficients::load(coeffs_file);
  const auto truth = mlpe::EnergyCoefficients::builtin_cpu();
  CHECK(fitted.run_overhead_j == doctest::Approx(truth.run_overhead_j).epsilon(1e-3));
  CHECK(fitted.pass_overhead_j == doctest::Approx(truth.pass_overhead_j).epsilon(1e-3));
  CHECK(fitted.flop_j == doctest::Approx(truth.flop_j).epsilon(1e-3));
  for (std::size_t i = 1; i < truth.levels.size(); ++i) {
    CHECK(fitted.levels[i].access_j == doctest::Approx(truth.levels[i].access_j).epsilon(1e-3));
    CHECK(fitted.levels[i].byte_j == doctest::Approx(truth.levels[i].byte_j).epsilon(1e-3));
  }

  // noise-free table: the holdout split fits as well as the training split
  std::istringstream lines(result.output);
  std::string line;
  double train_error = -1, holdout_error = -1;
  while (std::getline(lines, line)) {
    std::istringstream fields(line);
    std::string key;
    double value;
    if ((fields >> key >> value)) {
      if (key == "mean_abs_rel_error")
        train_error = value;
      if (key == "holdout_mean_abs_rel_error")
        holdout_error = value;
    }
  }
  CHECK(train_error >= 0);
  CHECK(train_error < 1e-6);
  CHECK(holdout_error >= 0);
  CHECK(holdout_error < 1e-6);

  // the residual table covers both splits with unit ratios
  std::ifstream residuals(residuals_file);
  std::string header;
  std::getline(residuals, header);
  CHECK(header == "run_id,split,measured_j,predicted_j,ratio");
  int rows = 0, holdouts = 0;
  while (std::getline(residuals, line)) {
    ++rows;
    if (line.find(",holdout,") != std::string::npos)
      ++holdouts;
  }
  CHECK(rows == 500);
  CHECK(holdouts == 100);

  // the emitted coefficient file parses back (round-trip through its parser)
  std::ifstream emitted(coeffs_file);
  std::stringstream text;
  text << emitted.rdbuf();
  CHECK(mlpe::EnergyCoefficients::from_json(text.str(), coeffs_file).to_json() == text.str());
}

TEST_CASE("fit rejects non-positive measured energy naming the run") {
  const auto runs_file = fixture_dir() / "bad_energy_runs.csv";
  write_synthetic_run_table(runs_file, 3, 7);
  // corrupt the second run's energies
  std::ifstream in(runs_file);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const auto pos = content.find("syn1,");
  REQUIRE(pos != std::string::npos);
  const auto line_end = content.find('\n', pos);
  auto line = content.substr(pos, line_end - pos);
  // rewrite the standardized-energy field (second to last, before flags)
  const auto last_comma = line.rfind(',');
  const auto second_last = line.rfind(',', last_comma - 1);
  line = line.substr(0, second_last + 1) + "-4" + line.substr(last_comma);
  content = content.substr(0, pos) + line + content.substr(line_end);
  std::ofstream out(runs_file);
  out << content;
  out.close();

  const auto stderr_file = (fixture_dir() / "fit_err.txt").string();
  const auto result = run_cli("fit --runs " + runs_file.string() + " --hardware " +
                                  data_path("hardware/cpu1.json"),
                              stderr_file);
  CHECK(result.exit_code == 4);
  std::ifstream err(stderr_file);
  std::stringstream buffer;
  buffer << err.rdbuf();
  CHECK(buffer.str().find("syn1") != std::string::npos);
}

TEST_CASE("advise surfaces the L2 band on the bundled gpu spec") {
  const auto result = run_cli("advise --hardware " + data_path("hardware/gpu1.json") + " --coeffs " +
                              data_path("coefficients/gpu.json") +
                              " --shape rectangle --depth 4 --features 16 --outputs 1"
                              " --train 50000 --test 10000 --batch 256 --format json-lines");
  CHECK(result.exit_code == 0);
  bool found = false;
  std::istringstream lines(result.output);
  std::string line;
  while (std::getline(lines, line)) {
    const auto doc = json::parse(line);
    if (doc.at("record") == "recommendation" && doc.at("anchor") == "forward" &&
        doc.at("level") == "L2") {
      found = true;
      CHECK(doc.at("ntp").get<std::uint64_t>() >= 1572864);
      CHECK(doc.at("ntp").get<std::uint64_t>() <= 3145728);
    }
  }
  CHECK(found);
}

TEST_CASE("advise reports an empty recommendation list as success") {
  // a hierarchy whose only bounded level is far too small for any candidate
  write_file(fixture_dir() / "tiny_hw.json", R"({
  "name": "tiny",
  "n_units": 1,
  "idle_power_w": 10.0,
  "levels": [
    {"label": "L1", "capacity_bytes": 8, "scope": "per-unit"},
    {"label": "RAM", "capacity_bytes": 0, "scope": "shared", "shared_by": 1}
  ]
})");
  write_file(fixture_dir() / "tiny_coeffs.json", R"({
  "hardware_class": "tiny",
  "run_overhead_j": 0.0,
  "pass_overhead_j": 1.0,
  "flop_j": 0.0,
  "layer_j": 0.0,
  "levels": [
    {"label": "L1", "access_j": 1.0, "per_mib_j": 0.0},
    {"label": "RAM", "access_j": 2.0, "per_mib_j": 1.0}
  ]
})");
  const auto result = run_cli("advise --hardware " + (fixture_dir() / "tiny_hw.json").string() +
                              " --coeffs " + (fixture_dir() / "tiny_coeffs.json").string() +
                              " --shape rectangle --depth 2 --features 4 --outputs 1"
                              " --train 1000 --batch 32");
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("no candidate") != std::string::npos);
}

TEST_CASE("advise isoloss interpolation through the run table join") {
  // two measurements of the same 1024-parameter network at different losses
  write_file(fixture_dir() / "iso_runs.csv",
             "run_id,node_type,hardware_class,dataset,shape,depth,ntp,epochs,train_batches,"
             "test_batches,n_features,n_outputs,n_train,n_test,batch_size,dtype_bytes,"
             "runtime_s,raw_energy_j,standardized_energy_j,flags\n"
             "a,cpu1,cpu,wine,rectangle,3,1024,10,20,4,11,1,4898,1000,256,4,100,100,100,\n"
             "b,cpu1,cpu,wine,rectangle,3,1024,100,20,4,11,1,4898,1000,256,4,1000,1000,1000,\n");
  write_file(fixture_dir() / "losses.csv", "run_id,loss\na,0.4\nb,0.1\n");
  const auto result = run_cli("advise --hardware " + data_path("hardware/cpu1.json") + " --coeffs " +
                              data_path("coefficients/cpu.json") +
                              " --shape rectangle --depth 3 --features 11 --outputs 1"
                              " --train 4898 --test 1000 --batch 256 --runs " +
                              (fixture_dir() / "iso_runs.csv").string() + " --loss-table " +
                              (fixture_dir() / "losses.csv").string() + " --target-loss 0.2");
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("isoloss_ntp,energy_j") != std::string::npos);
  CHECK(result.output.find("1024,316.227766") != std::string::npos);
}
