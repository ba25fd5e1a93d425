#include "CLI11.hpp"
#include "twinforge/harness.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

// 2 = the caller's config is wrong; 1 = the run itself failed.
int exit_code_for(const twinforge::Error& err) {
  using twinforge::ErrorCode;
  switch (err.code()) {
    case ErrorCode::config_error:
    case ErrorCode::unknown_key:
    case ErrorCode::type_mismatch:
    case ErrorCode::missing_required:
      return 2;
    default:
      return 1;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw twinforge::Error(twinforge::ErrorCode::io_error, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int cmd_run(const std::string& config_path, const std::string& output_dir,
            const std::string& seeds, const std::vector<std::string>& overrides) {
  std::string text = read_file(config_path);
  if (!text.empty() && text.back() != '\n') text += '\n';
  // Later lines win, so flag overrides are just appended key=value lines.
  if (!output_dir.empty()) text += "output_dir=" + output_dir + '\n';
  if (!seeds.empty()) text += "seeds=" + seeds + '\n';
  for (const std::string& kv : overrides) text += kv + '\n';

  const twinforge::ExperimentConfig cfg = twinforge::parse_config(text);
  const twinforge::MetricsTable table = twinforge::run_experiment(cfg);
  std::cout << "wrote " << table.per_seed.size() << " seed run(s) to " << cfg.output_dir << " ("
            << table.completed_seeds << " completed)\n";
  for (const twinforge::SeedSeries& s : table.per_seed) {
    if (s.aborted) std::cout << "seed " << s.seed << " aborted: " << s.error << '\n';
  }
  return table.completed_seeds == table.per_seed.size() ? 0 : 1;
}

int cmd_compare(const std::string& criterion_arg, const std::vector<std::string>& files) {
  twinforge::CompareCriterion criterion = twinforge::CompareCriterion::auc;
  double fraction = 0.95;
  constexpr std::string_view etf = "episodes_to_fraction";
  if (criterion_arg == "auc") {
    criterion = twinforge::CompareCriterion::auc;
  } else if (criterion_arg == etf) {
    criterion = twinforge::CompareCriterion::episodes_to_fraction;
  } else if (criterion_arg.starts_with(std::string(etf) + ":")) {
    criterion = twinforge::CompareCriterion::episodes_to_fraction;
    const std::string frac = criterion_arg.substr(etf.size() + 1);
    try {
      std::size_t used = 0;
      fraction = std::stod(frac, &used);
      if (used != frac.size()) throw std::invalid_argument(frac);
    } catch (const std::exception&) {
      throw twinforge::Error(twinforge::ErrorCode::config_error,
                             "bad fraction '" + frac + "' in criterion");
    }
  } else {
    throw twinforge::Error(twinforge::ErrorCode::config_error,
                           "criterion must be auc or episodes_to_fraction[:f]");
  }
  std::vector<twinforge::NamedCurve> curves;
  curves.reserve(files.size());
  for (const std::string& f : files) curves.push_back(twinforge::read_curve_csv(f));
  std::cout << twinforge::compare_curves(curves, criterion, fraction).text();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"digital-twin reinforcement-learning experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  std::string seeds;
  std::vector<std::string> overrides;
  CLI::App* run = app.add_subcommand("run", "train per a config file and write CSV metrics");
  run->add_option("config", config_path, "key=value config file")->required();
  run->add_option("--output-dir", output_dir, "overrides the config's output_dir");
  run->add_option("--seeds", seeds, "comma-separated seed list, overrides the config");
  run->add_option("--override", overrides, "extra key=value line, appended after the file");
  run->footer(twinforge::config_key_help());

  std::string criterion;
  std::vector<std::string> files;
  CLI::App* cmp = app.add_subcommand("compare", "rank learning-curve CSVs");
  cmp->add_option("criterion", criterion, "auc | episodes_to_fraction[:fraction]")->required();
  cmp->add_option("csv", files, "summary.csv or metrics_seed<SEED>.csv files")
      ->required()
      ->expected(-1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, output_dir, seeds, overrides);
    if (cmp->parsed()) return cmd_compare(criterion, files);
  } catch (const twinforge::Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_code_for(err);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
