#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

#include "dyged/checkpoint.hpp"
#include "dyged/error.hpp"
#include "dyged/evaluator.hpp"
#include "dyged/gradcheck.hpp"
#include "dyged/graph_io.hpp"
#include "dyged/synthgen.hpp"
#include "dyged/text.hpp"
#include "dyged/trainer.hpp"

namespace fs = std::filesystem;
using namespace dyged;

namespace {

enum Exit : int { kOk = 0, kCheckFailed = 1, kConfig = 2, kIo = 3, kParse = 4, kShape = 5 };

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return kShape;
    case ErrorKind::parse: return kParse;
    case ErrorKind::io: return kIo;
    case ErrorKind::config:
    case ErrorKind::contract:
    case ErrorKind::undefined_metric: return kConfig;
  }
  return kConfig;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("dyged");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%^%l%$: %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("DYGED_LOG")) {
    const std::string level = env;
    if (level == "error") spdlog::set_level(spdlog::level::err);
    else if (level == "info") spdlog::set_level(spdlog::level::info);
    else if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("ignoring DYGED_LOG={} (expected error, info or debug)", level);
  }
}

struct Flags {
  std::string config;
  std::string dataset;
  std::string out;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::string> features;
  std::optional<std::size_t> k;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> jobs;
  std::optional<std::string> corrupt_adjoint;
};

ExperimentConfig load_config(const Flags& f) {
  ExperimentConfig c;
  if (!f.config.empty()) c = parse_experiment_config(text::parse_key_values(text::read_file(f.config), f.config));
  if (f.seed) c.train.seed = *f.seed;
  if (f.variant) c.train.variant = parse_variant(*f.variant);
  if (f.features) c.train.feature_mode = parse_feature_mode(*f.features);
  if (f.k) c.train.k = *f.k;
  if (f.epochs) c.train.epochs = *f.epochs;
  if (f.jobs) c.jobs = *f.jobs;
  if (!f.dataset.empty()) c.dataset = f.dataset;
  c.train.validate();
  return c;
}

void require(const std::string& value, const char* flag, const char* verb) {
  if (value.empty()) fail(ErrorKind::config, std::string(verb) + " needs " + flag);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  if (fs::is_directory(dir, ec)) return;
  if (dir.has_parent_path() && !fs::is_directory(dir.parent_path(), ec)) {
    fail(ErrorKind::io, "output parent directory does not exist: " + dir.parent_path().string());
  }
  if (!fs::create_directory(dir, ec) && !fs::is_directory(dir)) {
    fail(ErrorKind::io, "cannot create directory " + dir.string() + ": " + ec.message());
  }
}

Dataset load_dataset(const ExperimentConfig& c) {
  if (c.dataset.empty()) fail(ErrorKind::config, "no dataset given (--dataset or dataset= in the config)");
  DynamicGraph g = io::read_dataset(c.dataset);
  if (g.length() <= c.train.k) {
    fail(ErrorKind::config, "k=" + std::to_string(c.train.k) + " must be at most T-1 (T=" +
                                std::to_string(g.length()) + ")");
  }
  return make_dataset(std::move(g), c.train.feature_mode);
}

std::vector<std::size_t> all_windows(const Dataset& data, std::size_t k) {
  std::vector<std::size_t> ts(data.graph.length() - k);
  std::iota(ts.begin(), ts.end(), k);
  return ts;
}

int cmd_gen(const Flags& f) {
  require(f.config, "--config <spec file>", "gen");
  require(f.out, "--out <dir>", "gen");
  synth::GenSpec spec;
  try {
    auto kv = text::parse_key_values(text::read_file(f.config), f.config);
    if (f.seed) kv.values["seed"] = std::to_string(*f.seed);
    spec = synth::parse_gen_spec(kv);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::parse) fail(ErrorKind::config, e.what());
    throw;
  }
  const auto g = synth::generate(spec);
  ensure_dir(f.out);
  io::write_dataset(g, f.out);
  text::write_file(fs::path(f.out) / "genspec.txt", synth::echo_gen_spec(spec));
  spdlog::info("wrote {} snapshots to {} ({} separability)", g.length(), f.out,
               synth::to_string(synth::expected_separability(spec)));
  return kOk;
}

int cmd_train(const Flags& f) {
  require(f.out, "--out <dir>", "train");
  const auto cfg = load_config(f);
  const auto data = load_dataset(cfg);
  const auto ts = all_windows(data, cfg.train.k);
  const auto result = train(data, ts, cfg.train);

  ensure_dir(f.out);
  const fs::path out(f.out);
  checkpoint::save(result.params, out / "checkpoint.txt");
  std::ostringstream trace;
  trace << "epoch\tloss\n";
  for (std::size_t i = 0; i < result.loss_trace.size(); ++i) {
    trace << i << '\t' << text::format_real(result.loss_trace[i]) << '\n';
  }
  text::write_file(out / "loss_trace.tsv", trace.str());
  text::write_file(out / "config.txt", echo_config(cfg));
  std::cout << "loss " << text::format_real(result.loss_trace.front()) << " -> "
            << text::format_real(result.loss_trace.back()) << '\n';
  return kOk;
}

EvalReport run_eval(const Flags& f, const char* verb) {
  require(f.checkpoint, "--checkpoint <file>", verb);
  const auto params = checkpoint::load(f.checkpoint);
  auto cfg = load_config(f);
  cfg.train.k = params.config.k;
  const auto data = load_dataset(cfg);
  if (data.feature_dim() != params.config.d_in) {
    fail(ErrorKind::dimension, "checkpoint expects d_in=" + std::to_string(params.config.d_in) +
                                   " but the dataset gives d=" + std::to_string(data.feature_dim()) + " (" +
                                   std::string(to_string(cfg.train.feature_mode)) + " features)");
  }
  return evaluate(params, data, all_windows(data, params.config.k));
}

int cmd_eval(const Flags& f) {
  require(f.out, "--out <dir>", "eval");
  const auto report = run_eval(f, "eval");
  ensure_dir(f.out);
  export_report(report, ExportPaths::in_directory(f.out));
  std::cout << "windows " << report.size() << '\n';
  std::cout << "AUC=" << (report.auc ? text::format_real(*report.auc) : std::string("undefined")) << '\n';
  return kOk;
}

int cmd_export(const Flags& f) {
  require(f.out, "--out <dir>", "export");
  const auto report = run_eval(f, "export");
  ensure_dir(f.out);
  const fs::path out(f.out);
  export_report(report, ExportPaths::in_directory(out));
  const auto scaled = minmax_scale(report.scores);
  std::ostringstream os;
  os << "t\tscaled_score\tlabel\n";
  for (std::size_t i = 0; i < report.size(); ++i) {
    os << report.t[i] << '\t' << text::format_real(scaled[i]) << '\t' << report.labels[i] << '\n';
  }
  text::write_file(out / "scaled_scores.tsv", os.str());
  return kOk;
}

int cmd_experiment(const Flags& f) {
  require(f.out, "--out <dir>", "experiment");
  const auto cfg = load_config(f);
  const auto data = load_dataset(cfg);
  const auto result = run_experiment(data, cfg);
  ensure_dir(f.out);
  std::ostringstream os;
  os << "fold\trepetition\tseed\ttest_windows\tauc\n";
  for (const auto& run : result.runs) {
    os << run.fold << '\t' << run.repetition << '\t' << run.seed << '\t' << run.report.size() << '\t'
       << (run.report.auc ? text::format_real(*run.report.auc) : std::string("undefined")) << '\n';
  }
  text::write_file(fs::path(f.out) / "runs.tsv", os.str());
  text::write_file(fs::path(f.out) / "config.txt", echo_config(cfg));
  std::cout << "runs " << result.runs.size() << " with AUC " << result.auc_count << '\n';
  std::cout << "AUC_STDEV=" << text::format_real(result.stdev_auc) << '\n';
  std::cout << "AUC=" << (result.auc_count ? text::format_real(result.mean_auc) : std::string("undefined"))
            << '\n';
  return kOk;
}

gradcheck::Options gradcheck_options(const Flags& f) {
  gradcheck::Options o;
  if (!f.config.empty()) {
    const auto kv = text::parse_key_values(text::read_file(f.config), f.config);
    for (const auto& [key, value] : kv.values) {
      const auto where = kv.where(key);
      auto count = [&] {
        const auto v = text::parse_int(value, where);
        if (v <= 0) fail(ErrorKind::config, where + ": '" + key + "' must be positive");
        return static_cast<std::size_t>(v);
      };
      if (key == "n") o.n = count();
      else if (key == "d") o.d = count();
      else if (key == "hidden") o.hidden = count();
      else if (key == "embed") o.embed = count();
      else if (key == "k") o.k = count();
      else if (key == "windows") o.windows = count();
      else if (key == "seed") o.seed = static_cast<std::uint64_t>(text::parse_int(value, where));
      else if (key == "step") o.step = text::parse_real(value, where);
      else if (key == "tolerance") o.tolerance = text::parse_real(value, where);
      else fail(ErrorKind::config, where + ": unknown gradcheck key '" + key + "'");
    }
  }
  if (f.seed) o.seed = *f.seed;
  if (f.k) o.k = *f.k;
  if (f.variant) o.variants = {parse_variant(*f.variant)};
  if (f.corrupt_adjoint) {
    if (*f.corrupt_adjoint != "tanh") fail(ErrorKind::config, "--corrupt-adjoint supports only 'tanh'");
    o.corrupt = ad::Op::tanh;
  }
  return o;
}

int cmd_gradcheck(const Flags& f) {
  const auto checks = gradcheck::check_model(gradcheck_options(f));
  bool ok = true;
  for (const auto& c : checks) {
    std::cout << (c.passed ? "ok  " : "FAIL") << ' ' << to_string(c.variant) << ' ' << c.tensor << ' '
              << text::format_real(c.max_rel_error) << '\n';
    ok = ok && c.passed;
  }
  std::cout << (ok ? "gradcheck passed" : "gradcheck FAILED") << " (" << checks.size() << " tensors)\n";
  return ok ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"dyged: event detection on dynamic graphs"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", f.config, "key=value config file");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--seed", f.seed, "seed override");
  };
  auto add_data = [&](CLI::App* cmd) {
    cmd->add_option("--dataset", f.dataset, "dataset directory");
    cmd->add_option("--features", f.features, "static | dynamic | both");
  };
  auto add_training = [&](CLI::App* cmd) {
    cmd->add_option("--variant", f.variant, "full | CT | NL | NA | mean | max");
    cmd->add_option("--k", f.k, "window order");
    cmd->add_option("--epochs", f.epochs, "training epochs");
    cmd->add_option("--jobs", f.jobs, "parallel folds");
  };

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset from a spec file");
  add_common(gen);

  auto* train_cmd = app.add_subcommand("train", "train on every window of a dataset");
  add_common(train_cmd);
  add_data(train_cmd);
  add_training(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "score a dataset with a checkpoint and print the AUC");
  auto* export_cmd = app.add_subcommand("export", "write scores, attention and embeddings for plotting");
  for (auto* cmd : {eval_cmd, export_cmd}) {
    add_common(cmd);
    add_data(cmd);
    cmd->add_option("--checkpoint", f.checkpoint, "checkpoint written by train");
  }

  auto* experiment = app.add_subcommand("experiment", "nested time-series cross-validation");
  add_common(experiment);
  add_data(experiment);
  add_training(experiment);

  auto* grad = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  add_common(grad);
  grad->add_option("--variant", f.variant, "check a single variant");
  grad->add_option("--k", f.k, "window order");
  grad->add_option("--corrupt-adjoint", f.corrupt_adjoint)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) return cmd_gen(f);
    if (*train_cmd) return cmd_train(f);
    if (*eval_cmd) return cmd_eval(f);
    if (*export_cmd) return cmd_export(f);
    if (*experiment) return cmd_experiment(f);
    if (*grad) return cmd_gradcheck(f);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kConfig;
  }
  return kConfig;
}
