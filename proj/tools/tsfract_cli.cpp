// tsfract command line: synthesize datasets, run fluctuation analysis, train
// and evaluate the gated classifier, or run the whole pipeline end to end.
//
// Every artifact embeds the effective configuration that influences results.
// Execution details (file paths, thread count) are deliberately excluded so
// reruns and different OpenMP widths produce byte-identical files.

#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsfract/errors.hpp"
#include "tsfract/hgnn.hpp"
#include "tsfract/ingest.hpp"
#include "tsfract/metrics.hpp"
#include "tsfract/mfdfa.hpp"
#include "tsfract/rng.hpp"
#include "tsfract/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace tsfract;

namespace {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::vector<HaERecord> load_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<HaERecord> records = parse_records(in);
  if (records.empty()) throw InvalidInput("no records in '" + path.string() + "'");
  std::set<std::string> seen;
  for (const HaERecord& rec : records)
    if (!seen.insert(rec.id).second)
      throw SchemaError("duplicate record id '" + rec.id + "' in '" +
                        path.string() + "'");
  return records;
}

// ---------------------------------------------------------------------------
// aspects

enum class Aspect { Severity, Possibility, Risk };

Aspect parse_aspect(const std::string& name) {
  if (name == "severity") return Aspect::Severity;
  if (name == "possibility") return Aspect::Possibility;
  if (name == "risk") return Aspect::Risk;
  throw ConfigError("unknown aspect '" + name + "'");
}

const char* aspect_name(Aspect aspect) {
  switch (aspect) {
    case Aspect::Severity: return "severity";
    case Aspect::Possibility: return "possibility";
    case Aspect::Risk: return "risk";
  }
  return "?";
}

int aspect_levels(Aspect aspect) {
  return aspect == Aspect::Risk ? 4 : 5;
}

int label_of(const HaERecord& record, Aspect aspect) {
  switch (aspect) {
    case Aspect::Severity: return record.labels.severity;
    case Aspect::Possibility: return record.labels.possibility;
    case Aspect::Risk: return record.labels.risk;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// analysis configuration flags (resolved per record length)

struct DfaFlags {
  std::string variant = "standard";
  double alpha = 0.4;
  int order = 2;
  double q_min = -5.0;
  double q_max = 5.0;
  double q_step = 0.25;
  std::size_t s_min = 16;
  std::size_t s_max = 0;  // 0 = floor(length / 4)
  int s_count = 16;
};

DfaConfig make_dfa_config(const DfaFlags& flags, std::size_t length) {
  DfaConfig cfg;
  cfg.variant = flags.variant == "hmf" ? DetrendVariant::Hmf
                                       : DetrendVariant::Standard;
  if (flags.variant != "hmf" && flags.variant != "standard")
    throw ConfigError("unknown variant '" + flags.variant + "'");
  cfg.alpha = flags.alpha;
  cfg.order = flags.order;
  if (flags.q_step <= 0.0) throw ConfigError("q-step must be positive");
  const int steps =
      static_cast<int>(std::llround((flags.q_max - flags.q_min) / flags.q_step));
  for (int i = 0; i <= steps; ++i) cfg.q_grid.push_back(flags.q_min + i * flags.q_step);
  const std::size_t s_max = flags.s_max == 0 ? length / 4 : flags.s_max;
  cfg.s_grid = DfaConfig::geometric_s_grid(flags.s_min, s_max, flags.s_count);
  cfg.validate();
  return cfg;
}

json dfa_flags_to_json(const DfaFlags& flags) {
  return json{{"variant", flags.variant}, {"alpha", flags.alpha},
              {"order", flags.order},     {"q_min", flags.q_min},
              {"q_max", flags.q_max},     {"q_step", flags.q_step},
              {"s_min", flags.s_min},     {"s_max", flags.s_max},
              {"s_count", flags.s_count}};
}

DfaFlags dfa_flags_from_json(const json& obj) {
  DfaFlags flags;
  flags.variant = obj.at("variant").get<std::string>();
  flags.alpha = obj.at("alpha").get<double>();
  flags.order = obj.at("order").get<int>();
  flags.q_min = obj.at("q_min").get<double>();
  flags.q_max = obj.at("q_max").get<double>();
  flags.q_step = obj.at("q_step").get<double>();
  flags.s_min = obj.at("s_min").get<std::size_t>();
  flags.s_max = obj.at("s_max").get<std::size_t>();
  flags.s_count = obj.at("s_count").get<int>();
  return flags;
}

ReduceAxis parse_axis(const std::string& axis) {
  if (axis == "tokens") return ReduceAxis::OverTokens;
  if (axis == "dims") return ReduceAxis::OverDims;
  throw ConfigError("unknown reduction axis '" + axis + "'");
}

// Fractal series for every record, records in parallel, slot per record.
struct HfsBatch {
  std::vector<std::optional<FractalSeries>> series;
  std::vector<std::string> errors;  // empty string = success
  std::size_t failures = 0;
  std::size_t clamp_events = 0;  // Hmf unproject-domain clamps, summed
};

HfsBatch compute_hfs_batch(const std::vector<HaERecord>& records,
                           const DfaFlags& flags, ReduceAxis axis) {
  HfsBatch batch;
  batch.series.resize(records.size());
  batch.errors.resize(records.size());
  std::vector<std::size_t> clamps(records.size(), 0);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(records.size()); ++i) {
    try {
      const TimeSeries hts = record_hts(records[i], axis);
      const DfaConfig cfg = make_dfa_config(flags, hts.size());
      HfsResult result = compute_hfs_full(hts, cfg);
      clamps[i] = result.clamp_events;
      batch.series[i] = std::move(result.hfs);
    } catch (const std::exception& e) {
      batch.errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!batch.errors[i].empty()) ++batch.failures;
    batch.clamp_events += clamps[i];
  }
  return batch;
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  std::string kind = "fgn";
  std::size_t n = 1024;
  double hurst = 0.5;
  int levels = 10;
  double p = 0.3;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  int severity = 1;
  int possibility = 1;
  int risk = 1;
};

GeneratorSpec make_generator(const SynthOptions& opt) {
  GeneratorSpec spec;
  if (opt.kind == "white") {
    spec.kind = GeneratorSpec::Kind::WhiteNoise;
    spec.length = opt.n;
  } else if (opt.kind == "fgn") {
    spec.kind = GeneratorSpec::Kind::Fgn;
    spec.length = opt.n;
    spec.hurst = opt.hurst;
  } else if (opt.kind == "cascade") {
    spec.kind = GeneratorSpec::Kind::BinomialCascade;
    spec.levels = opt.levels;
    spec.p = opt.p;
  } else {
    throw ConfigError("unknown generator kind '" + opt.kind + "'");
  }
  spec.validate();
  return spec;
}

json synth_config_json(const SynthOptions& opt) {
  return json{{"command", "synth"},
              {"kind", opt.kind},
              {"n", opt.n},
              {"hurst", opt.hurst},
              {"levels", opt.levels},
              {"p", opt.p},
              {"count", opt.count},
              {"seed", opt.seed},
              {"severity", opt.severity},
              {"possibility", opt.possibility},
              {"risk", opt.risk}};
}

int run_synth(const SynthOptions& opt, const fs::path& out_path) {
  const GeneratorSpec spec = make_generator(opt);
  Labels labels{opt.severity, opt.possibility, opt.risk};
  labels.validate();

  std::vector<HaERecord> records;
  for (std::size_t i = 0; i < opt.count; ++i) {
    HaERecord rec;
    char id[48];
    // the seed keeps ids unique when several synth outputs are concatenated
    std::snprintf(id, sizeof(id), "%s-s%llu-%05zu", opt.kind.c_str(),
                  static_cast<unsigned long long>(opt.seed), i);
    rec.id = id;
    rec.labels = labels;
    rec.hts = generate(spec, derive_seed(opt.seed, i));
    records.push_back(std::move(rec));
  }

  std::ofstream out = open_output(out_path);
  write_records(out, records);

  json meta;
  meta["format"] = "tsfract-dataset-meta";
  meta["version"] = 1;
  meta["config"] = synth_config_json(opt);
  meta["records"] = records.size();
  std::ofstream meta_out = open_output(out_path.string() + ".meta.json");
  meta_out << meta.dump(2) << '\n';

  std::cout << "wrote " << records.size() << " records (seed " << opt.seed
            << ") to " << out_path.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// analyze

int run_analyze(const fs::path& input, const fs::path& out_path,
                const DfaFlags& flags, const std::string& axis_name) {
  const std::vector<HaERecord> records = load_records(input);
  const ReduceAxis axis = parse_axis(axis_name);
  const HfsBatch batch = compute_hfs_batch(records, flags, axis);

  json config{{"command", "analyze"},
              {"axis", axis_name},
              {"dfa", dfa_flags_to_json(flags)}};

  std::ofstream out = open_output(out_path);
  out << "# config " << config.dump() << "\n";
  out << "id,q,h,r2\n";
  double h2_sum = 0.0;
  std::size_t h2_count = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!batch.errors[i].empty()) {
      out << "# error id=" << records[i].id << " what=" << batch.errors[i] << "\n";
      continue;
    }
    const FractalSeries& hfs = *batch.series[i];
    for (std::size_t qi = 0; qi < hfs.q_grid.size(); ++qi) {
      out << records[i].id << ',' << format_g17(hfs.q_grid[qi]) << ','
          << format_g17(hfs.h[qi]) << ',' << format_g17(hfs.fit_r2[qi]) << "\n";
      if (std::abs(hfs.q_grid[qi] - 2.0) < 1e-12) {
        h2_sum += hfs.h[qi];
        ++h2_count;
      }
    }
  }
  const std::size_t ok = records.size() - batch.failures;
  out << "# summary";
  if (h2_count > 0) out << " mean_h2=" << format_g17(h2_sum / h2_count);
  out << " records=" << ok << " failed=" << batch.failures;
  if (flags.variant == "hmf") out << " clamp_events=" << batch.clamp_events;
  out << "\n";

  if (h2_count > 0)
    std::cout << "mean H(2) = " << format_g17(h2_sum / h2_count) << " over " << ok
              << " records";
  else
    std::cout << ok << " records analyzed";
  if (batch.failures > 0) {
    std::cout << " (" << batch.failures << " failed)";
    for (std::size_t i = 0; i < records.size(); ++i)
      if (!batch.errors[i].empty())
        std::cerr << "error: record " << records[i].id << ": " << batch.errors[i]
                  << "\n";
  }
  std::cout << "\n";
  return batch.failures == records.size() ? 1 : 0;
}

// ---------------------------------------------------------------------------
// train / eval

struct TrainOptions {
  Aspect aspect = Aspect::Severity;
  std::string axis = "tokens";
  int num_classes = 0;  // 0 = the aspect's level count
  int fusion_dim = 64;
  int kernel_size = 3;
  double lr = 1e-5;
  int epochs = 50;
  int batch = 128;
  std::uint64_t seed = 0;
  int repeat = 1;
  DfaFlags dfa;
};

json train_config_json(const TrainOptions& opt, int resolved_classes) {
  return json{{"command", "train"},
              {"aspect", aspect_name(opt.aspect)},
              {"axis", opt.axis},
              {"seed", opt.seed},
              {"repeat", opt.repeat},
              {"hgnn",
               {{"fusion_dim", opt.fusion_dim},
                {"kernel_size", opt.kernel_size},
                {"num_classes", resolved_classes}}},
              {"schedule",
               {{"lr", opt.lr}, {"epochs", opt.epochs}, {"batch", opt.batch}}},
              {"dfa", dfa_flags_to_json(opt.dfa)}};
}

std::vector<Sample> collect_samples(const std::vector<std::string>& ids,
                                    const std::vector<HaERecord>& records,
                                    const HfsBatch& batch, Aspect aspect) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < records.size(); ++i) index.emplace(records[i].id, i);
  std::vector<Sample> samples;
  samples.reserve(ids.size());
  for (const std::string& id : ids) {
    const std::size_t i = index.at(id);
    Sample s;
    const std::vector<double>& h = batch.series[i]->h;
    s.features = Eigen::Map<const Eigen::VectorXd>(
        h.data(), static_cast<Eigen::Index>(h.size()));
    s.label = label_of(records[i], aspect) - 1;
    samples.push_back(std::move(s));
  }
  return samples;
}

void write_history_csv(const fs::path& path, const json& config,
                       const TrainHistory& history) {
  std::ofstream out = open_output(path);
  out << "# config " << config.dump() << "\n";
  out << "epoch,train_loss,val_macro_f1\n";
  for (std::size_t e = 0; e < history.train_loss.size(); ++e)
    out << (e + 1) << ',' << format_g17(history.train_loss[e]) << ','
        << format_g17(history.val_macro_f1[e]) << "\n";
}

void write_report_files(const fs::path& out_dir, const json& config,
                        const std::vector<std::pair<std::string, EvalReport>>& splits,
                        Aspect aspect) {
  json report_json;
  report_json["format"] = "tsfract-report";
  report_json["version"] = 1;
  report_json["config"] = config;
  for (const auto& [split, report] : splits)
    report_json["splits"][split] = json::parse(report_to_json(report));
  std::ofstream jout = open_output(out_dir / "report.json");
  jout << report_json.dump(2) << '\n';

  std::ofstream cout_file = open_output(out_dir / "report.csv");
  cout_file << "# config " << config.dump() << "\n";
  cout_file << "model,aspect,split,P,R,F1\n";
  for (const auto& [split, report] : splits)
    cout_file << report_csv_row("hgnn", aspect_name(aspect), split, report);
}

void print_report(const std::string& split, const EvalReport& report) {
  std::printf("%s: macro P=%.4f R=%.4f F1=%.4f accuracy=%.4f\n", split.c_str(),
              report.macro_precision, report.macro_recall, report.macro_f1,
              report.accuracy);
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const ClassMetrics& m = report.per_class[c];
    std::printf("  level %zu: P=%.4f%s R=%.4f%s F1=%.4f\n", c + 1, m.precision,
                m.precision_defined ? "" : "*", m.recall,
                m.recall_defined ? "" : "*", m.f1);
  }
}

int run_train(const std::vector<HaERecord>& records, const TrainOptions& opt,
              const fs::path& out_dir) {
  const int num_classes =
      opt.num_classes > 0 ? opt.num_classes : aspect_levels(opt.aspect);
  const json config = train_config_json(opt, num_classes);

  const HfsBatch batch = compute_hfs_batch(records, opt.dfa, parse_axis(opt.axis));
  if (batch.failures > 0) {
    for (std::size_t i = 0; i < records.size(); ++i)
      if (!batch.errors[i].empty())
        std::cerr << "error: record " << records[i].id << ": " << batch.errors[i]
                  << "\n";
    throw InvalidInput("fluctuation analysis failed for " +
                       std::to_string(batch.failures) + " record(s)");
  }

  const SplitAssignment split = split_dataset(records, opt.seed);
  const std::vector<Sample> train_set =
      collect_samples(split.train, records, batch, opt.aspect);
  const std::vector<Sample> test_set =
      collect_samples(split.test, records, batch, opt.aspect);
  const std::vector<Sample> val_set =
      collect_samples(split.validation, records, batch, opt.aspect);

  HgnnConfig net;
  net.fusion_dim = opt.fusion_dim;
  net.kernel_size = opt.kernel_size;
  net.num_classes = num_classes;

  TrainSchedule schedule;
  schedule.lr = opt.lr;
  schedule.epochs = opt.epochs;
  schedule.batch = opt.batch;

  std::vector<EvalReport> test_reports, val_reports;
  std::optional<TrainResult> first_run;
  for (int rep = 0; rep < opt.repeat; ++rep) {
    net.seed = opt.repeat == 1 ? opt.seed : derive_seed(opt.seed, 7000 + rep);
    TrainResult result = train(train_set, val_set, net, schedule);
    test_reports.push_back(macro_report(hgnn_confusion(test_set, result.params, net)));
    val_reports.push_back(macro_report(hgnn_confusion(val_set, result.params, net)));
    if (rep == 0) first_run = std::move(result);
  }
  const EvalReport test_report = average_reports(test_reports);
  const EvalReport val_report = average_reports(val_reports);

  // checkpoint of the first repetition's best-validation parameters
  net.seed = opt.repeat == 1 ? opt.seed : derive_seed(opt.seed, 7000);
  json checkpoint;
  checkpoint["format"] = "tsfract-checkpoint";
  checkpoint["version"] = 1;
  checkpoint["config"] = config;
  checkpoint["config"]["hgnn"]["init_seed"] = net.seed;
  checkpoint["best_epoch"] = first_run->history.best_epoch + 1;
  checkpoint["params"] = flatten(first_run->params);
  std::ofstream ckpt = open_output(out_dir / "checkpoint.json");
  ckpt << checkpoint.dump() << '\n';

  write_history_csv(out_dir / "history.csv", config, first_run->history);
  write_report_files(out_dir, config,
                     {{"test", test_report}, {"val", val_report}}, opt.aspect);

  std::cout << "trained " << opt.repeat << " repetition(s), best epoch "
            << (first_run->history.best_epoch + 1) << "\n";
  print_report("test", test_report);
  print_report("val", val_report);
  return 0;
}

int run_eval(const fs::path& checkpoint_path, const fs::path& input,
             const fs::path& out_dir) {
  std::ifstream in(checkpoint_path);
  if (!in) throw IoError("cannot open '" + checkpoint_path.string() + "'");
  json checkpoint;
  try {
    in >> checkpoint;
  } catch (const json::parse_error& e) {
    throw ParseError("checkpoint: " + std::string(e.what()));
  }
  if (checkpoint.value("format", "") != "tsfract-checkpoint")
    throw ConfigError("not a checkpoint file");

  const json& config = checkpoint.at("config");
  const Aspect aspect = parse_aspect(config.at("aspect").get<std::string>());
  const DfaFlags dfa = dfa_flags_from_json(config.at("dfa"));
  const std::string axis = config.at("axis").get<std::string>();

  HgnnConfig net;
  net.fusion_dim = config.at("hgnn").at("fusion_dim").get<int>();
  net.kernel_size = config.at("hgnn").at("kernel_size").get<int>();
  net.num_classes = config.at("hgnn").at("num_classes").get<int>();
  net.seed = config.at("hgnn").value("init_seed", 0ULL);
  const std::vector<double> flat = checkpoint.at("params").get<std::vector<double>>();
  const HgnnParams params = unflatten(net, flat);

  const std::vector<HaERecord> records = load_records(input);
  for (const HaERecord& rec : records)
    if (label_of(rec, aspect) > net.num_classes)
      throw ConfigError("record '" + rec.id + "' has " +
                        std::string(aspect_name(aspect)) + " level " +
                        std::to_string(label_of(rec, aspect)) +
                        " but the checkpoint has " +
                        std::to_string(net.num_classes) + " classes");

  const HfsBatch batch = compute_hfs_batch(records, dfa, parse_axis(axis));
  if (batch.failures > 0)
    throw InvalidInput("fluctuation analysis failed for " +
                       std::to_string(batch.failures) + " record(s)");

  std::vector<std::string> ids;
  for (const HaERecord& rec : records) ids.push_back(rec.id);
  const std::vector<Sample> samples = collect_samples(ids, records, batch, aspect);
  const EvalReport report = macro_report(hgnn_confusion(samples, params, net));

  json eval_config = config;
  eval_config["command"] = "eval";
  write_report_files(out_dir, eval_config, {{"all", report}}, aspect);
  print_report("all", report);
  return 0;
}

// ---------------------------------------------------------------------------
// pipeline

struct PipelineOptions {
  std::optional<std::string> input;
  double hurst_a = 0.3;
  double hurst_b = 0.8;
  std::size_t count = 100;
  std::size_t n = 1024;
  TrainOptions train;
};

int run_pipeline(const PipelineOptions& opt, const fs::path& out_dir) {
  std::vector<HaERecord> records;
  TrainOptions train_opt = opt.train;
  if (opt.input.has_value()) {
    records = load_records(*opt.input);
  } else {
    GeneratorSpec low;
    low.kind = GeneratorSpec::Kind::Fgn;
    low.length = opt.n;
    low.hurst = opt.hurst_a;
    GeneratorSpec high = low;
    high.hurst = opt.hurst_b;
    const std::vector<ClassSpec> classes{
        {low, Labels{1, 1, 1}, opt.count},
        {high, Labels{2, 2, 2}, opt.count},
    };
    records = gen_labeled_dataset(classes, opt.train.seed);
    std::ofstream data = open_output(out_dir / "dataset.jsonl");
    write_records(data, records);
    json meta;
    meta["format"] = "tsfract-dataset-meta";
    meta["version"] = 1;
    meta["config"] = {{"command", "pipeline-synth"}, {"hurst_a", opt.hurst_a},
                      {"hurst_b", opt.hurst_b},      {"count", opt.count},
                      {"n", opt.n},                  {"seed", opt.train.seed}};
    meta["records"] = records.size();
    std::ofstream meta_out = open_output(out_dir / "dataset.jsonl.meta.json");
    meta_out << meta.dump(2) << '\n';
    if (train_opt.num_classes == 0) train_opt.num_classes = 2;
  }

  // fractal-series table alongside the model artifacts
  {
    const ReduceAxis axis = parse_axis(train_opt.axis);
    const HfsBatch batch = compute_hfs_batch(records, train_opt.dfa, axis);
    json config{{"command", "pipeline-analyze"},
                {"axis", train_opt.axis},
                {"dfa", dfa_flags_to_json(train_opt.dfa)}};
    std::ofstream out = open_output(out_dir / "analysis.csv");
    out << "# config " << config.dump() << "\n";
    out << "id,q,h,r2\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!batch.errors[i].empty()) {
        out << "# error id=" << records[i].id << " what=" << batch.errors[i]
            << "\n";
        continue;
      }
      const FractalSeries& hfs = *batch.series[i];
      for (std::size_t qi = 0; qi < hfs.q_grid.size(); ++qi)
        out << records[i].id << ',' << format_g17(hfs.q_grid[qi]) << ','
            << format_g17(hfs.h[qi]) << ',' << format_g17(hfs.fit_r2[qi]) << "\n";
    }
  }

  return run_train(records, train_opt, out_dir);
}

// ---------------------------------------------------------------------------

void add_dfa_flags(CLI::App* cmd, DfaFlags& flags) {
  cmd->add_option("--variant", flags.variant, "detrending variant: standard|hmf")
      ->check(CLI::IsMember({"standard", "hmf"}));
  cmd->add_option("--alpha", flags.alpha, "sigmoid scaling index (hmf)");
  cmd->add_option("--order", flags.order, "detrending polynomial order");
  cmd->add_option("--q-min", flags.q_min, "lowest fractal order");
  cmd->add_option("--q-max", flags.q_max, "highest fractal order");
  cmd->add_option("--q-step", flags.q_step, "fractal order step");
  cmd->add_option("--s-min", flags.s_min, "smallest window length");
  cmd->add_option("--s-max", flags.s_max, "largest window length (0 = length/4)");
  cmd->add_option("--s-count", flags.s_count, "number of window lengths");
}

void add_train_flags(CLI::App* cmd, TrainOptions& opt, std::string& aspect) {
  cmd->add_option("--aspect", aspect, "label aspect: severity|possibility|risk")
      ->check(CLI::IsMember({"severity", "possibility", "risk"}));
  cmd->add_option("--axis", opt.axis, "embedding reduction axis: tokens|dims")
      ->check(CLI::IsMember({"tokens", "dims"}));
  cmd->add_option("--num-classes", opt.num_classes,
                  "class count (0 = the aspect's level count)");
  cmd->add_option("--fusion-dim", opt.fusion_dim, "fused feature width");
  cmd->add_option("--kernel-size", opt.kernel_size, "convolution width");
  cmd->add_option("--lr", opt.lr, "Adam learning rate");
  cmd->add_option("--epochs", opt.epochs, "training epochs");
  cmd->add_option("--batch", opt.batch, "minibatch size");
  cmd->add_option("--seed", opt.seed, "seed for split, init and shuffling");
  cmd->add_option("--repeat", opt.repeat, "repetitions averaged in the report");
  add_dfa_flags(cmd, opt.dfa);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multifractal fluctuation analysis and gated sequence classification"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  int threads = 0;
  app.add_option("--threads", threads,
                 "OpenMP thread count (0 = TSFRACT_THREADS env or default)");

  // synth
  SynthOptions synth_opt;
  std::string synth_out;
  CLI::App* synth = app.add_subcommand("synth", "generate a labeled JSONL dataset");
  synth->add_option("--out", synth_out, "output JSONL path")->required();
  synth->add_option("--kind", synth_opt.kind, "generator: white|fgn|cascade")
      ->check(CLI::IsMember({"white", "fgn", "cascade"}));
  synth->add_option("--n", synth_opt.n, "series length");
  synth->add_option("--hurst", synth_opt.hurst, "fGn Hurst parameter");
  synth->add_option("--levels", synth_opt.levels, "cascade levels");
  synth->add_option("--p", synth_opt.p, "cascade left fraction");
  synth->add_option("--count", synth_opt.count, "number of records");
  synth->add_option("--seed", synth_opt.seed, "dataset seed");
  synth->add_option("--severity", synth_opt.severity, "severity label 1..5");
  synth->add_option("--possibility", synth_opt.possibility, "possibility label 1..5");
  synth->add_option("--risk", synth_opt.risk, "risk label 1..4");

  // analyze
  std::string analyze_in, analyze_out, analyze_axis = "tokens";
  DfaFlags analyze_flags;
  CLI::App* analyze =
      app.add_subcommand("analyze", "fractal series per record to CSV");
  analyze->add_option("--input", analyze_in, "input JSONL dataset")->required();
  analyze->add_option("--out", analyze_out, "output CSV path")->required();
  analyze->add_option("--axis", analyze_axis, "embedding reduction axis")
      ->check(CLI::IsMember({"tokens", "dims"}));
  add_dfa_flags(analyze, analyze_flags);

  // train
  TrainOptions train_opt;
  std::string train_in, train_out_dir, train_aspect = "severity";
  CLI::App* train_cmd =
      app.add_subcommand("train", "split, analyze and train one aspect");
  train_cmd->add_option("--input", train_in, "input JSONL dataset")->required();
  train_cmd->add_option("--out-dir", train_out_dir, "artifact directory")->required();
  add_train_flags(train_cmd, train_opt, train_aspect);

  // eval
  std::string eval_ckpt, eval_in, eval_out_dir;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint JSON")->required();
  eval_cmd->add_option("--input", eval_in, "input JSONL dataset")->required();
  eval_cmd->add_option("--out-dir", eval_out_dir, "artifact directory")->required();

  // pipeline
  PipelineOptions pipe_opt;
  std::string pipe_out_dir, pipe_aspect = "severity", pipe_input;
  CLI::App* pipeline = app.add_subcommand(
      "pipeline", "synthesize (or load), analyze, train and evaluate");
  pipeline->add_option("--out-dir", pipe_out_dir, "artifact directory")->required();
  pipeline->add_option("--input", pipe_input, "existing JSONL dataset (optional)");
  pipeline->add_option("--hurst-a", pipe_opt.hurst_a, "class-1 fGn Hurst");
  pipeline->add_option("--hurst-b", pipe_opt.hurst_b, "class-2 fGn Hurst");
  pipeline->add_option("--count", pipe_opt.count, "records per class");
  pipeline->add_option("--n", pipe_opt.n, "series length per record");
  add_train_flags(pipeline, pipe_opt.train, pipe_aspect);

  CLI11_PARSE(app, argc, argv);

  if (threads == 0)
    if (const char* env = std::getenv("TSFRACT_THREADS"))
      threads = std::atoi(env);
  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (*synth) return run_synth(synth_opt, synth_out);
    if (*analyze) return run_analyze(analyze_in, analyze_out, analyze_flags,
                                     analyze_axis);
    if (*train_cmd) {
      train_opt.aspect = parse_aspect(train_aspect);
      return run_train(load_records(train_in), train_opt, train_out_dir);
    }
    if (*eval_cmd) return run_eval(eval_ckpt, eval_in, eval_out_dir);
    if (*pipeline) {
      pipe_opt.train.aspect = parse_aspect(pipe_aspect);
      if (!pipe_input.empty()) pipe_opt.input = pipe_input;
      return run_pipeline(pipe_opt, pipe_out_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
