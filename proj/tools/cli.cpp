#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdlib>
#include <iostream>
#include <optional>

#include "scripta/dataset.hpp"
#include "scripta/error.hpp"
#include "scripta/eval_report.hpp"
#include "scripta/knn.hpp"
#include "scripta/metric_eval.hpp"
#include "scripta/mlp.hpp"
#include "scripta/parallel.hpp"
#include "scripta/pipeline.hpp"

namespace scripta::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kDefaultSeed = 1;

struct FeatureFlags {
  std::string zones = "three-halves";
  std::string radii = "1..12";

  FeatureConfig config() const {
    FeatureConfig cfg;
    cfg.zones = parse_zone_mode(zones);
    cfg.radii = parse_radii(radii);
    cfg.validate();
    return cfg;
  }
};

struct TrainFlags {
  double lr = 0.01;
  std::size_t epochs = 100;
  double dropout = 0.5;
  double batch_factor = 1.0;
  double val_fraction = 0.0;
  std::string output = "softmax";
  std::optional<std::uint64_t> seed;
};

void add_feature_flags(CLI::App* cmd, FeatureFlags& f) {
  cmd->add_option("--zones", f.zones, "Pooling zones: three-halves or global")
      ->check(CLI::IsMember({"three-halves", "global"}))
      ->capture_default_str();
  cmd->add_option("--radii", f.radii, "Radii as a..b or a comma list, within 1..12")->capture_default_str();
}

void add_train_flags(CLI::App* cmd, TrainFlags& t) {
  cmd->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--lr", t.lr, "SGD learning rate")->capture_default_str();
  cmd->add_option("--dropout", t.dropout, "Dropout rate on both hidden layers")->capture_default_str();
  cmd->add_option("--batch-factor", t.batch_factor, "Batch size = max(32, round(factor * n_train / n_classes))")
      ->capture_default_str();
  cmd->add_option("--val-fraction", t.val_fraction, "Per-class fraction held out for the history when no --val is given")
      ->capture_default_str();
  cmd->add_option("--output", t.output, "Output nonlinearity: softmax or logistic")
      ->check(CLI::IsMember({"softmax", "logistic"}))
      ->capture_default_str();
  cmd->add_option("--seed", t.seed, "RNG seed (falls back to $SCRIPTA_SEED, then 1)");
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SCRIPTA_SEED"); env && *env) {
    std::uint64_t v = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw ArgumentError("SCRIPTA_SEED is not an unsigned integer: '" + std::string(s) + "'");
    return v;
  }
  return kDefaultSeed;
}

TrainConfig train_config(const TrainFlags& t) {
  TrainConfig cfg;
  cfg.learning_rate = t.lr;
  cfg.epochs = t.epochs;
  cfg.dropout_rate = t.dropout;
  cfg.batch_factor = t.batch_factor;
  cfg.validation_fraction = t.val_fraction;
  cfg.seed = resolve_seed(t.seed);
  cfg.validate();
  return cfg;
}

Mlp fresh_model(const FeatureStore& store, const TrainFlags& t, std::uint64_t seed) {
  ModelMeta meta{store.class_list, store.config_digest, seed};
  return init_model(store.dim, store.class_list.size(), seed, meta, parse_output_activation(t.output));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::string percent(double v) { return format_fixed(100.0 * v, 2) + "%"; }

std::string layerwise_csv(const LayerwiseResult& r) {
  std::string out = "layer,average_accuracy,overall_accuracy\n";
  out += "layer1," + format_fixed(r.layer1.average, 6) + "," + format_fixed(r.layer1.overall, 6) + "\n";
  out += "layer2," + format_fixed(r.layer2.average, 6) + "," + format_fixed(r.layer2.overall, 6) + "\n";
  out += "output," + format_fixed(r.output.average, 6) + "," + format_fixed(r.output.overall, 6) + "\n";
  return out;
}

void render_layerwise(const LayerwiseResult& r, const fs::path& dir) {
  ensure_dir(dir);
  render_report(r.layer1, dir / "layer1");
  render_report(r.layer2, dir / "layer2");
  render_report(r.output, dir / "output");
  write_text_file(dir / "layerwise.csv", layerwise_csv(r));
}

void print_layerwise(const LayerwiseResult& r, std::ostream& out) {
  out << "layer1 " << r.layer1.matrix.total() << " probes: average " << percent(r.layer1.average) << ", overall "
      << percent(r.layer1.overall) << "\n";
  out << "layer2 " << r.layer2.matrix.total() << " probes: average " << percent(r.layer2.average) << ", overall "
      << percent(r.layer2.overall) << "\n";
  out << "output " << r.output.matrix.total() << " probes: average " << percent(r.output.average) << ", overall "
      << percent(r.output.overall) << "\n";
}

// --- subcommands -------------------------------------------------------------

struct ExtractArgs {
  fs::path manifest;
  fs::path out;
  FeatureFlags features;
  std::string split = "all";
  bool merge_val = true;
  std::size_t workers = default_workers();
};

void run_extract(const ExtractArgs& a, std::ostream& out) {
  const auto manifest = load_manifest(a.manifest);
  std::vector<std::size_t> rows;
  if (a.split == "all") {
    rows = manifest.select({Split::train, Split::val, Split::test});
  } else if (a.split == "train") {
    rows = a.merge_val ? manifest.select({Split::train, Split::val}) : manifest.select({Split::train});
  } else if (a.split == "val") {
    rows = manifest.select({Split::val});
  } else {
    rows = manifest.select({Split::test});
  }
  const auto store = extract_store(manifest, rows, a.features.config(), a.workers);
  if (a.out.has_parent_path()) ensure_dir(a.out.parent_path());
  write_features(store, a.out);
  out << "extracted " << store.size() << " x " << store.dim << " features to " << a.out.string() << "\n";
}

struct TrainArgs {
  fs::path features;
  std::optional<fs::path> val;
  fs::path out_dir;
  TrainFlags train;
};

void run_train(const TrainArgs& a, std::ostream& out) {
  const auto store = read_features(a.features);
  std::optional<FeatureStore> val;
  if (a.val) {
    val = read_features(*a.val, store.config_digest);
    if (val->class_list != store.class_list) throw ConfigError(a.val->string() + ": class list differs from " + a.features.string());
  }
  const auto cfg = train_config(a.train);
  auto result = train(fresh_model(store, a.train, cfg.seed), store, cfg, val ? &*val : nullptr, [&](const EpochRecord& e) {
    out << "epoch " << e.epoch << " loss " << format_fixed(e.train_loss, 6);
    if (e.output_error) out << " out_err " << format_fixed(*e.output_error, 4);
    if (e.layer1_error) out << " l1_err " << format_fixed(*e.layer1_error, 4);
    if (e.layer2_error) out << " l2_err " << format_fixed(*e.layer2_error, 4);
    out << "\n";
  });
  ensure_dir(a.out_dir);
  save_model(result.model, a.out_dir / "model.smlp");
  render_history(result.history, a.out_dir);
  out << "model written to " << (a.out_dir / "model.smlp").string() << "\n";
}

struct EvalArgs {
  fs::path model;
  fs::path gallery;
  fs::path probes;
  fs::path out_dir;
  std::size_t k = 1;
  std::string metric = "euclidean";
  std::size_t workers = default_workers();
};

void run_eval(const EvalArgs& a, std::ostream& out) {
  const auto model = load_model(a.model);
  const auto gallery = read_features(a.gallery, model.meta().config_digest);
  const auto probes = read_features(a.probes, model.meta().config_digest);
  const auto r = evaluate_layerwise(model, gallery, probes, a.k, parse_metric(a.metric), a.workers);
  render_layerwise(r, a.out_dir);
  print_layerwise(r, out);
}

struct CrossvalArgs {
  fs::path manifest;
  fs::path out_dir;
  std::size_t folds = 26;
  FeatureFlags features;
  TrainFlags train;
  std::size_t k = 1;
  std::string metric = "euclidean";
  std::size_t workers = default_workers();
};

void run_crossval(const CrossvalArgs& a, std::ostream& out) {
  const auto manifest = load_manifest(a.manifest);
  const auto folds = make_group_folds(manifest, a.folds);
  const auto all = extract_store(manifest, a.features.config(), a.workers);
  const auto cfg = train_config(a.train);
  const auto metric = parse_metric(a.metric);

  std::vector<EvalReport> l1, l2, output;
  std::string folds_csv = "fold,group,train_samples,test_samples,layer1_accuracy,layer2_accuracy,output_accuracy\n";
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& fold = folds[f];
    const auto train_store = all.subset(fold.train);
    const auto test_store = all.subset(fold.test);
    auto result = train(fresh_model(train_store, a.train, cfg.seed), train_store, cfg);
    const auto r = evaluate_layerwise(result.model, train_store, test_store, a.k, metric, a.workers);
    l1.push_back(r.layer1);
    l2.push_back(r.layer2);
    output.push_back(r.output);
    folds_csv += std::to_string(f + 1) + "," + fold.group + "," + std::to_string(fold.train.size()) + "," +
                 std::to_string(fold.test.size()) + "," + format_fixed(r.layer1.overall, 6) + "," +
                 format_fixed(r.layer2.overall, 6) + "," + format_fixed(r.output.overall, 6) + "\n";
    out << "fold " << f + 1 << "/" << folds.size() << " (" << fold.group << "): test " << fold.test.size() << ", layer1 "
        << percent(r.layer1.overall) << ", output " << percent(r.output.overall) << "\n";
  }
  const LayerwiseResult pooled{aggregate_folds(l1), aggregate_folds(l2), aggregate_folds(output)};
  render_layerwise(pooled, a.out_dir);
  write_text_file(a.out_dir / "folds.csv", folds_csv);
  out << "pooled over " << folds.size() << " folds\n";
  print_layerwise(pooled, out);
}

struct CrossdomainArgs {
  fs::path model;
  fs::path gallery;
  fs::path probes;
  fs::path out_dir;
  int layer = 1;
  std::size_t k = 1;
  std::string metric = "euclidean";
  std::size_t workers = default_workers();
};

void run_crossdomain(const CrossdomainArgs& a, std::ostream& out) {
  const auto model = load_model(a.model);
  const auto gallery = read_features(a.gallery, model.meta().config_digest);
  const auto probes = read_features(a.probes, model.meta().config_digest);
  const auto r = cross_domain_eval(model, gallery, probes, a.layer, a.k, parse_metric(a.metric), a.workers);
  ensure_dir(a.out_dir);
  render_report(r.report, a.out_dir);

  std::string csv = "class,seen_by_model,samples,accuracy\n";
  for (std::size_t c = 0; c < probes.class_list.size(); ++c) {
    csv += probes.class_list[c] + "," + (r.seen[c] ? "yes" : "no") + "," + std::to_string(r.report.matrix.row_sum(c)) + ",";
    if (r.report.per_class[c]) csv += format_fixed(*r.report.per_class[c], 6);
    csv += "\n";
  }
  csv += "seen_average,,,";
  if (r.seen_accuracy) csv += format_fixed(*r.seen_accuracy, 6);
  csv += "\nunseen_average,,,";
  if (r.unseen_accuracy) csv += format_fixed(*r.unseen_accuracy, 6);
  csv += "\n";
  write_text_file(a.out_dir / "crossdomain.csv", csv);

  out << "layer" << a.layer << " " << a.k << "-NN: average " << percent(r.report.average) << ", overall "
      << percent(r.report.overall) << "\n";
  if (r.seen_accuracy) out << "seen classes: " << percent(*r.seen_accuracy) << "\n";
  if (r.unseen_accuracy) out << "unseen classes: " << percent(*r.unseen_accuracy) << "\n";
}

struct ReportArgs {
  fs::path from;
  fs::path out_dir;
};

// Re-renders every confusion.csv / history.csv found in `from` and its immediate subdirectories.
void run_report(const ReportArgs& a, std::ostream& out) {
  if (!fs::is_directory(a.from)) throw IoError("not a directory: " + a.from.string());
  std::vector<fs::path> dirs{a.from};
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(a.from)) {
    if (entry.is_directory()) subdirs.push_back(entry.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  dirs.insert(dirs.end(), subdirs.begin(), subdirs.end());

  std::size_t rendered = 0;
  for (const auto& dir : dirs) {
    const auto target = dir == a.from ? a.out_dir : a.out_dir / dir.filename();
    if (fs::exists(dir / "confusion.csv")) {
      render_report(summarize(read_confusion_csv(dir / "confusion.csv")), target);
      out << "report: " << (target / "confusion.svg").string() << "\n";
      ++rendered;
    }
    if (fs::exists(dir / "history.csv")) {
      render_history(read_history(dir / "history.csv"), target);
      out << "history: " << (target / "history.svg").string() << "\n";
      ++rendered;
    }
  }
  if (rendered == 0) throw IoError("no confusion.csv or history.csv under " + a.from.string());
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Script identification with SRS-LBP features, an MLP and layer-wise nearest neighbours", "scripta"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Manifest -> feature store");
  extract->add_option("--manifest", ex.manifest, "CSV with header path,label,split,group")->required()->check(CLI::ExistingFile);
  extract->add_option("--out", ex.out, "Feature store to write (plus <out>.json)")->required();
  add_feature_flags(extract, ex.features);
  extract->add_option("--split", ex.split, "Records to extract: all, train, val or test")
      ->check(CLI::IsMember({"all", "train", "val", "test"}))
      ->capture_default_str();
  extract->add_flag("--merge-val,!--no-merge-val", ex.merge_val, "With --split train, include val records")
      ->capture_default_str();
  extract->add_option("--workers", ex.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Feature store -> model + history");
  train_cmd->add_option("--features", tr.features, "Training feature store")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--val", tr.val, "Validation feature store for the history")->check(CLI::ExistingFile);
  train_cmd->add_option("--out-dir", tr.out_dir, "Directory for model.smlp and history files")->required();
  add_train_flags(train_cmd, tr.train);

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Layer-wise accuracies: layer-1/2 k-NN and output layer");
  eval->add_option("--model", ev.model, "Model file")->required()->check(CLI::ExistingFile);
  eval->add_option("--gallery", ev.gallery, "Reference store (normally the training split)")->required()->check(CLI::ExistingFile);
  eval->add_option("--probes", ev.probes, "Store to classify")->required()->check(CLI::ExistingFile);
  eval->add_option("--out-dir", ev.out_dir, "Report directory")->required();
  eval->add_option("--k", ev.k, "Neighbours")->capture_default_str()->check(CLI::PositiveNumber);
  eval->add_option("--metric", ev.metric, "euclidean or cosine")
      ->check(CLI::IsMember({"euclidean", "cosine"}))
      ->capture_default_str();
  eval->add_option("--workers", ev.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  CrossvalArgs cv;
  auto* crossval = app.add_subcommand("crossval", "Leave-one-group-out cross-validation with a pooled report");
  crossval->add_option("--manifest", cv.manifest, "Manifest whose rows all carry a group")->required()->check(CLI::ExistingFile);
  crossval->add_option("--folds", cv.folds, "Expected number of groups")->capture_default_str()->check(CLI::PositiveNumber);
  crossval->add_option("--out-dir", cv.out_dir, "Report directory")->required();
  add_feature_flags(crossval, cv.features);
  add_train_flags(crossval, cv.train);
  crossval->add_option("--k", cv.k, "Neighbours")->capture_default_str()->check(CLI::PositiveNumber);
  crossval->add_option("--metric", cv.metric, "euclidean or cosine")
      ->check(CLI::IsMember({"euclidean", "cosine"}))
      ->capture_default_str();
  crossval->add_option("--workers", cv.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  CrossdomainArgs cd;
  auto* crossdomain = app.add_subcommand("crossdomain", "k-NN on a foreign dataset through a trained model's layers");
  crossdomain->add_option("--model", cd.model, "Model trained on another dataset")->required()->check(CLI::ExistingFile);
  crossdomain->add_option("--gallery", cd.gallery, "Foreign reference store")->required()->check(CLI::ExistingFile);
  crossdomain->add_option("--probes", cd.probes, "Foreign store to classify")->required()->check(CLI::ExistingFile);
  crossdomain->add_option("--out-dir", cd.out_dir, "Report directory")->required();
  crossdomain->add_option("--layer", cd.layer, "Embedding layer, 1 or 2")->capture_default_str()->check(CLI::Range(1, 2));
  crossdomain->add_option("--k", cd.k, "Neighbours")->capture_default_str()->check(CLI::PositiveNumber);
  crossdomain->add_option("--metric", cd.metric, "euclidean or cosine")
      ->check(CLI::IsMember({"euclidean", "cosine"}))
      ->capture_default_str();
  crossdomain->add_option("--workers", cd.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  ReportArgs rp;
  auto* report = app.add_subcommand("report", "Re-render SVG/CSV reports from saved confusion.csv / history.csv");
  report->add_option("--from", rp.from, "Directory holding saved reports")->required()->check(CLI::ExistingDirectory);
  report->add_option("--out-dir", rp.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*extract) run_extract(ex, out);
    if (*train_cmd) run_train(tr, out);
    if (*eval) run_eval(ev, out);
    if (*crossval) run_crossval(cv, out);
    if (*crossdomain) run_crossdomain(cd, out);
    if (*report) run_report(rp, out);
  } catch (const std::exception& e) {
    err << "scripta: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace scripta::cli
