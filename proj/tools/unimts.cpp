// Command-line front end: simulate, pretrain, zero-shot, finetune, eval and
// make-toy. Exit codes: 0 success, 1 usage error, 2 data error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "unimts.hpp"

namespace fs = std::filesystem;
using namespace unimts;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

/// Raised for option combinations CLI11 cannot check on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "'" + dir.string() + "' is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error(ErrorKind::EmptyDataset, "no " + ext + " files in '" + dir.string() + "'");
  return out;
}

std::string checkpoint_hash(const std::string& bytes) { return hex64(fnv1a64(bytes)); }

void banner(const CLI::App& cmd, std::uint64_t seed, const std::string& checkpoint) {
  std::cerr << "unimts " << cmd.get_name() << ": seed=" << seed
            << " config=" << hex64(fnv1a64(cmd.config_to_str(true, false))) << " checkpoint=" << checkpoint << '\n';
}

EncoderConfig parse_blocks(const std::string& spec, Partition partition, std::size_t dim) {
  EncoderConfig cfg;
  cfg.partition = partition;
  cfg.embedding_dim = dim;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    BlockSpec b;
    char c1 = 0, c2 = 0;
    std::istringstream is(item);
    if (!(is >> b.in_channels >> c1 >> b.out_channels >> c2 >> b.kernel_t) || c1 != ':' || c2 != ':' ||
        !(is >> std::ws).eof())
      throw UsageError("--blocks entries must look like in:out:kernel, got '" + item + "'");
    cfg.blocks.push_back(b);
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

SkeletonStructure load_structure(const std::string& path) {
  return path.empty() ? smpl22() : io::read_structure_file(path);
}

void check_mask_range(std::size_t lo, std::size_t hi, std::size_t joints) {
  if (lo < 1 || lo > hi || hi > joints)
    throw UsageError("--mask-min/--mask-max must satisfy 1 <= min <= max <= " + std::to_string(joints));
}

struct SimulateArgs {
  std::string skeleton_dir, out;
  double fs = 20.0, sigma_accel = 0.05, sigma_gyro = 0.005;
  bool gravity = false, binary = false;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

int run_simulate(const CLI::App& cmd, const SimulateArgs& a) {
  banner(cmd, a.seed, "-");
  const auto files = files_with_extension(a.skeleton_dir, ".skel");
  std::vector<SkeletonSequence> seqs;
  for (const auto& f : files) {
    std::vector<std::string> warnings;
    seqs.push_back(io::read_skeleton_file(f, &warnings));
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  }
  SimulationOptions opt;
  opt.noise = {a.sigma_accel, a.sigma_gyro};
  opt.target_fs = a.fs;
  opt.gravity = a.gravity;
  const auto out = simulate_batch(seqs, opt, a.seed, a.workers);
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < out.size(); ++i)
    io::write_timeseries_file(fs::path(a.out) / (files[i].stem().string() + (a.binary ? ".umts" : ".ts")), out[i],
                              a.binary);
  std::cout << "simulated " << out.size() << " sequences into " << a.out << '\n';
  return 0;
}

struct PretrainArgs {
  std::string data, desc, embeddings, out, structure, metrics, cache, blocks = "6:32:9,32:64:9";
  std::string partition = "distance";
  std::size_t epochs = 10, batch = 64, mask_min = 1, mask_max = 5, embedding_dim = 64;
  std::size_t text_slots = 4096, token_dim = 64;
  double lr = 1e-4, fs = 20.0, sigma_accel = 0.05, sigma_gyro = 0.005;
  bool no_rot_aug = false, no_text_aug = false, symmetric = false, deterministic = false, gravity = false,
       l2 = false;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

int run_pretrain(const CLI::App& cmd, const PretrainArgs& a) {
  const auto skeleton = load_structure(a.structure);
  check_mask_range(a.mask_min, a.mask_max, skeleton.joints());
  std::optional<TextEmbeddingTable> table;
  if (!a.embeddings.empty()) table = load_embeddings(a.embeddings, a.l2);
  const std::size_t dim = table ? table->dim() : a.embedding_dim;
  const auto encoder = parse_blocks(a.blocks, a.partition == "uniform" ? Partition::Uniform : Partition::Distance, dim);

  PretrainData data;
  for (const auto& f : files_with_extension(a.data, ".skel")) {
    std::vector<std::string> warnings;
    data.sequences.push_back(io::read_skeleton_file(f, &warnings));
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    data.descriptions.add(io::read_description_file(fs::path(a.desc) / (f.stem().string() + ".txt")));
  }

  TextEncoderConfig text;
  text.mode = table ? TextMode::File : TextMode::Trainable;
  text.slots = a.text_slots;
  text.token_dim = a.token_dim;
  Rng init(derive_seed(a.seed, {0x1A17}));
  auto model = make_model<double>(encoder, skeleton, text, init, a.fs);
  banner(cmd, a.seed, checkpoint_hash(io::encode_checkpoint(model)));

  TrainConfig cfg;
  cfg.batch = a.batch;
  cfg.epochs = a.epochs;
  cfg.lr = a.lr;
  cfg.mask_min = a.mask_min;
  cfg.mask_max = a.mask_max;
  cfg.seed = a.seed;
  cfg.rotation_augmentation = !a.no_rot_aug;
  cfg.text_augmentation = !a.no_text_aug;
  cfg.symmetric_loss = a.symmetric;
  cfg.deterministic = a.deterministic;
  cfg.workers = a.workers;
  cfg.simulation.noise = {a.sigma_accel, a.sigma_gyro};
  cfg.simulation.target_fs = a.fs;
  cfg.simulation.gravity = a.gravity;
  cfg.cache_dir = a.cache;

  std::ofstream metrics_file;
  std::ostream* metrics = &std::cout;
  if (!a.metrics.empty()) {
    metrics_file.open(a.metrics);
    if (!metrics_file) throw Error(ErrorKind::Io, "cannot write '" + a.metrics + "'");
    metrics = &metrics_file;
  }
  *metrics << std::setprecision(10);
  pretrain(model, data, cfg, table ? &*table : nullptr, metrics);
  const auto bytes = io::encode_checkpoint(model);
  io::write_file(a.out, bytes);
  std::cout << "wrote " << a.out << " (checkpoint " << checkpoint_hash(bytes) << ")\n";
  return 0;
}

struct ModelArgs {
  std::string model, manifest, labels, report;
  bool l2 = false;
  unsigned workers = 1;
};

Model<double> load_model(const std::string& path, std::string& hash) {
  const auto bytes = io::read_file(path);
  hash = checkpoint_hash(bytes);
  return io::decode_checkpoint<double>(bytes, path);
}

LabelSet resolve_labels(const Model<double>& model, const std::vector<std::string>& names, const std::string& path,
                        bool l2) {
  if (!path.empty()) return label_set_from_table(names, load_embeddings(path, l2));
  if (model.text.mode == TextMode::Trainable) return label_set_from_model(names, model);
  throw UsageError("--labels is required: the model was trained on file-provided embeddings");
}

void report(const EvalReport& r, const std::vector<std::string>& names, const std::string& path) {
  std::cout << format_report(r, names);
  if (!path.empty()) io::write_file(path, format_report_kv(r, names));
}

int run_zero_shot(const CLI::App& cmd, const ModelArgs& a) {
  std::string hash;
  const auto model = load_model(a.model, hash);
  banner(cmd, 0, hash);
  const auto manifest = io::read_manifest_file(a.manifest);
  const auto labels = resolve_labels(model, manifest.labels, a.labels, a.l2);
  const auto data = load_labeled_dataset(manifest, model, manifest.labels);
  report(evaluate(model, data, &labels, EvalMode::ZeroShot, a.workers), manifest.labels, a.report);
  return 0;
}

int run_eval(const CLI::App& cmd, const ModelArgs& a) {
  std::string hash;
  const auto model = load_model(a.model, hash);
  banner(cmd, 0, hash);
  const auto manifest = io::read_manifest_file(a.manifest);
  if (model.has_head()) {
    const auto data = load_labeled_dataset(manifest, model, model.class_names);
    report(evaluate(model, data, nullptr, EvalMode::Finetuned, a.workers), model.class_names, a.report);
  } else {
    const auto labels = resolve_labels(model, manifest.labels, a.labels, a.l2);
    const auto data = load_labeled_dataset(manifest, model, manifest.labels);
    report(evaluate(model, data, &labels, EvalMode::ZeroShot, a.workers), manifest.labels, a.report);
  }
  return 0;
}

struct FinetuneArgs {
  ModelArgs base;
  std::string out;
  std::size_t epochs = 10, batch = 16;
  double lr = 1e-4;
  std::uint64_t seed = 0;
};

int run_finetune(const CLI::App& cmd, const FinetuneArgs& a) {
  std::string hash;
  auto model = load_model(a.base.model, hash);
  banner(cmd, a.seed, hash);
  const auto manifest = io::read_manifest_file(a.base.manifest);
  const auto labels = resolve_labels(model, manifest.labels, a.base.labels, a.base.l2);
  const auto data = load_labeled_dataset(manifest, model, manifest.labels);
  FinetuneConfig cfg{a.epochs, a.batch, a.lr, a.seed};
  std::cout << std::setprecision(10);
  finetune(model, data, labels, cfg, &std::cout);
  const auto bytes = io::encode_checkpoint(model);
  io::write_file(a.out, bytes);
  std::cout << "wrote " << a.out << " (checkpoint " << checkpoint_hash(bytes) << ")\n";
  return 0;
}

struct ToyArgs {
  std::string out;
  std::size_t train_per_class = 50, test_per_class = 10;
  std::uint64_t seed = 7;
};

int run_make_toy(const CLI::App& cmd, const ToyArgs& a) {
  banner(cmd, a.seed, "-");
  toy::Options o;
  o.train_per_class = a.train_per_class;
  o.test_per_class = a.test_per_class;
  o.seed = a.seed;
  const auto d = toy::make_dataset(o);
  toy::write_files(a.out, d, SimulationOptions{}, a.seed);
  std::cout << "wrote toy dataset to " << a.out << '\n';
  return 0;
}

void add_model_options(CLI::App* cmd, ModelArgs& a, bool labels_and_report) {
  cmd->add_option("--model", a.model, "Checkpoint file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--manifest", a.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  cmd->add_option("--labels", a.labels, "Embedding file holding the label embeddings")->check(CLI::ExistingFile);
  cmd->add_flag("--l2-normalize", a.l2, "L2-normalize loaded embeddings");
  if (labels_and_report) {
    cmd->add_option("--report", a.report, "Also write the report as key=value lines");
    cmd->add_option("--workers", a.workers, "Evaluation threads")->check(CLI::Range(1u, 256u));
  }
}

void add_config_option(CLI::App* cmd) {
  cmd->add_option("--config", "INI file of option=value lines; command-line flags take precedence");
}

/// CLI11 does not read config files attached to subcommands, so `--config FILE`
/// is expanded into flags here. Options already on the command line win.
std::vector<std::string> expand_config(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<std::string> out;
  std::set<std::string> given;
  std::optional<std::string> file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config requires a file");
      file = args[++i];
    } else if (a.rfind("--config=", 0) == 0) {
      file = a.substr(9);
    } else {
      if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') - 2));
      out.push_back(a);
    }
  }
  if (!file) return out;
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(*file);
  } catch (const CLI::Error& e) {
    throw UsageError("--config: " + std::string(e.what()));
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty()) throw UsageError("--config: sections are not supported ('" + item.fullname() + "')");
    if (given.count(item.name)) continue;
    if (item.inputs.size() == 1 && item.inputs[0] == "false") continue;
    out.push_back("--" + item.name);
    if (item.inputs.size() == 1 && item.inputs[0] == "true") continue;
    out.insert(out.end(), item.inputs.begin(), item.inputs.end());
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated IMU pre-training and zero-shot activity recognition"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate IMU channels for every *.skel file");
  add_config_option(simulate);
  simulate->add_option("--skeleton-dir", sim.skeleton_dir, "Directory of skeleton motion files")->required();
  simulate->add_option("--out", sim.out, "Output directory")->required();
  simulate->add_option("--fs", sim.fs, "Target sample rate (Hz)")->check(CLI::PositiveNumber);
  simulate->add_option("--sigma-accel", sim.sigma_accel, "Accelerometer noise sigma (m/s^2)")
      ->check(CLI::NonNegativeNumber);
  simulate->add_option("--sigma-gyro", sim.sigma_gyro, "Gyroscope noise sigma (rad/s)")->check(CLI::NonNegativeNumber);
  simulate->add_flag("--gravity", sim.gravity, "Add gravity to simulated accelerations");
  simulate->add_flag("--binary", sim.binary, "Write the binary time-series variant");
  simulate->add_option("--seed", sim.seed, "Master seed");
  simulate->add_option("--workers", sim.workers, "Simulation threads")->check(CLI::Range(1u, 256u));

  PretrainArgs pre;
  auto* pretrain_cmd = app.add_subcommand("pretrain", "Contrastive pre-training on simulated data");
  add_config_option(pretrain_cmd);
  pretrain_cmd->add_option("--data", pre.data, "Directory of *.skel motion files")->required();
  pretrain_cmd->add_option("--desc", pre.desc, "Directory of <stem>.txt description files")->required();
  pretrain_cmd->add_option("--embeddings", pre.embeddings, "Text embedding file (omit for the trainable encoder)")
      ->check(CLI::ExistingFile);
  pretrain_cmd->add_option("--out", pre.out, "Output checkpoint")->required();
  pretrain_cmd->add_option("--structure", pre.structure, "Skeleton structure file (default: SMPL 22 joints)")
      ->check(CLI::ExistingFile);
  pretrain_cmd->add_option("--epochs", pre.epochs, "Training epochs");
  pretrain_cmd->add_option("--batch", pre.batch, "Batch size")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 20));
  pretrain_cmd->add_option("--lr", pre.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  pretrain_cmd->add_option("--mask-min", pre.mask_min, "Fewest joints kept by the mask")
      ->check(CLI::Range(std::size_t{1}, io::kMaxJoints));
  pretrain_cmd->add_option("--mask-max", pre.mask_max, "Most joints kept by the mask")
      ->check(CLI::Range(std::size_t{1}, io::kMaxJoints));
  pretrain_cmd->add_flag("--no-rot-aug", pre.no_rot_aug, "Disable per-joint rotation augmentation");
  pretrain_cmd->add_flag("--no-text-aug", pre.no_text_aug, "Always pair with the first description");
  pretrain_cmd->add_flag("--symmetric-loss", pre.symmetric, "Average both contrastive directions");
  pretrain_cmd->add_flag("--deterministic", pre.deterministic, "Serial execution for bit-exact reruns");
  pretrain_cmd->add_option("--seed", pre.seed, "Master seed");
  pretrain_cmd->add_option("--blocks", pre.blocks, "Encoder blocks as in:out:kernel,...");
  pretrain_cmd->add_option("--partition", pre.partition, "Adjacency partition strategy")
      ->check(CLI::IsMember({"uniform", "distance"}));
  pretrain_cmd->add_option("--embedding-dim", pre.embedding_dim, "Embedding size for the trainable text encoder")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1} << 16));
  pretrain_cmd->add_option("--text-slots", pre.text_slots, "Hash slots of the trainable text encoder")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1} << 24));
  pretrain_cmd->add_option("--token-dim", pre.token_dim, "Token vector size of the trainable text encoder")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1} << 16));
  pretrain_cmd->add_flag("--l2-normalize", pre.l2, "L2-normalize loaded embeddings");
  pretrain_cmd->add_option("--fs", pre.fs, "Simulation sample rate (Hz)")->check(CLI::PositiveNumber);
  pretrain_cmd->add_option("--sigma-accel", pre.sigma_accel, "Accelerometer noise sigma")->check(CLI::NonNegativeNumber);
  pretrain_cmd->add_option("--sigma-gyro", pre.sigma_gyro, "Gyroscope noise sigma")->check(CLI::NonNegativeNumber);
  pretrain_cmd->add_flag("--gravity", pre.gravity, "Add gravity to simulated accelerations");
  pretrain_cmd->add_option("--cache", pre.cache, "Simulation cache directory");
  pretrain_cmd->add_option("--metrics", pre.metrics, "Per-epoch metrics file (default: stdout)");
  pretrain_cmd->add_option("--workers", pre.workers, "Batch assembly threads")->check(CLI::Range(1u, 256u));

  ModelArgs zs;
  auto* zero_shot = app.add_subcommand("zero-shot", "Zero-shot classification of a manifest");
  add_config_option(zero_shot);
  add_model_options(zero_shot, zs, true);

  FinetuneArgs ft;
  auto* finetune_cmd = app.add_subcommand("finetune", "Fine-tune the encoder with a linear head");
  add_config_option(finetune_cmd);
  add_model_options(finetune_cmd, ft.base, false);
  finetune_cmd->add_option("--out", ft.out, "Output checkpoint")->required();
  finetune_cmd->add_option("--epochs", ft.epochs, "Training epochs");
  finetune_cmd->add_option("--batch", ft.batch, "Batch size")->check(CLI::Range(std::size_t{1}, std::size_t{1} << 20));
  finetune_cmd->add_option("--lr", ft.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  finetune_cmd->add_option("--seed", ft.seed, "Shuffle seed");

  ModelArgs ev;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint (head if present, else zero-shot)");
  add_config_option(eval);
  add_model_options(eval, ev, true);

  ToyArgs toy_args;
  auto* make_toy = app.add_subcommand("make-toy", "Write the synthetic three-activity dataset");
  make_toy->add_option("--out", toy_args.out, "Output directory")->required();
  make_toy->add_option("--train-per-class", toy_args.train_per_class, "Training sequences per class")
      ->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
  make_toy->add_option("--test-per-class", toy_args.test_per_class, "Held-out sequences per class")
      ->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
  make_toy->add_option("--seed", toy_args.seed, "Dataset seed");

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }
  std::reverse(args.begin(), args.end());

  try {
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitUsage;
  }

  try {
    if (*simulate) return run_simulate(*simulate, sim);
    if (*pretrain_cmd) return run_pretrain(*pretrain_cmd, pre);
    if (*zero_shot) return run_zero_shot(*zero_shot, zs);
    if (*finetune_cmd) return run_finetune(*finetune_cmd, ft);
    if (*eval) return run_eval(*eval, ev);
    if (*make_toy) return run_make_toy(*make_toy, toy_args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
