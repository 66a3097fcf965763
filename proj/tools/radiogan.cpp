// radiogan: phantom corpus -> MIP preprocessing -> conditional GAN training -> sampling,
// latent walks and evaluation. Every command echoes its resolved configuration next to
// its outputs as config.txt so the run can be repeated from the output directory alone.

#include "radiogan/io.hpp"
#include "radiogan/latent_walk.hpp"
#include "radiogan/phantom.hpp"
#include "radiogan/pipeline.hpp"
#include "radiogan/run_config.hpp"
#include "radiogan/training.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace radiogan;

namespace {

/// Outputs are assembled in a sibling directory and moved into place only on success, so a
/// failed command never leaves a half-written output directory behind.
class Staging {
 public:
  explicit Staging(fs::path out) : out_(std::move(out)) {
    if (out_.empty()) throw std::invalid_argument("no output directory given (--out)");
    const fs::path parent = out_.has_parent_path() ? out_.parent_path() : fs::path(".");
    fs::create_directories(parent);
    dir_ = parent / ("." + out_.filename().string() + ".partial");
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  Staging(const Staging&) = delete;
  Staging& operator=(const Staging&) = delete;
  ~Staging() {
    std::error_code ec;
    if (!committed_) fs::remove_all(dir_, ec);
  }

  const fs::path& dir() const { return dir_; }

  void commit() {
    fs::create_directories(out_);
    for (const auto& entry : fs::directory_iterator(dir_)) {
      const fs::path target = out_ / entry.path().filename();
      if (fs::is_directory(target)) fs::remove_all(target);
      fs::rename(entry.path(), target);
    }
    fs::remove_all(dir_);
    committed_ = true;
  }

 private:
  fs::path out_, dir_;
  bool committed_ = false;
};

struct ManifestImages {
  Dataset data;
  std::vector<std::string> ids;
};

ManifestImages read_image_corpus(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.csv";
  if (!fs::exists(manifest)) throw std::runtime_error("no manifest.csv in " + dir.string());
  ManifestImages out;
  for (const auto& row : io::read_manifest(manifest)) {
    out.data.images.push_back(read_pgm16(dir / row.path));
    out.data.labels.push_back(row.label);
    out.ids.push_back(row.id);
  }
  if (out.ids.empty()) throw std::runtime_error("image corpus " + dir.string() + " is empty");
  return out;
}

void adopt_checkpoint_config(RunConfig& cfg, const ModelCheckpoint& ckpt) {
  for (const auto& [k, v] : model_config_values(ckpt.model.config)) cfg.set(k, v);
  for (const auto& [k, v] : train_config_values(ckpt.train)) cfg.set(k, v);
}

fs::path reference_dir(const RunConfig& cfg, const ModelCheckpoint& ckpt) {
  const std::string& data = cfg.get("io.data");
  if (!data.empty()) return data;
  if (!ckpt.train.label_source.empty()) return ckpt.train.label_source;
  throw std::runtime_error("no reference corpus recorded in the checkpoint; pass --data");
}

std::vector<Image<float>> reference_images(const fs::path& dir, const ModelConfig& model) {
  auto corpus = read_image_corpus(dir);
  for (const auto& img : corpus.data.images) {
    if (img.rows() != model.canvas_height() || img.cols() != model.canvas_width()) {
      throw std::runtime_error("reference corpus " + dir.string() + " is " + std::to_string(img.rows()) + "x" +
                               std::to_string(img.cols()) + " but the checkpoint canvas is " +
                               std::to_string(model.canvas_height()) + "x" + std::to_string(model.canvas_width()));
    }
  }
  return std::move(corpus.data.images);
}

std::string numbered(const std::string& stem, int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04d", k);
  return stem + buf;
}

// --- commands -----------------------------------------------------------------

void cmd_phantom(const RunConfig& cfg) {
  const PhantomSpec spec = cfg.phantom();
  Staging out(cfg.get("io.out"));
  write_corpus(make_corpus(spec), out.dir());
  cfg.write(out.dir() / "config.txt");
  out.commit();
  std::cout << "wrote " << spec.total() << " volumes to " << cfg.get("io.out") << "\n";
}

void cmd_preprocess(const RunConfig& cfg) {
  const PipelineConfig pipeline = cfg.pipeline();
  const fs::path in = cfg.get("io.in");
  if (in.empty()) throw std::invalid_argument("no input directory given (--in)");
  const fs::path manifest = in / "manifest.csv";
  if (!fs::exists(manifest)) throw std::runtime_error("no manifest.csv in " + in.string());
  const auto rows = io::read_manifest(manifest);
  if (rows.empty()) throw std::runtime_error("no volumes listed in " + manifest.string());

  Staging out(cfg.get("io.out"));
  std::vector<io::ManifestRow> written;
  for (const auto& row : rows) {
    const MipImage mip = preprocess(read_pvol(in / row.path), row.label, pipeline, row.id);
    const std::string file = row.id + ".pgm";
    write_pgm16(out.dir() / file, mip.pixels);
    written.push_back({row.id, row.label, file});
  }
  io::write_manifest(out.dir() / "manifest.csv", written);
  cfg.write(out.dir() / "config.txt");
  out.commit();
  std::cout << "wrote " << written.size() << " images to " << cfg.get("io.out") << "\n";
}

void cmd_train(RunConfig& cfg) {
  const fs::path data_dir = cfg.get("io.data");
  if (data_dir.empty()) throw std::invalid_argument("no training corpus given (--data)");
  if (cfg.get("train.label_source").empty()) cfg.set("train.label_source", data_dir.string());
  const ModelConfig model = cfg.model();
  const TrainConfig train_cfg = cfg.train();
  const auto corpus = read_image_corpus(data_dir);
  validate(corpus.data, model);

  const fs::path out = cfg.get("io.out");
  if (out.empty()) throw std::invalid_argument("no output directory given (--out)");
  fs::create_directories(out);
  fs::remove(out / "FAILED");
  cfg.write(out / "config.txt");
  try {
    const TrainResult result = train(corpus.data, model, train_cfg, out);
    const auto& last = result.history.back().metrics;
    std::printf("trained %d epochs: d_loss_real=%.4f d_loss_fake=%.4f g_loss=%.4f d_acc=%.3f\n",
                result.checkpoint.epoch, last.d_loss_real, last.d_loss_fake, last.g_loss, last.d_accuracy);
  } catch (const std::exception& e) {
    // history.csv and the last complete checkpoint are kept; mark the run as failed.
    io::write_file_atomic(out / "FAILED", std::string(e.what()) + "\n");
    throw;
  }
}

void cmd_generate(RunConfig& cfg) {
  const ModelCheckpoint ckpt = load_checkpoint(cfg.get("io.ckpt"));
  adopt_checkpoint_config(cfg, ckpt);
  const ClassLabel label = parse_class(cfg.get("generate.class"));
  const auto count = parse_int("generate.count", cfg.get("generate.count"));
  if (count < 1) throw std::invalid_argument("--count must be >= 1");
  const std::uint64_t seed = parse_u64("generate.seed", cfg.get("generate.seed"));

  Staging out(cfg.get("io.out"));
  for (int k = 0; k < count; ++k) {
    const auto z = sample_latent(seed, label, k, ckpt.model.config.latent_dim);
    write_pgm16(out.dir() / (numbered(std::string(class_name(label)), k) + ".pgm"),
                generate_image(ckpt.model, z, label));
  }
  cfg.write(out.dir() / "config.txt");
  out.commit();
  std::cout << "wrote " << count << " " << class_name(label) << " images to " << cfg.get("io.out") << "\n";
}

void cmd_walk(RunConfig& cfg) {
  const ModelCheckpoint ckpt = load_checkpoint(cfg.get("io.ckpt"));
  adopt_checkpoint_config(cfg, ckpt);
  const WalkSpec spec = cfg.walk();
  const fs::path ref_dir = reference_dir(cfg, ckpt);
  const auto reference = reference_images(ref_dir, ckpt.model.config);
  cfg.set("io.data", ref_dir.string());

  const WalkReport report = walk(ckpt.model, spec, reference);
  Staging out(cfg.get("io.out"));
  write_pgm16(out.dir() / "strip.pgm", horizontal_strip(report.images));
  io::write_file_atomic(out.dir() / "walk.csv", walk_csv(report));
  cfg.write(out.dir() / "config.txt");
  out.commit();
  std::cout << "wrote a " << spec.steps << "-step " << walk_mode_name(spec.mode) << " walk to " << cfg.get("io.out")
            << "\n";
}

void cmd_evaluate(RunConfig& cfg) {
  const ModelCheckpoint ckpt = load_checkpoint(cfg.get("io.ckpt"));
  adopt_checkpoint_config(cfg, ckpt);
  const auto per_class = parse_int("evaluate.per_class", cfg.get("evaluate.per_class"));
  if (per_class < 1) throw std::invalid_argument("--per-class must be >= 1");
  const std::uint64_t seed = parse_u64("evaluate.seed", cfg.get("evaluate.seed"));
  const fs::path report_path = cfg.get("io.out");
  if (report_path.empty()) throw std::invalid_argument("no report path given (--out)");
  const fs::path ref_dir = reference_dir(cfg, ckpt);
  const auto reference = reference_images(ref_dir, ckpt.model.config);
  cfg.set("io.data", ref_dir.string());

  const ModelConfig& m = ckpt.model.config;
  const auto rows = evaluate_conditioning(ckpt.model, static_cast<int>(per_class), seed, reference,
                                          ZoneLayout::for_canvas(m.canvas_height(), m.canvas_width()));
  if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
  io::write_file_atomic(report_path, evaluation_csv(rows));
  fs::path config_path = report_path;
  config_path.replace_extension(".config.txt");
  cfg.write(config_path);
  std::printf("conditioning accuracy %.3f over %lld samples\n", overall_accuracy(rows), per_class * kNumClasses);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional GAN for synthetic PET maximum-intensity projections"};
  app.require_subcommand(1);

  std::string config_file;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::vector<std::string> sets;
  app.add_option("--config", config_file, "key=value configuration file; flags override it")
      ->check(CLI::ExistingFile);
  app.add_option("--set", sets, "extra key=value override (repeatable)");

  auto flag = [&](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(
        name, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); }, help);
  };

  auto* phantom = app.add_subcommand("phantom", "Generate a labeled synthetic PET volume corpus");
  flag(phantom, "--out", "io.out", "output directory");
  flag(phantom, "--per-class", "phantom.per_class", "volumes per class (one value or five comma-separated)");
  flag(phantom, "--seed", "phantom.seed", "corpus seed");
  flag(phantom, "--dims", "phantom.dims", "volume dims Z,Y,X");
  flag(phantom, "--voxel", "phantom.spacing", "voxel spacing in mm SZ,SY,SX");

  auto* prep = app.add_subcommand("preprocess", "Resample, normalize and project volumes to canvas images");
  flag(prep, "--in", "io.in", "volume corpus directory");
  flag(prep, "--out", "io.out", "output directory");
  flag(prep, "--suv-max", "pipeline.suv_max", "SUV mapped to 1");
  flag(prep, "--spacing", "pipeline.spacing", "isotropic target spacing in mm");
  flag(prep, "--axis", "pipeline.axis", "projection axis (y or x)");
  flag(prep, "--canvas", "pipeline.canvas", "canvas H,W");

  auto* tr = app.add_subcommand("train", "Train the conditional GAN");
  flag(tr, "--data", "io.data", "preprocessed image corpus");
  flag(tr, "--out", "io.out", "run directory");
  flag(tr, "--epochs", "train.epochs", "epochs");
  flag(tr, "--lr", "train.lr", "Adam learning rate");
  flag(tr, "--beta1", "train.beta1", "Adam beta1");
  flag(tr, "--batch", "train.batch_size", "batch size");
  flag(tr, "--seed", "train.seed", "training seed");
  flag(tr, "--stages", "model.stages", "generator upsampling stages (3..5)");
  flag(tr, "--checkpoint-every", "train.checkpoint_every", "epochs between checkpoints");

  auto* gen = app.add_subcommand("generate", "Sample images of one class from a checkpoint");
  flag(gen, "--ckpt", "io.ckpt", "checkpoint directory");
  flag(gen, "--class", "generate.class", "class name");
  flag(gen, "--count", "generate.count", "number of images");
  flag(gen, "--seed", "generate.seed", "sampling seed");
  flag(gen, "--out", "io.out", "output directory");

  auto* wk = app.add_subcommand("walk", "Walk the latent or label space and score the trajectory");
  flag(wk, "--ckpt", "io.ckpt", "checkpoint directory");
  flag(wk, "--mode", "walk.mode", "first-coord, lerp or label-lerp");
  flag(wk, "--steps", "walk.steps", "number of steps (>= 2)");
  flag(wk, "--out", "io.out", "output directory");
  flag(wk, "--from-class", "walk.from_class", "start class");
  flag(wk, "--to-class", "walk.to_class", "end class (label-lerp)");
  flag(wk, "--seed", "walk.seed", "seed for lerp endpoints");
  flag(wk, "--a", "walk.a", "first-coordinate start");
  flag(wk, "--b", "walk.b", "first-coordinate end");
  flag(wk, "--data", "io.data", "reference corpus (default: the training corpus)");

  auto* ev = app.add_subcommand("evaluate", "Score conditioning accuracy, memorization and realism");
  flag(ev, "--ckpt", "io.ckpt", "checkpoint directory");
  flag(ev, "--data", "io.data", "reference corpus (default: the training corpus)");
  flag(ev, "--out", "io.out", "report CSV path");
  flag(ev, "--per-class", "evaluate.per_class", "samples per class");
  flag(ev, "--seed", "evaluate.seed", "sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunConfig cfg;
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (phantom->parsed()) cmd_phantom(cfg);
    else if (prep->parsed()) cmd_preprocess(cfg);
    else if (tr->parsed()) cmd_train(cfg);
    else if (gen->parsed()) cmd_generate(cfg);
    else if (wk->parsed()) cmd_walk(cfg);
    else if (ev->parsed()) cmd_evaluate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
