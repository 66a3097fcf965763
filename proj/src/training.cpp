#include "radiogan/training.hpp"

#include "radiogan/io.hpp"
#include "radiogan/run_config.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

namespace radiogan {

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(cfg.lr > 0)) throw std::invalid_argument("learning rate must be positive");
  if (!(cfg.beta1 >= 0 && cfg.beta1 < 1)) throw std::invalid_argument("beta1 must be in [0, 1)");
  if (!(cfg.beta2 >= 0 && cfg.beta2 < 1)) throw std::invalid_argument("beta2 must be in [0, 1)");
  if (cfg.batch_size < 2) throw std::invalid_argument("batch size must be >= 2");
  if (cfg.checkpoint_every < 1) throw std::invalid_argument("checkpoint_every must be >= 1");
}

std::string history_csv(const TrainHistory& history) {
  std::string out = "epoch,d_loss_real,d_loss_fake,g_loss,d_acc\n";
  char line[256];
  for (const auto& row : history) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,%.9g\n", row.epoch, row.metrics.d_loss_real,
                  row.metrics.d_loss_fake, row.metrics.g_loss, row.metrics.d_accuracy);
    out += line;
  }
  return out;
}

void write_history_csv(const std::filesystem::path& path, const TrainHistory& history) {
  io::write_file_atomic(path, history_csv(history));
}

ModelCheckpoint start_training(const ModelConfig& model_cfg, const TrainConfig& train_cfg) {
  validate(train_cfg);
  ModelCheckpoint state{init_params<float>(model_cfg, derive_seed(train_cfg.rng_seed, 0x1)),
                        {},
                        {},
                        train_cfg,
                        0,
                        Rng(derive_seed(train_cfg.rng_seed, 0x2))};
  state.g_opt = make_adam_state(state.model.generator.params);
  state.d_opt = make_adam_state(state.model.discriminator.params);
  return state;
}

void validate(const Dataset& data, const ModelConfig& cfg) {
  if (data.images.empty()) throw std::invalid_argument("training corpus is empty");
  if (data.images.size() != data.labels.size()) throw std::invalid_argument("image/label count mismatch");
  std::array<int, kNumClasses> seen{};
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto& img = data.images[n];
    if (img.rows() != cfg.canvas_height() || img.cols() != cfg.canvas_width()) {
      throw std::invalid_argument("image " + std::to_string(n) + " is " + std::to_string(img.rows()) + "x" +
                                  std::to_string(img.cols()) + ", model canvas is " +
                                  std::to_string(cfg.canvas_height()) + "x" + std::to_string(cfg.canvas_width()));
    }
    ++seen[class_code(data.labels[n])];
  }
  for (ClassLabel label : kAllClasses) {
    if (seen[class_code(label)] == 0) {
      throw std::invalid_argument("training corpus has no images of class " + std::string(class_name(label)));
    }
  }
}

void train_epochs(ModelCheckpoint& state, const Dataset& data, int target_epoch, TrainHistory& history,
                  const std::function<void(const EpochEvent&)>& on_epoch) {
  validate(data, state.model.config);
  const AdamConfig adam = state.train.adam();
  const auto n = data.size();
  const auto batch = static_cast<std::size_t>(state.train.batch_size);
  std::vector<std::size_t> order(n);
  while (state.epoch < target_epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), state.rng);
    StepMetrics sum;
    int steps = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      std::vector<Image<float>> images;
      std::vector<ClassLabel> labels;
      for (std::size_t i = start; i < end; ++i) {
        images.push_back(pixel_scale(data.images[order[i]]));
        labels.push_back(data.labels[order[i]]);
      }
      const nn::FeatureBatch<float> real = images_to_batch<float>(images);
      const StepMetrics m = train_step(state.model, state.g_opt, state.d_opt, adam, real, labels, state.rng);
      sum.d_loss_real += m.d_loss_real;
      sum.d_loss_fake += m.d_loss_fake;
      sum.g_loss += m.g_loss;
      sum.d_accuracy += m.d_accuracy;
      ++steps;
    }
    ++state.epoch;
    const double inv = 1.0 / steps;
    history.push_back({state.epoch,
                       {sum.d_loss_real * inv, sum.d_loss_fake * inv, sum.g_loss * inv, sum.d_accuracy * inv}});
    if (on_epoch) on_epoch({state.epoch, &state, &history});
  }
}

TrainResult train(const Dataset& data, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const std::optional<std::filesystem::path>& out_dir) {
  validate(data, model_cfg);
  TrainResult result{start_training(model_cfg, train_cfg), {}};
  if (out_dir) std::filesystem::create_directories(*out_dir);
  train_epochs(result.checkpoint, data, train_cfg.epochs, result.history, [&](const EpochEvent& e) {
    if (!out_dir) return;
    write_history_csv(*out_dir / "history.csv", *e.history);
    if (e.epoch % train_cfg.checkpoint_every == 0 || e.epoch == train_cfg.epochs) {
      save_checkpoint(*e.state, *out_dir / "checkpoint");
    }
  });
  return result;
}

// --- checkpoint files ---------------------------------------------------------------

namespace {

constexpr const char* kTensorMagic = "RGTENSOR1\n";

struct TensorBlobWriter {
  std::string bytes = kTensorMagic;
  std::uint32_t count = 0;
  std::string body;

  template <typename M>
  void add(const std::string& name, const M& t) {
    ++count;
    io::append_le32(body, static_cast<std::uint32_t>(name.size()));
    body += name;
    io::append_le64(body, static_cast<std::uint64_t>(t.rows()));
    io::append_le64(body, static_cast<std::uint64_t>(t.cols()));
    for (Index n = 0; n < t.size(); ++n) io::append_le32(body, std::bit_cast<std::uint32_t>(t.data()[n]));
  }

  std::string finish() const {
    std::string out = bytes;
    io::append_le32(out, count);
    return out + body;
  }
};

struct StoredTensor {
  Index rows = 0, cols = 0;
  std::vector<float> values;
};

std::map<std::string, StoredTensor> read_tensor_blob(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  const std::string magic = kTensorMagic;
  auto fail = [&](const std::string& why) { throw std::runtime_error(path.string() + ": " + why); };
  if (bytes.compare(0, magic.size(), magic) != 0) fail("unsupported tensor blob version");
  std::size_t pos = magic.size();
  auto need = [&](std::size_t k) {
    if (bytes.size() - pos < k) fail("truncated");
  };
  need(4);
  const std::uint32_t count = io::load_le32(bytes.data() + pos);
  pos += 4;
  std::map<std::string, StoredTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    need(4);
    const std::uint32_t len = io::load_le32(bytes.data() + pos);
    pos += 4;
    need(len + 16);
    std::string name = bytes.substr(pos, len);
    pos += len;
    StoredTensor t;
    t.rows = static_cast<Index>(io::load_le64(bytes.data() + pos));
    t.cols = static_cast<Index>(io::load_le64(bytes.data() + pos + 8));
    pos += 16;
    const auto size = static_cast<std::size_t>(t.rows * t.cols);
    need(4 * size);
    t.values.resize(size);
    for (std::size_t n = 0; n < size; ++n) t.values[n] = std::bit_cast<float>(io::load_le32(bytes.data() + pos + 4 * n));
    pos += 4 * size;
    out.emplace(std::move(name), std::move(t));
  }
  if (pos != bytes.size()) fail("trailing bytes");
  return out;
}

template <typename P>
void add_all(TensorBlobWriter& w, const std::string& prefix, const P& params) {
  params.for_each([&](const std::string& name, const auto& t, TensorKind) { w.add(prefix + name, t); });
}

template <typename P>
void load_all(const std::map<std::string, StoredTensor>& blob, const std::string& prefix, P& params,
              const std::filesystem::path& path) {
  params.for_each([&](const std::string& name, auto& t, TensorKind) {
    auto it = blob.find(prefix + name);
    if (it == blob.end()) throw std::runtime_error(path.string() + ": missing tensor " + prefix + name);
    if (it->second.rows != t.rows() || it->second.cols != t.cols()) {
      throw std::runtime_error(path.string() + ": tensor " + prefix + name + " has shape " +
                               std::to_string(it->second.rows) + "x" + std::to_string(it->second.cols) +
                               ", config expects " + std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
    }
    std::copy(it->second.values.begin(), it->second.values.end(), t.data());
  });
}

void add_adam(TensorBlobWriter& w, const std::string& prefix, const AdamState<float>& s) {
  for (std::size_t i = 0; i < s.m.size(); ++i) {
    w.add(prefix + "m." + std::to_string(i), s.m[i]);
    w.add(prefix + "v." + std::to_string(i), s.v[i]);
  }
}

void load_adam(const std::map<std::string, StoredTensor>& blob, const std::string& prefix, AdamState<float>& s,
               const std::filesystem::path& path) {
  for (std::size_t i = 0; i < s.m.size(); ++i) {
    for (auto* vec : {&s.m[i], &s.v[i]}) {
      const std::string name = prefix + (vec == &s.m[i] ? "m." : "v.") + std::to_string(i);
      auto it = blob.find(name);
      if (it == blob.end() || it->second.rows != vec->size() || it->second.cols != 1) {
        throw std::runtime_error(path.string() + ": optimizer tensor " + name + " missing or misshapen");
      }
      *vec = Eigen::Map<const Vector<float>>(it->second.values.data(), vec->size());
    }
  }
}

std::string canvas_string(const ModelConfig& cfg) {
  return std::to_string(cfg.canvas_height()) + "x" + std::to_string(cfg.canvas_width());
}

}  // namespace

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::path tmp = dir;
  tmp += ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  KeyValues meta = {{"schema", kCheckpointSchema},
                    {"classes", class_ordering()},
                    {"canvas", canvas_string(ckpt.model.config)},
                    {"epoch", std::to_string(ckpt.epoch)},
                    {"init_seed", std::to_string(ckpt.model.init_seed)},
                    {"generator_steps", std::to_string(ckpt.g_opt.step)},
                    {"discriminator_steps", std::to_string(ckpt.d_opt.step)},
                    {"param_format", "RGTENSOR1 f32le"}};
  for (auto& e : model_config_values(ckpt.model.config)) meta.push_back(e);
  for (auto& e : train_config_values(ckpt.train)) meta.push_back(e);
  io::write_file_atomic(tmp / "meta", format_key_values(meta));

  TensorBlobWriter gen;
  add_all(gen, "", ckpt.model.generator.params);
  add_all(gen, "stats.", ckpt.model.generator.stats);
  io::write_file_atomic(tmp / "generator.bin", gen.finish());

  TensorBlobWriter disc;
  add_all(disc, "", ckpt.model.discriminator.params);
  add_all(disc, "stats.", ckpt.model.discriminator.stats);
  io::write_file_atomic(tmp / "discriminator.bin", disc.finish());

  TensorBlobWriter opt;
  add_adam(opt, "generator.", ckpt.g_opt);
  add_adam(opt, "discriminator.", ckpt.d_opt);
  io::write_file_atomic(tmp / "optimizer.bin", opt.finish());

  std::ostringstream rng;
  rng << ckpt.rng;
  io::write_file_atomic(tmp / "rng.txt", rng.str() + "\n");

  fs::path old = dir;
  old += ".old";
  fs::remove_all(old);
  if (fs::exists(dir)) fs::rename(dir, old);
  fs::rename(tmp, dir);
  fs::remove_all(old);
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto meta_path = dir / "meta";
  if (!std::filesystem::exists(meta_path)) throw std::runtime_error("no checkpoint at " + dir.string());
  const KeyValues meta = parse_key_values(io::read_file(meta_path));
  std::map<std::string, std::string> m(meta.begin(), meta.end());
  auto field = [&](const std::string& key) -> const std::string& {
    auto it = m.find(key);
    if (it == m.end()) throw std::runtime_error(meta_path.string() + ": missing " + key);
    return it->second;
  };
  if (field("schema") != kCheckpointSchema) {
    throw std::runtime_error("checkpoint schema '" + field("schema") + "' is not supported (expected " +
                             kCheckpointSchema + ")");
  }
  if (field("classes") != class_ordering()) {
    throw std::runtime_error("checkpoint class ordering '" + field("classes") + "' does not match " +
                             class_ordering());
  }
  KeyValues model_kv, train_kv;
  for (const auto& [k, v] : meta) {
    if (k.rfind("model.", 0) == 0) model_kv.emplace_back(k, v);
    if (k.rfind("train.", 0) == 0) train_kv.emplace_back(k, v);
  }
  const ModelConfig model_cfg = model_config_from(model_kv);
  if (field("canvas") != canvas_string(model_cfg)) {
    throw std::runtime_error("checkpoint canvas " + field("canvas") + " disagrees with its model config");
  }

  ModelCheckpoint ckpt;
  ckpt.train = train_config_from(train_kv);
  ckpt.model = {model_cfg, make_generator<float>(model_cfg), make_discriminator<float>(model_cfg),
                parse_u64("init_seed", field("init_seed"))};
  ckpt.epoch = static_cast<int>(parse_int("epoch", field("epoch")));

  const auto gen_path = dir / "generator.bin", disc_path = dir / "discriminator.bin";
  const auto gen = read_tensor_blob(gen_path);
  load_all(gen, "", ckpt.model.generator.params, gen_path);
  load_all(gen, "stats.", ckpt.model.generator.stats, gen_path);
  const auto disc = read_tensor_blob(disc_path);
  load_all(disc, "", ckpt.model.discriminator.params, disc_path);
  load_all(disc, "stats.", ckpt.model.discriminator.stats, disc_path);

  ckpt.g_opt = make_adam_state(ckpt.model.generator.params);
  ckpt.d_opt = make_adam_state(ckpt.model.discriminator.params);
  const auto opt_path = dir / "optimizer.bin";
  const auto opt = read_tensor_blob(opt_path);
  load_adam(opt, "generator.", ckpt.g_opt, opt_path);
  load_adam(opt, "discriminator.", ckpt.d_opt, opt_path);
  ckpt.g_opt.step = parse_int("generator_steps", field("generator_steps"));
  ckpt.d_opt.step = parse_int("discriminator_steps", field("discriminator_steps"));

  std::istringstream rng(io::read_file(dir / "rng.txt"));
  rng >> ckpt.rng;
  if (!rng) throw std::runtime_error("bad rng state in " + (dir / "rng.txt").string());
  return ckpt;
}

}  // namespace radiogan
