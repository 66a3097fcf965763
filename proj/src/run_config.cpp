#include "radiogan/run_config.hpp"

#include "radiogan/io.hpp"
#include "radiogan/random.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace radiogan {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename V>
std::string join(const std::vector<V>& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ',';
    if constexpr (std::is_floating_point_v<V>) {
      out += fmt_double(v);
    } else {
      out += std::to_string(v);
    }
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(trim(cur));
  return parts;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw std::invalid_argument("bad value for " + key + ": '" + value + "' (expected " + expected + ")");
}

std::vector<int> to_ints(const std::vector<long long>& v) { return {v.begin(), v.end()}; }

}  // namespace

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value, "a number");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, value, "a number");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) bad_value(key, value, "an integer");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, value, "an integer");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    if (!value.empty() && value[0] == '-') bad_value(key, value, "a non-negative integer");
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) bad_value(key, value, "a non-negative integer");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, value, "a non-negative integer");
  }
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& part : split(value, ',')) out.push_back(parse_double(key, part));
  if (out.empty()) bad_value(key, value, "a comma-separated list");
  return out;
}

std::vector<long long> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<long long> out;
  for (const auto& part : split(value, ',')) out.push_back(parse_int(key, part));
  if (out.empty()) bad_value(key, value, "a comma-separated list");
  return out;
}

ClassLabel parse_class(const std::string& value) {
  if (auto label = parse_class_name(value)) return *label;
  throw std::invalid_argument("unknown class '" + value + "' (valid: " + class_name_list() + ")");
}

Axis parse_axis(const std::string& value) {
  if (value == "y") return Axis::y;
  if (value == "x") return Axis::x;
  throw std::invalid_argument("projection axis must be y or x, got '" + value + "'");
}

WalkMode parse_walk_mode(const std::string& value) {
  if (value == "first-coord") return WalkMode::first_coord;
  if (value == "lerp") return WalkMode::lerp;
  if (value == "label-lerp") return WalkMode::label_lerp;
  throw std::invalid_argument("walk mode must be first-coord, lerp or label-lerp, got '" + value + "'");
}

std::string walk_mode_name(WalkMode mode) {
  switch (mode) {
    case WalkMode::first_coord: return "first-coord";
    case WalkMode::lerp: return "lerp";
    case WalkMode::label_lerp: return "label-lerp";
  }
  return "first-coord";
}

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(number) + ": expected key=value");
    }
    kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return kv;
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

KeyValues model_config_values(const ModelConfig& cfg) {
  return {
      {"model.latent_dim", std::to_string(cfg.latent_dim)},
      {"model.embed_dim", std::to_string(cfg.embed_dim)},
      {"model.seed_map", std::to_string(cfg.seed_height) + "," + std::to_string(cfg.seed_width)},
      {"model.stages", std::to_string(cfg.upsample_stages)},
      {"model.seed_channels", std::to_string(cfg.seed_channels)},
      {"model.gen_channels", join(cfg.gen_channels)},
      {"model.disc_layers", std::to_string(cfg.disc_layers)},
      {"model.disc_kernel", std::to_string(cfg.disc_kernel)},
      {"model.disc_stride", std::to_string(cfg.disc_stride)},
      {"model.disc_channels", join(cfg.disc_channels)},
      {"model.leaky_slope", fmt_double(cfg.leaky_slope)},
      {"model.dropout_rate", fmt_double(cfg.dropout_rate)},
      {"model.bn_momentum", fmt_double(cfg.bn_momentum)},
      {"model.bn_epsilon", fmt_double(cfg.bn_epsilon)},
  };
}

KeyValues train_config_values(const TrainConfig& cfg) {
  return {
      {"train.epochs", std::to_string(cfg.epochs)},
      {"train.lr", fmt_double(cfg.lr)},
      {"train.beta1", fmt_double(cfg.beta1)},
      {"train.beta2", fmt_double(cfg.beta2)},
      {"train.batch_size", std::to_string(cfg.batch_size)},
      {"train.seed", std::to_string(cfg.rng_seed)},
      {"train.checkpoint_every", std::to_string(cfg.checkpoint_every)},
      {"train.label_source", cfg.label_source},
  };
}

ModelConfig model_config_from(const KeyValues& kv) {
  ModelConfig cfg;
  for (const auto& [k, v] : kv) {
    if (k != "model.stages") continue;
    // Preset channel plans exist for 3..5 stages; other counts need explicit channel lists.
    const auto stages = static_cast<int>(parse_int(k, v));
    if (stages >= 3 && stages <= 5) cfg = model_config_for_stages(stages);
    else cfg.upsample_stages = stages;
  }
  for (const auto& [k, v] : kv) {
    if (k.rfind("model.", 0) != 0 || k == "model.stages") continue;
    if (k == "model.latent_dim") cfg.latent_dim = static_cast<int>(parse_int(k, v));
    else if (k == "model.embed_dim") cfg.embed_dim = static_cast<int>(parse_int(k, v));
    else if (k == "model.seed_map") {
      const auto m = parse_int_list(k, v);
      if (m.size() != 2) bad_value(k, v, "H,W");
      cfg.seed_height = m[0];
      cfg.seed_width = m[1];
    } else if (k == "model.seed_channels") cfg.seed_channels = static_cast<int>(parse_int(k, v));
    else if (k == "model.gen_channels") cfg.gen_channels = to_ints(parse_int_list(k, v));
    else if (k == "model.disc_layers") cfg.disc_layers = static_cast<int>(parse_int(k, v));
    else if (k == "model.disc_kernel") cfg.disc_kernel = static_cast<int>(parse_int(k, v));
    else if (k == "model.disc_stride") cfg.disc_stride = static_cast<int>(parse_int(k, v));
    else if (k == "model.disc_channels") cfg.disc_channels = to_ints(parse_int_list(k, v));
    else if (k == "model.leaky_slope") cfg.leaky_slope = parse_double(k, v);
    else if (k == "model.dropout_rate") cfg.dropout_rate = parse_double(k, v);
    else if (k == "model.bn_momentum") cfg.bn_momentum = parse_double(k, v);
    else if (k == "model.bn_epsilon") cfg.bn_epsilon = parse_double(k, v);
    else throw std::invalid_argument("unknown key " + k);
  }
  validate(cfg);
  return cfg;
}

TrainConfig train_config_from(const KeyValues& kv) {
  TrainConfig cfg;
  for (const auto& [k, v] : kv) {
    if (k.rfind("train.", 0) != 0) continue;
    if (k == "train.epochs") cfg.epochs = static_cast<int>(parse_int(k, v));
    else if (k == "train.lr") cfg.lr = parse_double(k, v);
    else if (k == "train.beta1") cfg.beta1 = parse_double(k, v);
    else if (k == "train.beta2") cfg.beta2 = parse_double(k, v);
    else if (k == "train.batch_size") cfg.batch_size = static_cast<int>(parse_int(k, v));
    else if (k == "train.seed") cfg.rng_seed = parse_u64(k, v);
    else if (k == "train.checkpoint_every") cfg.checkpoint_every = static_cast<int>(parse_int(k, v));
    else if (k == "train.label_source") cfg.label_source = v;
    else throw std::invalid_argument("unknown key " + k);
  }
  validate(cfg);
  return cfg;
}

// ---------------------------------------------------------------------------

namespace {

const KeyValues& defaults() {
  static const KeyValues kv = [] {
    KeyValues d = {
        {"phantom.dims", "64,48,48"},
        {"phantom.spacing", "4,4,4"},
        {"phantom.per_class", "2"},
        {"phantom.seed", "0"},
        {"pipeline.spacing", "2"},
        {"pipeline.suv_max", "30"},
        {"pipeline.axis", "y"},
        {"pipeline.canvas", "160,96"},
        {"walk.mode", "first-coord"},
        {"walk.steps", "10"},
        {"walk.a", "1"},
        {"walk.b", "10"},
        {"walk.from_class", "normal"},
        {"walk.to_class", "normal"},
        {"walk.seed", "0"},
        {"generate.class", "normal"},
        {"generate.count", "1"},
        {"generate.seed", "0"},
        {"evaluate.per_class", "50"},
        {"evaluate.seed", "0"},
        {"io.in", ""},
        {"io.out", ""},
        {"io.data", ""},
        {"io.ckpt", ""},
    };
    for (auto& e : model_config_values(ModelConfig{})) d.push_back(e);
    for (auto& e : train_config_values(TrainConfig{})) d.push_back(e);
    return d;
  }();
  return kv;
}

}  // namespace

RunConfig::RunConfig() = default;

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& e : defaults()) k.push_back(e.first);
    std::sort(k.begin(), k.end());
    return k;
  }();
  return keys;
}

void RunConfig::load_file(const std::filesystem::path& path) {
  for (const auto& [k, v] : parse_key_values(io::read_file(path))) set(k, v);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& keys = known_keys();
  if (!std::binary_search(keys.begin(), keys.end(), key)) {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
  values_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& RunConfig::get(const std::string& key) const {
  if (auto it = values_.find(key); it != values_.end()) return it->second;
  for (const auto& e : defaults()) {
    if (e.first == key) return e.second;
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

PhantomSpec RunConfig::phantom() const {
  PhantomSpec spec;
  const auto dims = parse_int_list("phantom.dims", get("phantom.dims"));
  if (dims.size() != 3) bad_value("phantom.dims", get("phantom.dims"), "Z,Y,X");
  spec.dims = {dims[0], dims[1], dims[2]};
  const auto sp = parse_double_list("phantom.spacing", get("phantom.spacing"));
  if (sp.size() != 3) bad_value("phantom.spacing", get("phantom.spacing"), "SZ,SY,SX");
  spec.spacing = {sp[0], sp[1], sp[2]};
  const auto counts = parse_int_list("phantom.per_class", get("phantom.per_class"));
  if (counts.size() == 1) {
    spec.per_class_count.fill(static_cast<int>(counts[0]));
  } else if (counts.size() == kNumClasses) {
    for (int c = 0; c < kNumClasses; ++c) spec.per_class_count[c] = static_cast<int>(counts[c]);
  } else {
    bad_value("phantom.per_class", get("phantom.per_class"), "N or five counts");
  }
  spec.rng_seed = parse_u64("phantom.seed", get("phantom.seed"));
  validate(spec);
  return spec;
}

PipelineConfig RunConfig::pipeline() const {
  PipelineConfig cfg;
  cfg.target_spacing_mm = parse_double("pipeline.spacing", get("pipeline.spacing"));
  cfg.suv_max = parse_double("pipeline.suv_max", get("pipeline.suv_max"));
  cfg.projection_axis = parse_axis(get("pipeline.axis"));
  const auto canvas = parse_int_list("pipeline.canvas", get("pipeline.canvas"));
  if (canvas.size() != 2) bad_value("pipeline.canvas", get("pipeline.canvas"), "H,W");
  cfg.canvas_height = canvas[0];
  cfg.canvas_width = canvas[1];
  validate(cfg);
  return cfg;
}

ModelConfig RunConfig::model() const {
  KeyValues kv;
  for (const auto& [k, v] : values_) {
    if (k.rfind("model.", 0) == 0) kv.emplace_back(k, v);
  }
  return model_config_from(kv);
}

TrainConfig RunConfig::train() const {
  KeyValues kv;
  for (const auto& [k, v] : values_) {
    if (k.rfind("train.", 0) == 0) kv.emplace_back(k, v);
  }
  return train_config_from(kv);
}

WalkSpec RunConfig::walk() const {
  WalkSpec spec;
  spec.mode = parse_walk_mode(get("walk.mode"));
  spec.steps = static_cast<int>(parse_int("walk.steps", get("walk.steps")));
  if (spec.steps < 2) throw std::invalid_argument("walk.steps must be >= 2");
  spec.a = parse_double("walk.a", get("walk.a"));
  spec.b = parse_double("walk.b", get("walk.b"));
  spec.label_start = parse_class(get("walk.from_class"));
  spec.label_end = parse_class(get("walk.to_class"));
  const int latent = model().latent_dim;
  const std::uint64_t seed = parse_u64("walk.seed", get("walk.seed"));
  Rng start_rng(derive_seed(seed, 0x57A27));
  spec.z_start = LatentSeed<float>(latent);
  for (Index n = 0; n < latent; ++n) spec.z_start[n] = draw_normal<float>(start_rng);
  if (spec.mode == WalkMode::label_lerp) {
    spec.z_end = spec.z_start;  // condition-only walk
  } else {
    Rng end_rng(derive_seed(seed, 0xE4D));
    spec.z_end = LatentSeed<float>(latent);
    for (Index n = 0; n < latent; ++n) spec.z_end[n] = draw_normal<float>(end_rng);
  }
  return spec;
}

KeyValues RunConfig::resolved() const {
  // Model and train sections are re-derived so the echo reflects stage-dependent defaults.
  const ModelConfig m = model();
  const TrainConfig t = train();
  KeyValues out;
  for (const auto& e : model_config_values(m)) out.push_back(e);
  for (const auto& e : train_config_values(t)) out.push_back(e);
  for (const auto& key : known_keys()) {
    if (key.rfind("model.", 0) == 0 || key.rfind("train.", 0) == 0) continue;
    out.emplace_back(key, get(key));
  }
  std::sort(out.begin(), out.end());
  return out;
}

void RunConfig::write(const std::filesystem::path& path) const {
  io::write_file_atomic(path, format_key_values(resolved()));
}

}  // namespace radiogan
