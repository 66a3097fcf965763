#ifndef RADIOGAN_RUN_CONFIG_HPP_
#define RADIOGAN_RUN_CONFIG_HPP_

#include "radiogan/latent_walk.hpp"
#include "radiogan/model.hpp"
#include "radiogan/phantom.hpp"
#include "radiogan/pipeline.hpp"
#include "radiogan/training.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace radiogan {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// `key=value` lines; blank lines and `#` comments are skipped.
KeyValues parse_key_values(const std::string& text);
std::string format_key_values(const KeyValues& kv);

KeyValues model_config_values(const ModelConfig& cfg);
KeyValues train_config_values(const TrainConfig& cfg);

/// Builds a config from `model.*` / `train.*` keys on top of the defaults; throws on unknown
/// or malformed keys. `model.stages` resets the channel plan before other model keys apply.
ModelConfig model_config_from(const KeyValues& kv);
TrainConfig train_config_from(const KeyValues& kv);

/// Flat configuration for every command. Values come from an optional file, then flag
/// overrides; unknown keys are rejected and the resolved set is echoed next to outputs.
class RunConfig {
 public:
  RunConfig();

  void load_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;

  PhantomSpec phantom() const;
  PipelineConfig pipeline() const;
  ModelConfig model() const;
  TrainConfig train() const;
  WalkSpec walk() const;

  /// Every key with its resolved value, sorted.
  KeyValues resolved() const;
  void write(const std::filesystem::path& path) const;

  static const std::vector<std::string>& known_keys();

 private:
  std::map<std::string, std::string> values_;
};

// Parsing helpers shared with the CLI.
double parse_double(const std::string& key, const std::string& value);
long long parse_int(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
std::vector<double> parse_double_list(const std::string& key, const std::string& value);
std::vector<long long> parse_int_list(const std::string& key, const std::string& value);
ClassLabel parse_class(const std::string& value);
Axis parse_axis(const std::string& value);
WalkMode parse_walk_mode(const std::string& value);
std::string walk_mode_name(WalkMode mode);

}  // namespace radiogan

#endif  // RADIOGAN_RUN_CONFIG_HPP_
