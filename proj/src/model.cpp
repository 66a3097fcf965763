#include "radiogan/model.hpp"

namespace radiogan {

void validate(const ModelConfig& cfg) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid model config: ") + what);
  };
  require(cfg.latent_dim >= 1, "latent_dim >= 1");
  require(cfg.embed_dim >= 1, "embed_dim >= 1");
  require(cfg.seed_height >= 1 && cfg.seed_width >= 1, "seed map must be non-empty");
  require(cfg.upsample_stages >= 1 && cfg.upsample_stages <= 8, "upsample_stages in 1..8");
  require(cfg.seed_channels >= 1, "seed_channels >= 1");
  require(static_cast<int>(cfg.gen_channels.size()) == cfg.upsample_stages,
          "one generator channel count per upsampling stage");
  require(cfg.disc_layers >= 2, "disc_layers >= 2");
  require(static_cast<int>(cfg.disc_channels.size()) == cfg.disc_layers,
          "one discriminator channel count per layer");
  for (int c : cfg.gen_channels) require(c >= 1, "generator channels >= 1");
  for (int c : cfg.disc_channels) require(c >= 1, "discriminator channels >= 1");
  require(cfg.disc_kernel >= 1 && cfg.disc_kernel % 2 == 1, "disc_kernel must be odd");
  require(cfg.disc_stride >= 1, "disc_stride >= 1");
  require(cfg.leaky_slope >= 0, "leaky_slope >= 0");
  require(cfg.dropout_rate >= 0 && cfg.dropout_rate < 1, "dropout_rate in [0, 1)");
  require(cfg.bn_momentum >= 0 && cfg.bn_momentum < 1, "bn_momentum in [0, 1)");
  require(cfg.bn_epsilon > 0, "bn_epsilon > 0");
}

ModelConfig model_config_for_stages(int stages) {
  if (stages < 3 || stages > 5) throw std::invalid_argument("stages must be 3, 4 or 5");
  ModelConfig cfg;
  cfg.upsample_stages = stages;
  cfg.gen_channels.erase(cfg.gen_channels.begin(), cfg.gen_channels.end() - stages);
  cfg.seed_channels = cfg.gen_channels.front();
  return cfg;
}

std::vector<std::pair<Index, Index>> discriminator_spatial_trace(const ModelConfig& cfg) {
  const nn::ConvGeometry g = disc_geometry(cfg);
  std::vector<std::pair<Index, Index>> trace;
  Index h = cfg.canvas_height(), w = cfg.canvas_width();
  trace.emplace_back(h, w);
  for (int l = 0; l < cfg.disc_layers; ++l) {
    h = g.out(h);
    w = g.out(w);
    trace.emplace_back(h, w);
  }
  return trace;
}

}  // namespace radiogan
