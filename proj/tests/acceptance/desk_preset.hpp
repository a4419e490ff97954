#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "topgan/classify.hpp"
#include "topgan/crossval.hpp"
#include "topgan/gan.hpp"
#include "topgan/synthdata.hpp"

// Desk-scale settings for the trend and GAN checks. The class textures are
// closer than the defaults so the plain CNN does not saturate at ten
// images per class.
namespace topgan::desk {

inline constexpr int kPretrainImages = 500;
inline constexpr std::uint64_t kPretrainSeed = 1;
inline constexpr std::size_t kTrainSize = 10;
inline constexpr std::array<std::uint64_t, 3> kTrendSeeds{1, 2, 3};

inline std::vector<synth::PhantomClassSpec> class_specs() {
  auto specs = synth::default_class_specs();
  specs[0].texture_frequency = 0.06;
  specs[1].texture_frequency = 0.075;
  for (auto& s : specs) s.texture_frequency_jitter = 0.01;
  return specs;
}

inline eval::EncodeConfig encoding() {
  eval::EncodeConfig enc;
  enc.size = 64;
  enc.opd_max_nm = 250.0;
  return enc;
}

inline gan::ArchConfig arch() {
  gan::ArchConfig a;
  a.image_size = 64;
  a.base_channels = 8;
  return a;
}

inline gan::GanTrainConfig gan_config() {
  gan::GanTrainConfig g;
  g.arch = arch();
  g.epochs = 24;
  g.seed = kPretrainSeed;
  return g;
}

inline clf::ClfTrainConfig classifier_config() {
  clf::ClfTrainConfig t;
  t.max_epochs = 900;
  return t;
}

}  // namespace topgan::desk
