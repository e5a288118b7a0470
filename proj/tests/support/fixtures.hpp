#pragma once

// Small shared fixtures: desk-sized model configs and a normalized sketch set.

#include <vector>

#include "strokeforge/refiner.hpp"
#include "strokeforge/sketch_vae.hpp"
#include "strokeforge/synthetic.hpp"

namespace sf_test {

using namespace strokeforge;

inline VaeConfig desk_vae(int max_seq_len = 48) {
  VaeConfig c;
  c.mixtures = 5;
  c.latent = 16;
  c.enc_hidden = 32;
  c.dec_hidden = 64;
  c.max_seq_len = max_seq_len;
  return c;
}

inline Normalized cat_set(int count, std::uint64_t seed) {
  return normalize_offsets(parse_ndjson_text(cat_ndjson(count, seed)).sequences);
}

}  // namespace sf_test
