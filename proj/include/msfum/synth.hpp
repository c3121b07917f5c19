#pragma once

#include <cstdint>
#include <string>

#include "msfum/dataset_io.hpp"
#include "msfum/train.hpp"

namespace msfum {

// Piecewise-constant depth scenes (random rectangles and ellipses) with RGB
// renderings whose color edges coincide with the depth edges, plus smooth
// texture that is uncorrelated with depth. Depth values are integral so the
// on-disk corpus round-trips exactly.
struct SynthConfig {
    int64_t count = 250;
    int64_t size = 64;  // HR side
    uint64_t seed = 7;
    double train_fraction = 0.8;
};

Sample make_synth_sample(int64_t size, Rng& rng, const std::string& id);

Dataset make_synth_dataset(const SynthConfig& cfg);

// Writes depth_NNNN.pgm / rgb_NNNN.ppm plus manifest.tsv into dir; the
// first train_fraction of entries carry the "train" split tag.
Manifest write_synth_corpus(const SynthConfig& cfg, const std::string& dir);

}  // namespace msfum
