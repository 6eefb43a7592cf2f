#pragma once

#include <cstdint>

#include "admix/dataset.hpp"
#include "admix/model.hpp"

namespace admix {

struct TrainOptions {
    int epochs = 60;
    float lr = 0.08f;
    int batch = 16;
    uint64_t seed = 0;
};

// Plain SGD with a seed-derived shuffling order. Bit-deterministic for a
// fixed (spec, dataset, options). Uses records [first, first+count).
void train(Model& model, const Dataset& ds, const TrainOptions& opt, size_t first = 0,
           size_t count = SIZE_MAX);

// Fraction of records [first, first+count) predicted correctly.
float accuracy(const Model& model, const Dataset& ds, size_t first = 0, size_t count = SIZE_MAX);

}  // namespace admix
