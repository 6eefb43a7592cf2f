#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "admix/tensor.hpp"

namespace admix {

// In-memory form of the ADMD dataset file.
struct Dataset {
    int channels = 3;
    int height = 32;
    int width = 32;
    std::vector<Tensor> images;  // each {C,H,W}, values in [0,1]
    std::vector<int> labels;

    size_t size() const { return images.size(); }
};

// File layout, little-endian: magic "ADMD", version u32=1, count u32,
// channels u32, height u32, width u32, then per record: label u32,
// pixels f32 x (C*H*W).
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// Procedurally rendered shape/color classes, balanced and deterministic
// from the seed. Emits classes*per_class records interleaved by class.
Dataset generate_synthetic_dataset(int classes, int per_class, int size, uint64_t seed);

}  // namespace admix
