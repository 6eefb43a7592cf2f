#include "admix/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "admix/rng.hpp"

namespace admix {

namespace {

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (is.gcount() != 4) throw TensorError(std::string("dataset truncated reading ") + what);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw TensorError("cannot open '" + path + "' for writing");
    os.write("ADMD", 4);
    put_u32(os, 1);
    put_u32(os, static_cast<uint32_t>(ds.images.size()));
    put_u32(os, static_cast<uint32_t>(ds.channels));
    put_u32(os, static_cast<uint32_t>(ds.height));
    put_u32(os, static_cast<uint32_t>(ds.width));
    for (size_t i = 0; i < ds.images.size(); ++i) {
        put_u32(os, static_cast<uint32_t>(ds.labels[i]));
        const Tensor& t = ds.images[i];
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!os) throw TensorError("write failed for '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw TensorError("cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, "ADMD", 4) != 0)
        throw TensorError("bad magic in dataset '" + path + "'");
    uint32_t version = get_u32(is, "version");
    if (version != 1) throw TensorError("unsupported dataset version " + std::to_string(version));
    uint32_t count = get_u32(is, "count");
    Dataset ds;
    ds.channels = static_cast<int>(get_u32(is, "channels"));
    ds.height = static_cast<int>(get_u32(is, "height"));
    ds.width = static_cast<int>(get_u32(is, "width"));
    int64_t pixels = static_cast<int64_t>(ds.channels) * ds.height * ds.width;
    for (uint32_t i = 0; i < count; ++i) {
        ds.labels.push_back(static_cast<int>(get_u32(is, "label")));
        Tensor t({ds.channels, ds.height, ds.width});
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(pixels * sizeof(float)));
        if (is.gcount() != static_cast<std::streamsize>(pixels * sizeof(float)))
            throw TensorError("dataset truncated in record " + std::to_string(i));
        ds.images.push_back(std::move(t));
    }
    return ds;
}

namespace {

struct Palette {
    float r, g, b;
};

constexpr Palette kPalette[10] = {
    {0.90f, 0.20f, 0.20f}, {0.20f, 0.90f, 0.20f}, {0.25f, 0.35f, 0.95f},
    {0.90f, 0.90f, 0.20f}, {0.90f, 0.30f, 0.90f}, {0.20f, 0.90f, 0.90f},
    {0.95f, 0.60f, 0.20f}, {0.92f, 0.92f, 0.92f}, {0.65f, 0.40f, 0.15f},
    {0.55f, 0.20f, 0.75f},
};

bool shape_hit(int cls, int x, int y, int cx, int cy, float r, int phase) {
    float dx = static_cast<float>(x - cx);
    float dy = static_cast<float>(y - cy);
    float ax = std::fabs(dx), ay = std::fabs(dy);
    switch (cls % 10) {
        case 0:  // filled circle
            return dx * dx + dy * dy <= r * r;
        case 1:  // filled square
            return ax <= r * 0.88f && ay <= r * 0.88f;
        case 2:  // upward triangle
            return dy >= -r && dy <= r && ax <= (dy + r) * 0.55f;
        case 3:  // plus
            return (ax <= r * 0.34f && ay <= r) || (ay <= r * 0.34f && ax <= r);
        case 4:  // ring
        {
            float d2 = dx * dx + dy * dy;
            return d2 <= r * r && d2 >= (0.55f * r) * (0.55f * r);
        }
        case 5:  // horizontal bars
            return ax <= r && ay <= r && ((y + phase) / 2) % 2 == 0;
        case 6:  // vertical bars
            return ax <= r && ay <= r && ((x + phase) / 2) % 2 == 0;
        case 7:  // diagonal stripes
            return ax <= r && ay <= r && ((x + y + phase) / 3) % 2 == 0;
        case 8:  // checkerboard
            return ax <= r && ay <= r && ((x / 3) + (y / 3) + phase) % 2 == 0;
        case 9:  // X cross
            return ax <= r && ay <= r && std::fabs(ax - ay) <= std::max(1.2f, r * 0.3f);
    }
    return false;
}

}  // namespace

Dataset generate_synthetic_dataset(int classes, int per_class, int size, uint64_t seed) {
    if (classes < 2) throw TensorError("need at least 2 classes");
    Dataset ds;
    ds.channels = 3;
    ds.height = size;
    ds.width = size;
    int total = classes * per_class;
    for (int idx = 0; idx < total; ++idx) {
        int cls = idx % classes;
        Rng rng = Rng::derive(seed, static_cast<uint64_t>(idx));

        // Color is a per-image nuisance (independent of the class); only the
        // low-contrast shape pattern carries the label.
        float base = rng.uniform(0.30f, 0.50f);
        const Palette& tint = kPalette[rng.next_below(10)];
        float tint_s = rng.uniform(0.0f, 0.10f);
        float off_r = tint_s * (tint.r - 0.5f);
        float off_g = tint_s * (tint.g - 0.5f);
        float off_b = tint_s * (tint.b - 0.5f);
        int cx = size / 2 + static_cast<int>(rng.next_below(7)) - 3;
        int cy = size / 2 + static_cast<int>(rng.next_below(7)) - 3;
        float r = rng.uniform(0.24f, 0.36f) * static_cast<float>(size);
        float contrast = rng.uniform(0.16f, 0.26f);
        int phase = static_cast<int>(rng.next_below(4));

        Tensor img({3, size, size});
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                float noise = rng.uniform(-0.03f, 0.03f);
                float lum = base + (shape_hit(cls, x, y, cx, cy, r, phase) ? contrast : 0.0f);
                img.at3(0, y, x) = std::clamp(lum + off_r + noise, 0.0f, 1.0f);
                img.at3(1, y, x) = std::clamp(lum + off_g + noise, 0.0f, 1.0f);
                img.at3(2, y, x) = std::clamp(lum + off_b + noise, 0.0f, 1.0f);
            }
        ds.images.push_back(std::move(img));
        ds.labels.push_back(cls);
    }
    return ds;
}

}  // namespace admix
