#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "metafilter/binary_io.hpp"
#include "metafilter/geometry.hpp"
#include "metafilter/rng.hpp"
#include "metafilter/surrogate.hpp"
#include "metafilter/types.hpp"

namespace metafilter {

/// The original record plus its 90/180/270 degree rotations. Quarter turns
/// exchange the TE and TM halves; the half turn keeps the spectrum.
inline std::array<DeviceRecord, 4> augment(const DeviceRecord& rec) {
    std::array<DeviceRecord, 4> out{rec, rec, rec, rec};
    for (std::size_t k = 1; k < 4; ++k) {
        out[k].shape = rot90(out[k - 1].shape);
        out[k].spectrum = (k % 2) ? rec.spectrum.swapped() : rec.spectrum;
    }
    return out;
}

/// Sampling ranges for random devices.
struct DeviceSampler {
    int min_vertices = 3, max_vertices = 12;
    double min_irregularity = 0.2, max_irregularity = 0.8;
    double min_spikiness = 0.1, max_spikiness = 0.5;
    double min_radius = 0.1, max_radius = 0.5;
};

/// Record `index` of the stream identified by `seed`; independent of any
/// other index, so generation order does not matter.
inline DeviceRecord generate_record(std::uint64_t seed, std::uint64_t index, const DeviceSampler& ranges = {}) {
    Rng rng(derive_seed(seed, index));
    const int vertices = static_cast<int>(rng.uniform_int(ranges.min_vertices, ranges.max_vertices));
    const double irregularity = rng.uniform(ranges.min_irregularity, ranges.max_irregularity);
    const double spikiness = rng.uniform(ranges.min_spikiness, ranges.max_spikiness);
    const double radius = rng.uniform(ranges.min_radius, ranges.max_radius);
    const std::uint64_t poly_seed = rng.next_u64();
    const Period period(static_cast<int>(rng.uniform_int(kPeriodMin, kPeriodMax)));

    DeviceRecord rec;
    rec.shape = rasterize(random_polygon(poly_seed, vertices, irregularity, spikiness, radius));
    rec.period = period;
    rec.spectrum = surrogate::surrogate_spectrum(rec.shape, period);
    return rec;
}

inline std::vector<DeviceRecord> generate_dataset(std::size_t count, std::uint64_t seed, const DeviceSampler& ranges = {}) {
    if (count == 0) throw ValueError("generate_dataset: count must be at least 1");
    std::vector<DeviceRecord> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(generate_record(seed, i, ranges));
    return out;
}

struct Split {
    std::vector<DeviceRecord> train;
    std::vector<DeviceRecord> validation;
};

/// Seeded Fisher-Yates shuffle, then the first round(fraction * n) records
/// become the training split.
inline Split split(const std::vector<DeviceRecord>& records, double train_fraction, std::uint64_t seed = 0) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValueError("split: fraction must lie in (0,1)");
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * double(records.size())));
    Split s;
    for (std::size_t i = 0; i < order.size(); ++i) (i < n_train ? s.train : s.validation).push_back(records[order[i]]);
    return s;
}

// ---------------------------------------------------------------------------
// Dataset file: "MSD1", u64 count, then per record u16 period, 512 bytes of
// MSB-first row-major shape bits, 58 float32 transmittances. Little endian.

inline constexpr char kDatasetMagic[4] = {'M', 'S', 'D', '1'};
inline constexpr std::size_t kShapeBytes = kImagePixels / 8;

inline void write_dataset(io::ByteWriter& w, const std::vector<DeviceRecord>& records) {
    w.bytes(kDatasetMagic, 4);
    w.u64(records.size());
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (!rec.shape.is_binary()) throw ValueError("save_dataset: record " + std::to_string(r) + " has a non-binary shape");
        w.u16(static_cast<std::uint16_t>(rec.period.nm()));
        for (std::size_t byte = 0; byte < kShapeBytes; ++byte) {
            std::uint8_t v = 0;
            for (std::size_t bit = 0; bit < 8; ++bit)
                if (rec.shape.pixels[byte * 8 + bit] != 0.0f) v |= std::uint8_t(0x80u >> bit);
            w.u8(v);
        }
        for (float t : rec.spectrum.t) w.f32(t);
    }
}

inline std::vector<DeviceRecord> read_dataset(io::ByteReader& in) {
    char magic[4];
    in.bytes(magic, 4, "magic");
    if (!std::equal(magic, magic + 4, kDatasetMagic)) throw FormatError(in.source() + ": bad magic, not a dataset file");
    const std::uint64_t count = in.u64("record count");
    const std::size_t record_bytes = 2 + kShapeBytes + 4 * kSpectrumPoints;
    if (count > in.remaining() / record_bytes)
        throw FormatError(in.source() + ": header declares " + std::to_string(count) + " records but only " +
                          std::to_string(in.remaining()) + " bytes follow (truncated)");
    std::vector<DeviceRecord> out;
    out.reserve(count);
    for (std::uint64_t r = 0; r < count; ++r) {
        const std::string where = "record " + std::to_string(r);
        const int period = in.u16(where + " period");
        if (period < kPeriodMin || period > kPeriodMax)
            throw FormatError(in.source() + ": " + where + ": period " + std::to_string(period) + " outside [200,400]");
        DeviceRecord rec;
        rec.period = Period(period);
        for (std::size_t byte = 0; byte < kShapeBytes; ++byte) {
            const std::uint8_t v = in.u8(where + " shape");
            for (std::size_t bit = 0; bit < 8; ++bit) rec.shape.pixels[byte * 8 + bit] = (v & (0x80u >> bit)) ? 1.0f : 0.0f;
        }
        for (std::size_t k = 0; k < kSpectrumPoints; ++k) {
            const float t = in.f32(where + " spectrum");
            if (!(t >= 0.0f && t <= 1.0f))
                throw FormatError(in.source() + ": " + where + ": spectrum value " + std::to_string(k) + " = " +
                                  std::to_string(t) + " outside [0,1]");
            rec.spectrum.t[k] = t;
        }
        out.push_back(rec);
    }
    if (in.remaining() != 0)
        throw FormatError(in.source() + ": " + std::to_string(in.remaining()) + " trailing bytes after last record");
    return out;
}

inline void save_dataset(const std::vector<DeviceRecord>& records, const std::string& path) {
    io::ByteWriter w;
    write_dataset(w, records);
    w.save(path);
}

inline std::vector<DeviceRecord> load_dataset(const std::string& path) {
    auto in = io::ByteReader::from_file(path);
    return read_dataset(in);
}

// ---------------------------------------------------------------------------
// Portable graymap export/import for shapes.

inline void save_pgm(const ShapeImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "P5\n" << kImageSide << ' ' << kImageSide << "\n255\n";
    for (float v : img.pixels) out.put(static_cast<char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
    if (!out) throw FormatError("write to '" + path + "' failed");
}

/// Reads a 64x64 P2 or P5 graymap; pixel values are scaled by 1/maxval.
inline ShapeImage load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    auto token = [&]() {
        std::string t;
        char c;
        while (in.get(c)) {
            if (c == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!t.empty()) break;
                continue;
            }
            t.push_back(c);
        }
        return t;
    };
    const std::string magic = token();
    if (magic != "P5" && magic != "P2") throw FormatError(path + ": not a PGM file (magic '" + magic + "')");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(token()), h = std::stoi(token()), maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw FormatError(path + ": malformed PGM header");
    }
    if (w != int(kImageSide) || h != int(kImageSide))
        throw FormatError(path + ": expected 64x64 image, got " + std::to_string(w) + "x" + std::to_string(h));
    if (maxval <= 0 || maxval > 255) throw FormatError(path + ": unsupported maxval " + std::to_string(maxval));
    ShapeImage img;
    for (std::size_t i = 0; i < kImagePixels; ++i) {
        int v;
        if (magic == "P5") {
            char c;
            if (!in.get(c)) throw FormatError(path + ": truncated pixel data at pixel " + std::to_string(i));
            v = static_cast<unsigned char>(c);
        } else {
            const auto t = token();
            if (t.empty()) throw FormatError(path + ": truncated pixel data at pixel " + std::to_string(i));
            v = std::stoi(t);
        }
        if (v > maxval) throw FormatError(path + ": pixel " + std::to_string(i) + " exceeds maxval");
        img.pixels[i] = static_cast<float>(double(v) / double(maxval));
    }
    return img;
}

}  // namespace metafilter
