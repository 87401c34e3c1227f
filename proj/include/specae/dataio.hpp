#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "specae/error.hpp"
#include "specae/fits.hpp"
#include "specae/models.hpp"

namespace specae {

inline constexpr std::size_t kStokesCount = 4;

// Assembled field of view: [y][x][wavelength][stokes], stokes order I,Q,U,V.
struct SpectralCube {
    std::size_t ny = 0, nx = 0;
    std::vector<float> data;
    std::vector<std::string> manifest;  // per-x-column source file
    std::string timestamp;

    float& at(std::size_t y, std::size_t x, std::size_t w, std::size_t s) {
        return data[((y * nx + x) * kWavelengths + w) * kStokesCount + s];
    }
    float at(std::size_t y, std::size_t x, std::size_t w, std::size_t s) const {
        return data[((y * nx + x) * kWavelengths + w) * kStokesCount + s];
    }
};

// Per-profile scaling state, kept so individual reconstructions can be
// mapped back to original units.
struct ScalingParams {
    float i_min = 0, i_max = 1;
    float v_div = 1;
};

enum class SplitLabel : std::uint8_t { Unassigned = 0, Train = 1, Validation = 2, Test = 3 };

struct PixelDataset {
    std::size_t ny = 0, nx = 0;
    std::vector<float> i_scaled, v_scaled;  // [pixel][112]
    std::vector<ScalingParams> scaling;
    std::vector<std::uint32_t> origin_y, origin_x;
    std::vector<SplitLabel> labels;
    std::vector<float> continuum;  // original-unit mean I over the continuum window
    std::vector<std::pair<std::uint32_t, std::uint32_t>> excluded;  // degenerate pixels
    std::string version_tag;

    std::size_t count() const { return scaling.size(); }

    const float* profile_i(std::size_t p) const { return i_scaled.data() + p * kWavelengths; }
    const float* profile_v(std::size_t p) const { return v_scaled.data() + p * kWavelengths; }

    std::vector<std::size_t> indices_with(SplitLabel l) const {
        std::vector<std::size_t> out;
        for (std::size_t p = 0; p < count(); ++p)
            if (labels[p] == l) out.push_back(p);
        return out;
    }
};

// ---- scaling (per profile) ----

// min-max to [0,1]
template <class It, class Out>
ScalingParams scale_i_profile(It first, It last, Out out) {
    float lo = float(*std::min_element(first, last));
    float hi = float(*std::max_element(first, last));
    if (!(hi > lo))
        throw NumericError("scale_i: degenerate (constant) intensity profile");
    // true division so the bounds are attained exactly at the extrema
    const float span = hi - lo;
    for (It it = first; it != last; ++it, ++out) *out = (float(*it) - lo) / span;
    return {lo, hi, 1.0f};
}

// divide by the larger absolute extremum; result in [-1, 1]
template <class It, class Out>
ScalingParams scale_v_profile(It first, It last, Out out) {
    float mx = float(*std::max_element(first, last));
    float mn = float(*std::min_element(first, last));
    const float div = std::fabs(mx) >= std::fabs(mn) ? std::fabs(mx) : std::fabs(mn);
    if (!(div > 0.0f)) throw NumericError("scale_v: all-zero polarization profile");
    for (It it = first; it != last; ++it, ++out) *out = float(*it) / div;
    return {0, 1, div};
}

inline float unscale_i_value(float scaled, const ScalingParams& sp) {
    return scaled * (sp.i_max - sp.i_min) + sp.i_min;
}

inline float unscale_v_value(float scaled, const ScalingParams& sp) { return scaled * sp.v_div; }

// ---- FITS scan ingestion ----

// Our scan convention: NAXIS=3 with NAXIS1=112 wavelengths, NAXIS2=4 Stokes
// parameters, NAXIS3=y extent. One file per slit position; x extent of the
// cube equals the number of files, concatenated in filename order.
inline void fill_scan_column(SpectralCube& cube, std::size_t x, const FitsImage& img,
                             const std::string& source) {
    if (img.axes.size() != 3 || img.axes[0] != kWavelengths || img.axes[1] != kStokesCount)
        throw ParseError("scan " + source + ": expected axes (112, 4, ny), got " +
                         [&] {
                             std::string s = "(";
                             for (std::size_t i = 0; i < img.axes.size(); ++i)
                                 s += (i ? "," : "") + std::to_string(img.axes[i]);
                             return s + ")";
                         }());
    if (img.axes[2] != cube.ny)
        throw ParseError("scan " + source + ": y extent " + std::to_string(img.axes[2]) +
                         " does not match " + std::to_string(cube.ny));
    for (std::size_t y = 0; y < cube.ny; ++y)
        for (std::size_t s = 0; s < kStokesCount; ++s)
            for (std::size_t w = 0; w < kWavelengths; ++w)
                cube.at(y, x, w, s) = float(img.data[(y * kStokesCount + s) * kWavelengths + w]);
    cube.manifest[x] = source;
    if (cube.timestamp.empty()) cube.timestamp = img.card_string("DATE-OBS");
}

inline SpectralCube assemble_scans(std::vector<std::string> paths) {
    if (paths.empty()) throw ConfigError("assemble_scans: no scan files");
    std::sort(paths.begin(), paths.end(),
              [](const std::string& a, const std::string& b) {
                  return std::filesystem::path(a).filename() < std::filesystem::path(b).filename();
              });
    SpectralCube cube;
    cube.nx = paths.size();
    cube.manifest.resize(paths.size());
    for (std::size_t x = 0; x < paths.size(); ++x) {
        FitsImage img = parse_fits(read_binary_file(paths[x]));
        if (x == 0) {
            if (img.axes.size() != 3)
                throw ParseError("scan " + paths[0] + ": expected NAXIS=3");
            cube.ny = img.axes[2];
            cube.data.assign(cube.ny * cube.nx * kWavelengths * kStokesCount, 0.0f);
        }
        fill_scan_column(cube, x, img, paths[x]);
    }
    return cube;
}

// ---- flattening ----

// 2D space -> 1D pixel, y-major. Q and U are dropped; degenerate profiles
// (constant I or all-zero V) go to the exclusion manifest instead of the
// dataset.
inline PixelDataset flatten_spatial(const SpectralCube& cube) {
    PixelDataset ds;
    ds.ny = cube.ny;
    ds.nx = cube.nx;
    std::vector<float> iprof(kWavelengths), vprof(kWavelengths);
    for (std::size_t y = 0; y < cube.ny; ++y)
        for (std::size_t x = 0; x < cube.nx; ++x) {
            for (std::size_t w = 0; w < kWavelengths; ++w) {
                iprof[w] = cube.at(y, x, w, 0);
                vprof[w] = cube.at(y, x, w, 3);
            }
            std::vector<float> iscaled(kWavelengths), vscaled(kWavelengths);
            ScalingParams sp;
            try {
                sp = scale_i_profile(iprof.begin(), iprof.end(), iscaled.begin());
                const ScalingParams spv =
                    scale_v_profile(vprof.begin(), vprof.end(), vscaled.begin());
                sp.v_div = spv.v_div;
            } catch (const NumericError&) {
                ds.excluded.emplace_back(std::uint32_t(y), std::uint32_t(x));
                continue;
            }
            ds.i_scaled.insert(ds.i_scaled.end(), iscaled.begin(), iscaled.end());
            ds.v_scaled.insert(ds.v_scaled.end(), vscaled.begin(), vscaled.end());
            ds.scaling.push_back(sp);
            ds.origin_y.push_back(std::uint32_t(y));
            ds.origin_x.push_back(std::uint32_t(x));
            ds.labels.push_back(SplitLabel::Unassigned);
            double c = 0;
            for (std::size_t w = kContinuumLo; w <= kContinuumHi; ++w) c += iprof[w];
            ds.continuum.push_back(float(c / double(kContinuumHi - kContinuumLo + 1)));
        }
    return ds;
}

// ---- split plans ----

// half-open rectangle: rows [y0, y1) x columns [x0, x1)
struct Rect {
    std::size_t y0 = 0, y1 = 0, x0 = 0, x1 = 0;
    std::size_t area() const { return (y1 - y0) * (x1 - x0); }
    bool contains(std::size_t y, std::size_t x) const {
        return y >= y0 && y < y1 && x >= x0 && x < x1;
    }
    bool overlaps(const Rect& o) const {
        return y0 < o.y1 && o.y0 < y1 && x0 < o.x1 && o.x0 < x1;
    }
};

struct SplitPlan {
    std::string version;  // A..E, or anything descriptive
    std::vector<Rect> train, validation, test;

    static Rect rect_from_json(const nlohmann::json& j) {
        return {j.at("y0").get<std::size_t>(), j.at("y1").get<std::size_t>(),
                j.at("x0").get<std::size_t>(), j.at("x1").get<std::size_t>()};
    }

    static SplitPlan from_json(const nlohmann::json& j) {
        SplitPlan p;
        p.version = j.value("version", "");
        for (const auto& r : j.at("train")) p.train.push_back(rect_from_json(r));
        for (const auto& r : j.at("validation")) p.validation.push_back(rect_from_json(r));
        for (const auto& r : j.at("test")) p.test.push_back(rect_from_json(r));
        return p;
    }

    nlohmann::json to_json() const {
        auto rects = [](const std::vector<Rect>& v) {
            nlohmann::json a = nlohmann::json::array();
            for (const Rect& r : v)
                a.push_back({{"y0", r.y0}, {"y1", r.y1}, {"x0", r.x0}, {"x1", r.x1}});
            return a;
        };
        return {{"version", version},
                {"train", rects(train)},
                {"validation", rects(validation)},
                {"test", rects(test)}};
    }
};

struct SplitCounts {
    std::size_t train = 0, validation = 0, test = 0;
};

inline SplitCounts split_dataset(PixelDataset& ds, const SplitPlan& plan) {
    auto check_bounds = [&](const std::vector<Rect>& rects, const char* name) {
        for (const Rect& r : rects)
            if (r.y1 > ds.ny || r.x1 > ds.nx || r.y0 >= r.y1 || r.x0 >= r.x1)
                throw ConfigError(std::string("split plan: ") + name +
                                  " rectangle out of bounds or empty");
    };
    check_bounds(plan.train, "train");
    check_bounds(plan.validation, "validation");
    check_bounds(plan.test, "test");
    auto check_disjoint = [](const std::vector<Rect>& a, const std::vector<Rect>& b,
                             const char* na, const char* nb) {
        for (const Rect& ra : a)
            for (const Rect& rb : b)
                if (ra.overlaps(rb))
                    throw ConfigError(std::string("split plan: ") + na + " and " + nb +
                                      " rectangles overlap");
    };
    check_disjoint(plan.train, plan.validation, "train", "validation");
    check_disjoint(plan.train, plan.test, "train", "test");
    check_disjoint(plan.validation, plan.test, "validation", "test");

    SplitCounts counts;
    auto in_any = [](const std::vector<Rect>& rects, std::size_t y, std::size_t x) {
        for (const Rect& r : rects)
            if (r.contains(y, x)) return true;
        return false;
    };
    for (std::size_t p = 0; p < ds.count(); ++p) {
        const std::size_t y = ds.origin_y[p], x = ds.origin_x[p];
        if (in_any(plan.train, y, x)) {
            ds.labels[p] = SplitLabel::Train;
            ++counts.train;
        } else if (in_any(plan.validation, y, x)) {
            ds.labels[p] = SplitLabel::Validation;
            ++counts.validation;
        } else if (in_any(plan.test, y, x)) {
            ds.labels[p] = SplitLabel::Test;
            ++counts.test;
        } else {
            ds.labels[p] = SplitLabel::Unassigned;
        }
    }
    ds.version_tag = plan.version;
    return counts;
}

// ---- quiet-Sun continuum reference ----

struct ContinuumReference {
    double ic = 0;
    std::size_t pixels = 0;
};

inline ContinuumReference quiet_sun_continuum(const PixelDataset& ds,
                                              const std::vector<Rect>& rects) {
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < ds.count(); ++p) {
        const std::size_t y = ds.origin_y[p], x = ds.origin_x[p];
        bool selected = false;
        for (const Rect& r : rects)
            if (r.contains(y, x)) {
                selected = true;
                break;
            }
        if (!selected) continue;
        if (ds.labels[p] != SplitLabel::Test)
            throw ConfigError("quiet-Sun rectangle covers a non-test pixel at (" +
                              std::to_string(y) + "," + std::to_string(x) + ")");
        sum += ds.continuum[p];
        ++n;
    }
    if (n == 0) throw ConfigError("quiet-Sun selection is empty");
    const ContinuumReference ref{sum / double(n), n};
    if (!(ref.ic > 0)) throw NumericError("quiet-Sun continuum must be positive");
    return ref;
}

// ---- dataset container (byte-exact reloadable) ----

namespace container_detail {

inline void put_u64(std::vector<unsigned char>& b, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back((unsigned char)((v >> (8 * i)) & 0xff));
}
inline void put_f32(std::vector<unsigned char>& b, float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    for (int i = 0; i < 4; ++i) b.push_back((unsigned char)((u >> (8 * i)) & 0xff));
}
inline void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back((unsigned char)((v >> (8 * i)) & 0xff));
}

struct Reader {
    const std::vector<unsigned char>& b;
    std::size_t pos = 0;
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[pos + std::size_t(i)];
        pos += 8;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | b[pos + std::size_t(i)];
        pos += 4;
        return v;
    }
    float f32() {
        const std::uint32_t u = u32();
        float f;
        std::memcpy(&f, &u, 4);
        return f;
    }
    unsigned char byte() {
        need(1);
        return b[pos++];
    }
    void need(std::size_t n) {
        if (pos + n > b.size())
            throw ParseError("dataset container truncated at byte " + std::to_string(pos));
    }
};

}  // namespace container_detail

inline constexpr char kDatasetMagic[8] = {'S', 'P', 'A', 'E', 'D', 'S', '0', '1'};

inline std::vector<unsigned char> serialize_dataset(const PixelDataset& ds) {
    using namespace container_detail;
    std::vector<unsigned char> b;
    b.insert(b.end(), kDatasetMagic, kDatasetMagic + 8);
    put_u64(b, ds.ny);
    put_u64(b, ds.nx);
    put_u64(b, ds.count());
    put_u64(b, ds.version_tag.size());
    b.insert(b.end(), ds.version_tag.begin(), ds.version_tag.end());
    for (std::size_t p = 0; p < ds.count(); ++p) {
        put_u32(b, ds.origin_y[p]);
        put_u32(b, ds.origin_x[p]);
        b.push_back((unsigned char)ds.labels[p]);
        put_f32(b, ds.scaling[p].i_min);
        put_f32(b, ds.scaling[p].i_max);
        put_f32(b, ds.scaling[p].v_div);
        put_f32(b, ds.continuum[p]);
    }
    for (float f : ds.i_scaled) put_f32(b, f);
    for (float f : ds.v_scaled) put_f32(b, f);
    put_u64(b, ds.excluded.size());
    for (const auto& [y, x] : ds.excluded) {
        put_u32(b, y);
        put_u32(b, x);
    }
    return b;
}

inline PixelDataset deserialize_dataset(const std::vector<unsigned char>& bytes) {
    using namespace container_detail;
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kDatasetMagic, 8) != 0)
        throw ParseError("not a dataset container (bad magic)");
    Reader r{bytes, 8};
    PixelDataset ds;
    ds.ny = r.u64();
    ds.nx = r.u64();
    const std::size_t n = r.u64();
    const std::size_t taglen = r.u64();
    r.need(taglen);
    ds.version_tag.assign(reinterpret_cast<const char*>(bytes.data()) + r.pos, taglen);
    r.pos += taglen;
    ds.origin_y.resize(n);
    ds.origin_x.resize(n);
    ds.labels.resize(n);
    ds.scaling.resize(n);
    ds.continuum.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
        ds.origin_y[p] = r.u32();
        ds.origin_x[p] = r.u32();
        ds.labels[p] = SplitLabel(r.byte());
        ds.scaling[p].i_min = r.f32();
        ds.scaling[p].i_max = r.f32();
        ds.scaling[p].v_div = r.f32();
        ds.continuum[p] = r.f32();
    }
    ds.i_scaled.resize(n * kWavelengths);
    ds.v_scaled.resize(n * kWavelengths);
    for (auto& f : ds.i_scaled) f = r.f32();
    for (auto& f : ds.v_scaled) f = r.f32();
    const std::size_t ne = r.u64();
    for (std::size_t i = 0; i < ne; ++i) {
        const std::uint32_t y = r.u32();
        const std::uint32_t x = r.u32();
        ds.excluded.emplace_back(y, x);
    }
    return ds;
}

inline void save_dataset(const PixelDataset& ds, const std::string& path) {
    write_binary_file(path, serialize_dataset(ds));
}

inline PixelDataset load_dataset(const std::string& path) {
    return deserialize_dataset(read_binary_file(path));
}

// FNV-1a, used to tie artifacts to the dataset they came from
inline std::uint64_t content_hash(const std::vector<unsigned char>& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace specae
