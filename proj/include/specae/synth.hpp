#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "specae/dataio.hpp"
#include "specae/error.hpp"
#include "specae/metrics.hpp"
#include "specae/rng.hpp"

namespace specae {

// Two Gaussian absorption lines in I; V is the wavelength derivative of the
// line shape, which gives the four-lobe morphology (two lobes per line).
struct SynthParams {
    double continuum = 1000.0;  // counts
    double depth1 = 0.6, depth2 = 0.5;
    double center1 = 27.0, center2 = 77.0;  // inside the line-core regions
    double width1 = 4.0, width2 = 4.0;      // index units
    double v_amplitude = 30.0;
    double noise_i = 0.0, noise_v = 0.0;  // gaussian sigma, counts

    void validate() const {
        if (!(center1 >= double(kCoreLeftLo) && center1 <= double(kCoreLeftHi)))
            throw ConfigError("synth: center1 must lie in [10, 45]");
        if (!(center2 >= double(kCoreRightLo) && center2 <= double(kCoreRightHi)))
            throw ConfigError("synth: center2 must lie in [60, 95]");
        if (!(depth1 >= 0 && depth1 < 1 && depth2 >= 0 && depth2 < 1))
            throw ConfigError("synth: line depths must be in [0, 1)");
        if (!(width1 > 0 && width2 > 0)) throw ConfigError("synth: line widths must be > 0");
        if (!(continuum > 0)) throw ConfigError("synth: continuum must be > 0");
    }
};

inline void make_profile(const SynthParams& p, std::uint64_t seed, float* out_i, float* out_v) {
    p.validate();
    auto rng = make_rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t w = 0; w < kWavelengths; ++w) {
        const double x = double(w);
        double absorption = 0, derivative = 0;
        const double pairs[2][3] = {{p.depth1, p.center1, p.width1},
                                    {p.depth2, p.center2, p.width2}};
        for (const auto& line : pairs) {
            const double depth = line[0], c = line[1], s = line[2];
            const double g = std::exp(-(x - c) * (x - c) / (2.0 * s * s));
            absorption += depth * g;
            derivative += depth * (-(x - c) / (s * s)) * g;
        }
        double iv = p.continuum * (1.0 - absorption);
        double vv = p.v_amplitude * derivative;
        if (p.noise_i > 0) iv += p.noise_i * noise(rng);
        if (p.noise_v > 0) vv += p.noise_v * noise(rng);
        out_i[w] = float(iv);
        out_v[w] = float(vv);
    }
}

struct SynthRegion {
    Rect rect;
    SynthParams params;
    double jitter = 0.0;  // relative per-pixel variation of continuum/depths/amplitude
};

// Per-pixel profiles with per-region parameters; regions must tile the frame
// exactly. Q and U planes are zero.
inline SpectralCube make_frame(std::size_t ny, std::size_t nx,
                               const std::vector<SynthRegion>& regions, std::uint64_t seed) {
    if (regions.empty()) throw ConfigError("make_frame: no regions");
    std::size_t covered = 0;
    for (std::size_t a = 0; a < regions.size(); ++a) {
        const Rect& r = regions[a].rect;
        if (r.y1 > ny || r.x1 > nx || r.y0 >= r.y1 || r.x0 >= r.x1)
            throw ConfigError("make_frame: region " + std::to_string(a) + " out of bounds");
        covered += r.area();
        for (std::size_t b = a + 1; b < regions.size(); ++b)
            if (r.overlaps(regions[b].rect))
                throw ConfigError("make_frame: regions " + std::to_string(a) + " and " +
                                  std::to_string(b) + " overlap");
    }
    if (covered != ny * nx)
        throw ConfigError("make_frame: regions cover " + std::to_string(covered) + " of " +
                          std::to_string(ny * nx) + " pixels");

    SpectralCube cube;
    cube.ny = ny;
    cube.nx = nx;
    cube.data.assign(ny * nx * kWavelengths * kStokesCount, 0.0f);
    cube.timestamp = "synthetic";
    std::vector<float> iprof(kWavelengths), vprof(kWavelengths);
    for (const SynthRegion& reg : regions) {
        for (std::size_t y = reg.rect.y0; y < reg.rect.y1; ++y)
            for (std::size_t x = reg.rect.x0; x < reg.rect.x1; ++x) {
                const std::uint64_t pix_seed = derive_seed(seed, y, x);
                SynthParams p = reg.params;
                if (reg.jitter > 0) {
                    auto jrng = make_rng(mix64(pix_seed ^ 0x9277ull));
                    std::uniform_real_distribution<double> u(-reg.jitter, reg.jitter);
                    p.continuum *= 1.0 + u(jrng);
                    p.depth1 = std::min(0.999, std::max(0.0, p.depth1 * (1.0 + u(jrng))));
                    p.depth2 = std::min(0.999, std::max(0.0, p.depth2 * (1.0 + u(jrng))));
                    p.v_amplitude *= 1.0 + u(jrng);
                }
                make_profile(p, pix_seed, iprof.data(), vprof.data());
                for (std::size_t w = 0; w < kWavelengths; ++w) {
                    cube.at(y, x, w, 0) = iprof[w];
                    cube.at(y, x, w, 3) = vprof[w];
                }
            }
    }
    return cube;
}

// One FITS file per x column, exercising the parser path end to end.
inline FitsImage cube_to_scan(const SpectralCube& cube, std::size_t x, int bitpix = -32) {
    FitsImage img;
    img.bitpix = bitpix;
    img.axes = {kWavelengths, kStokesCount, cube.ny};
    img.data.resize(img.pixel_count());
    for (std::size_t y = 0; y < cube.ny; ++y)
        for (std::size_t s = 0; s < kStokesCount; ++s)
            for (std::size_t w = 0; w < kWavelengths; ++w)
                img.data[(y * kStokesCount + s) * kWavelengths + w] = double(cube.at(y, x, w, s));
    if (!cube.timestamp.empty()) img.cards.emplace_back("DATE-OBS", "'" + cube.timestamp + "'");
    return img;
}

inline std::vector<std::string> write_scans(const SpectralCube& cube, const std::string& dir,
                                            int bitpix = -32) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> paths;
    for (std::size_t x = 0; x < cube.nx; ++x) {
        char name[32];
        std::snprintf(name, sizeof(name), "scan_%05zu.fits", x);
        const std::string path = (std::filesystem::path(dir) / name).string();
        write_binary_file(path, write_fits(cube_to_scan(cube, x, bitpix)));
        paths.push_back(path);
    }
    return paths;
}

}  // namespace specae
