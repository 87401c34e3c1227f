#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "specae/dataio.hpp"

using namespace specae;
namespace fs = std::filesystem;

namespace {

// raw FITS header built from bare card images (for malformed-file tests)
std::vector<unsigned char> header_only(const std::vector<std::string>& cards) {
    std::string block;
    for (const auto& c : cards) {
        std::string s = c;
        s.resize(80, ' ');
        block += s;
    }
    block += "END";
    block.resize(((block.size() + 2879) / 2880) * 2880, ' ');
    return std::vector<unsigned char>(block.begin(), block.end());
}

// small synthetic scan cube value, chosen so no profile is degenerate
float cube_value(std::size_t y, std::size_t x, std::size_t w, std::size_t s) {
    return float(1000 + 10 * y + x) - float(w % 7) * float(s + 1) +
           (s == 3 ? (w < kWavelengths / 2 ? -5.0f : 5.0f) : 0.0f);
}

FitsImage make_scan(std::size_t x, std::size_t ny) {
    FitsImage img;
    img.bitpix = -32;
    img.axes = {kWavelengths, kStokesCount, ny};
    img.data.resize(kWavelengths * kStokesCount * ny);
    for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t s = 0; s < kStokesCount; ++s)
            for (std::size_t w = 0; w < kWavelengths; ++w)
                img.data[(y * kStokesCount + s) * kWavelengths + w] = cube_value(y, x, w, s);
    return img;
}

struct TempDir {
    fs::path path;
    TempDir(const char* tag) : path(fs::temp_directory_path() / tag) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// labels-only dataset skeleton at full paper frame size (no profiles needed
// for split accounting)
PixelDataset frame_skeleton(std::size_t ny, std::size_t nx) {
    PixelDataset ds;
    ds.ny = ny;
    ds.nx = nx;
    const std::size_t n = ny * nx;
    ds.scaling.resize(n);
    ds.origin_y.resize(n);
    ds.origin_x.resize(n);
    ds.labels.assign(n, SplitLabel::Unassigned);
    ds.continuum.assign(n, 1.0f);
    for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t x = 0; x < nx; ++x) {
            ds.origin_y[y * nx + x] = std::uint32_t(y);
            ds.origin_x[y * nx + x] = std::uint32_t(x);
        }
    return ds;
}

SplitPlan load_plan(const std::string& version) {
    const auto bytes = read_binary_file(std::string(SPECAE_PLAN_DIR) + "/paper_" + version + ".json");
    return SplitPlan::from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
}

}  // namespace

TEST_CASE("fits parsing") {
    SUBCASE("NAXIS=0 gives empty data with headers") {
        auto bytes = header_only({"SIMPLE  =                    T",
                                  "BITPIX  =                   16",
                                  "NAXIS   =                    0"});
        auto img = parse_fits(bytes);
        CHECK(img.data.empty());
        CHECK(img.bitpix == 16);
        CHECK(img.axes.empty());
    }
    SUBCASE("BSCALE/BZERO: raw 5 becomes physical 110") {
        FitsImage img;
        img.bitpix = 16;
        img.axes = {1};
        img.bscale = 2.0;
        img.bzero = 100.0;
        img.data = {110.0};
        auto bytes = write_fits(img);
        // payload starts after one header block; raw big-endian int16 must be 5
        CHECK(bytes[2880] == 0);
        CHECK(bytes[2881] == 5);
        auto back = parse_fits(bytes);
        CHECK(back.data.size() == 1);
        CHECK(back.data[0] == 110.0);
    }
    SUBCASE("missing required card is a parse error") {
        CHECK_THROWS_AS(parse_fits(header_only({"SIMPLE  =                    T",
                                                "NAXIS   =                    0"})),
                        ParseError);
        CHECK_THROWS_AS(parse_fits(header_only({"SIMPLE  =                    T",
                                                "BITPIX  =                   16"})),
                        ParseError);
    }
    SUBCASE("unsupported BITPIX is called out") {
        auto bytes = header_only({"SIMPLE  =                    T",
                                  "BITPIX  =                   64",
                                  "NAXIS   =                    0"});
        try {
            parse_fits(bytes);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("BITPIX") != std::string::npos);
        }
    }
    SUBCASE("write-parse round trip for every supported BITPIX") {
        for (int bp : {8, 16, 32, -32, -64}) {
            FitsImage img;
            img.bitpix = bp;
            img.axes = {5, 2};
            img.data = {0, 1, 2, 3, 42, 100, 7, 55, 12, 9};
            if (bp == -32 || bp == -64)
                for (auto& d : img.data) d += 0.5;
            auto back = parse_fits(write_fits(img));
            CHECK(back.bitpix == bp);
            CHECK(back.axes == img.axes);
            CHECK(back.data == img.data);  // bit-identical
        }
    }
    SUBCASE("truncated data payload reports the byte offset") {
        FitsImage img;
        img.bitpix = -32;
        img.axes = {8};
        img.data.assign(8, 1.0);
        auto bytes = write_fits(img);
        bytes.resize(2880 + 16);  // half the payload, no padding
        CHECK_THROWS_AS(parse_fits(bytes), ParseError);
    }
}

TEST_CASE("profile scaling") {
    SUBCASE("I: min-max to [0,1]") {
        std::vector<float> in{2, 4, 6}, out(3);
        auto sp = scale_i_profile(in.begin(), in.end(), out.begin());
        CHECK(out == std::vector<float>{0.0f, 0.5f, 1.0f});
        CHECK(sp.i_min == 2.0f);
        CHECK(sp.i_max == 6.0f);
    }
    SUBCASE("I already spanning [0,1] is unchanged") {
        std::vector<float> in{0.0f, 0.25f, 1.0f}, out(3);
        scale_i_profile(in.begin(), in.end(), out.begin());
        CHECK(out == in);
    }
    SUBCASE("constant I profile rejected") {
        std::vector<float> in(5, 3.0f), out(5);
        CHECK_THROWS_AS(scale_i_profile(in.begin(), in.end(), out.begin()), NumericError);
    }
    SUBCASE("V: larger absolute extremum divides") {
        std::vector<float> in{-2, 1}, out(2);
        auto sp = scale_v_profile(in.begin(), in.end(), out.begin());
        CHECK(out == std::vector<float>{-1.0f, 0.5f});
        CHECK(sp.v_div == 2.0f);
    }
    SUBCASE("V tie uses |max| branch") {
        std::vector<float> in{0.5f, -0.5f}, out(2);
        auto sp = scale_v_profile(in.begin(), in.end(), out.begin());
        CHECK(out == std::vector<float>{1.0f, -1.0f});
        CHECK(sp.v_div == 0.5f);
    }
    SUBCASE("all-zero V profile rejected") {
        std::vector<float> in(4, 0.0f), out(4);
        CHECK_THROWS_AS(scale_v_profile(in.begin(), in.end(), out.begin()), NumericError);
    }
    SUBCASE("random profiles: bounds, attainment, signs, round trip") {
        auto rng = make_rng(77);
        std::uniform_real_distribution<float> d(-50.0f, 50.0f);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<float> i(kWavelengths), v(kWavelengths);
            for (auto& x : i) x = d(rng) + 100.0f;
            for (auto& x : v) x = d(rng);
            std::vector<float> is(kWavelengths), vs(kWavelengths);
            auto spi = scale_i_profile(i.begin(), i.end(), is.begin());
            auto spv = scale_v_profile(v.begin(), v.end(), vs.begin());
            float imin = 2, imax = -1, vmax_abs = 0;
            for (std::size_t w = 0; w < kWavelengths; ++w) {
                CHECK(is[w] >= 0.0f);
                CHECK(is[w] <= 1.0f);
                CHECK(vs[w] >= -1.0f);
                CHECK(vs[w] <= 1.0f);
                // sign preserved
                CHECK(vs[w] * v[w] >= 0.0f);
                imin = std::min(imin, is[w]);
                imax = std::max(imax, is[w]);
                vmax_abs = std::max(vmax_abs, std::fabs(vs[w]));
                // inversion within 1e-6 relative
                CHECK(unscale_i_value(is[w], spi) ==
                      doctest::Approx(i[w]).epsilon(1e-6));
                CHECK(unscale_v_value(vs[w], spv) ==
                      doctest::Approx(v[w]).epsilon(1e-6));
            }
            CHECK(imin == 0.0f);  // both I bounds attained
            CHECK(imax == 1.0f);
            CHECK(vmax_abs == 1.0f);  // one V bound attained
        }
    }
    SUBCASE("unscale endpoint identities") {
        ScalingParams sp{12.5f, 90.0f, 3.5f};
        CHECK(unscale_i_value(0.0f, sp) == 12.5f);
        CHECK(unscale_i_value(1.0f, sp) == 90.0f);
        CHECK(unscale_v_value(1.0f, sp) == 3.5f);
        CHECK(unscale_v_value(-1.0f, sp) == -3.5f);
    }
}

TEST_CASE("scan assembly") {
    TempDir dir("specae_scans_test");
    const std::size_t ny = 6;
    std::vector<std::string> paths;
    for (std::size_t x = 0; x < 4; ++x) {
        char name[32];
        std::snprintf(name, sizeof name, "scan_%05zu.fits", x);
        paths.push_back((dir.path / name).string());
        write_binary_file(paths.back(), write_fits(make_scan(x, ny)));
    }

    SUBCASE("single scan gives x extent 1") {
        auto cube = assemble_scans({paths[0]});
        CHECK(cube.nx == 1);
        CHECK(cube.ny == ny);
        CHECK(cube.at(2, 0, 3, 1) == cube_value(2, 0, 3, 1));
    }
    SUBCASE("shuffled paths assemble identically (filename order)") {
        auto a = assemble_scans(paths);
        auto shuffled = paths;
        std::swap(shuffled[0], shuffled[3]);
        std::swap(shuffled[1], shuffled[2]);
        auto b = assemble_scans(shuffled);
        CHECK(a.data == b.data);
        CHECK(a.manifest == b.manifest);
        CHECK(a.nx == 4);
        for (std::size_t x = 0; x < 4; ++x)
            CHECK(a.manifest[x].find("scan_0000" + std::to_string(x)) != std::string::npos);
    }
    SUBCASE("y-extent mismatch names the offending file") {
        const std::string bad = (dir.path / "scan_00009.fits").string();
        write_binary_file(bad, write_fits(make_scan(9, ny + 1)));
        auto with_bad = paths;
        with_bad.push_back(bad);
        try {
            assemble_scans(with_bad);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("scan_00009") != std::string::npos);
        }
    }
    SUBCASE("wrong axis shape rejected") {
        FitsImage img;
        img.bitpix = -32;
        img.axes = {64, 4, ny};
        img.data.assign(64 * 4 * ny, 1.0);
        const std::string bad = (dir.path / "scan_00000b.fits").string();
        write_binary_file(bad, write_fits(img));
        CHECK_THROWS_AS(assemble_scans({bad}), ParseError);
    }
}

TEST_CASE("flattening") {
    const std::size_t ny = 5, nx = 3;
    SpectralCube cube;
    cube.ny = ny;
    cube.nx = nx;
    cube.data.resize(ny * nx * kWavelengths * kStokesCount);
    for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t x = 0; x < nx; ++x)
            for (std::size_t w = 0; w < kWavelengths; ++w)
                for (std::size_t s = 0; s < kStokesCount; ++s)
                    cube.at(y, x, w, s) = cube_value(y, x, w, s);

    SUBCASE("y-major ordering and full coverage") {
        auto ds = flatten_spatial(cube);
        CHECK(ds.count() == ny * nx);
        CHECK(ds.excluded.empty());
        CHECK(ds.origin_y[0] == 0);
        CHECK(ds.origin_x[0] == 0);
        CHECK(ds.origin_y[1] == 0);
        CHECK(ds.origin_x[1] == 1);  // (0,1) -> row 1
        CHECK(ds.origin_y[nx] == 1);
        CHECK(ds.origin_x[nx] == 0);
    }
    SUBCASE("inverse mapping restores the continuum image") {
        auto ds = flatten_spatial(cube);
        for (std::size_t p = 0; p < ds.count(); ++p) {
            double c = 0;
            for (std::size_t w = kContinuumLo; w <= kContinuumHi; ++w)
                c += cube.at(ds.origin_y[p], ds.origin_x[p], w, 0);
            c /= double(kContinuumHi - kContinuumLo + 1);
            CHECK(ds.continuum[p] == doctest::Approx(c).epsilon(1e-6));
        }
    }
    SUBCASE("degenerate pixels go to the exclusion manifest") {
        SpectralCube broken = cube;
        for (std::size_t w = 0; w < kWavelengths; ++w) {
            broken.at(2, 1, w, 0) = 7.0f;  // constant I
            broken.at(4, 2, w, 3) = 0.0f;  // all-zero V
        }
        auto ds = flatten_spatial(broken);
        CHECK(ds.count() == ny * nx - 2);
        REQUIRE(ds.excluded.size() == 2);
        CHECK(ds.excluded[0] == std::make_pair(2u, 1u));
        CHECK(ds.excluded[1] == std::make_pair(4u, 2u));
    }
}

TEST_CASE("split plans") {
    SUBCASE("whole frame as train") {
        auto ds = frame_skeleton(4, 6);
        SplitPlan plan;
        plan.version = "all";
        plan.train = {{0, 4, 0, 6}};
        auto counts = split_dataset(ds, plan);
        CHECK(counts.train == 24);
        CHECK(counts.validation == 0);
        CHECK(ds.version_tag == "all");
        for (auto l : ds.labels) CHECK(l == SplitLabel::Train);
    }
    SUBCASE("paper plans A-E reproduce the published pixel counts") {
        auto ds = frame_skeleton(512, 722);
        const std::pair<const char*, std::size_t> versions[] = {
            {"A", 270664}, {"B", 216064}, {"C", 168800}, {"D", 120000}, {"E", 70000}};
        for (const auto& [v, expected] : versions) {
            auto plan = load_plan(v);
            auto counts = split_dataset(ds, plan);
            CHECK(counts.train == expected);
            CHECK(counts.validation == 45000);
            CHECK(counts.test == 45000);
        }
    }
    SUBCASE("overlapping rectangles rejected") {
        auto ds = frame_skeleton(4, 6);
        SplitPlan plan;
        plan.train = {{0, 4, 0, 3}};
        plan.test = {{2, 4, 2, 5}};
        CHECK_THROWS_AS(split_dataset(ds, plan), ConfigError);
    }
    SUBCASE("out-of-bounds rectangle rejected") {
        auto ds = frame_skeleton(4, 6);
        SplitPlan plan;
        plan.train = {{0, 5, 0, 3}};
        CHECK_THROWS_AS(split_dataset(ds, plan), ConfigError);
    }
    SUBCASE("json round trip") {
        auto plan = load_plan("C");
        auto again = SplitPlan::from_json(plan.to_json());
        CHECK(again.version == plan.version);
        REQUIRE(again.train.size() == plan.train.size());
        for (std::size_t i = 0; i < plan.train.size(); ++i) {
            CHECK(again.train[i].y0 == plan.train[i].y0);
            CHECK(again.train[i].x1 == plan.train[i].x1);
        }
    }
}

TEST_CASE("quiet-Sun continuum reference") {
    auto ds = frame_skeleton(4, 8);
    SplitPlan plan;
    plan.test = {{0, 4, 0, 4}};
    plan.train = {{0, 4, 4, 8}};
    split_dataset(ds, plan);

    SUBCASE("constant continuum 1000") {
        for (auto& c : ds.continuum) c = 1000.0f;
        auto ref = quiet_sun_continuum(ds, {{0, 4, 0, 2}});
        CHECK(ref.ic == doctest::Approx(1000.0));
        CHECK(ref.pixels == 8);
    }
    SUBCASE("two equal-count regions average their means") {
        for (std::size_t p = 0; p < ds.count(); ++p)
            ds.continuum[p] = ds.origin_x[p] < 1 ? 900.0f : 1100.0f;
        auto ref = quiet_sun_continuum(ds, {{0, 4, 0, 1}, {0, 4, 1, 2}});
        CHECK(ref.ic == doctest::Approx(1000.0));
    }
    SUBCASE("selection touching a non-test pixel is rejected") {
        CHECK_THROWS_AS(quiet_sun_continuum(ds, {{0, 4, 3, 5}}), ConfigError);
    }
    SUBCASE("empty selection is rejected") {
        CHECK_THROWS_AS(quiet_sun_continuum(ds, {}), ConfigError);
    }
}

TEST_CASE("dataset container") {
    // realistic dataset via the actual ingestion path
    SpectralCube cube;
    cube.ny = 4;
    cube.nx = 3;
    cube.data.resize(cube.ny * cube.nx * kWavelengths * kStokesCount);
    for (std::size_t y = 0; y < cube.ny; ++y)
        for (std::size_t x = 0; x < cube.nx; ++x)
            for (std::size_t w = 0; w < kWavelengths; ++w)
                for (std::size_t s = 0; s < kStokesCount; ++s)
                    cube.at(y, x, w, s) = cube_value(y, x, w, s);
    auto ds = flatten_spatial(cube);
    SplitPlan plan;
    plan.version = "unit";
    plan.train = {{0, 4, 0, 2}};
    plan.test = {{0, 4, 2, 3}};
    split_dataset(ds, plan);
    ds.excluded.emplace_back(9, 9);

    auto bytes = serialize_dataset(ds);
    auto back = deserialize_dataset(bytes);
    CHECK(back.ny == ds.ny);
    CHECK(back.version_tag == "unit");
    CHECK(back.i_scaled == ds.i_scaled);
    CHECK(back.v_scaled == ds.v_scaled);
    CHECK(back.labels == ds.labels);
    CHECK(back.excluded == ds.excluded);
    CHECK(serialize_dataset(back) == bytes);  // byte-exact round trip

    SUBCASE("file save/load") {
        const auto path = fs::temp_directory_path() / "specae_ds_rt.bin";
        save_dataset(ds, path.string());
        auto loaded = load_dataset(path.string());
        CHECK(serialize_dataset(loaded) == bytes);
        fs::remove(path);
    }
    SUBCASE("bad magic rejected") {
        auto bad = bytes;
        bad[3] ^= 0x40;
        CHECK_THROWS_AS(deserialize_dataset(bad), ParseError);
    }
    SUBCASE("truncation rejected with offset") {
        auto bad = bytes;
        bad.resize(bad.size() / 2);
        CHECK_THROWS_AS(deserialize_dataset(bad), ParseError);
    }
    SUBCASE("content hash distinguishes datasets") {
        auto other = ds;
        other.i_scaled[0] += 0.25f;
        CHECK(content_hash(serialize_dataset(other)) != content_hash(bytes));
    }
}
