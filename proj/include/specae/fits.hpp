#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "specae/error.hpp"

namespace specae {

// Minimal FITS subset: primary HDU only, 2880-byte header blocks of 80-char
// cards, big-endian payload, BITPIX in {8, 16, 32, -32, -64}, linear
// BSCALE/BZERO. Enough for Level-1 SP scans and self-generated files.
struct FitsImage {
    int bitpix = -32;
    std::vector<std::size_t> axes;  // NAXIS1 first (fastest-varying)
    double bscale = 1.0;
    double bzero = 0.0;
    // physical values (bscale*raw + bzero), NAXIS1 fastest
    std::vector<double> data;
    // every header card in file order, key -> raw value text
    std::vector<std::pair<std::string, std::string>> cards;

    std::size_t pixel_count() const {
        if (axes.empty()) return 0;
        std::size_t n = 1;
        for (std::size_t a : axes) n *= a;
        return n;
    }

    const std::string* find_card(const std::string& key) const {
        for (const auto& [k, v] : cards)
            if (k == key) return &v;
        return nullptr;
    }

    // card value with FITS string quoting removed ('' inside = escaped ')
    std::string card_string(const std::string& key) const {
        const std::string* raw = find_card(key);
        if (!raw) return {};
        std::string s = *raw;
        if (s.size() >= 2 && s.front() == '\'' && s.back() == '\'') {
            s = s.substr(1, s.size() - 2);
            std::string out;
            for (std::size_t i = 0; i < s.size(); ++i) {
                out += s[i];
                if (s[i] == '\'' && i + 1 < s.size() && s[i + 1] == '\'') ++i;
            }
            // trailing blanks inside the quotes are padding
            while (!out.empty() && out.back() == ' ') out.pop_back();
            s = out;
        }
        return s;
    }
};

namespace fits_detail {

constexpr std::size_t kBlock = 2880;
constexpr std::size_t kCard = 80;

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(' ');
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(' ');
    return s.substr(b, e - b + 1);
}

inline std::uint64_t read_be(const unsigned char* p, std::size_t bytes) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < bytes; ++i) v = (v << 8) | p[i];
    return v;
}

inline void write_be(std::vector<unsigned char>& out, std::uint64_t v, std::size_t bytes) {
    for (std::size_t i = bytes; i-- > 0;) out.push_back((unsigned char)((v >> (8 * i)) & 0xff));
}

inline bool is_supported_bitpix(int b) {
    return b == 8 || b == 16 || b == 32 || b == -32 || b == -64;
}

}  // namespace fits_detail

inline FitsImage parse_fits(const std::vector<unsigned char>& bytes) {
    using namespace fits_detail;
    FitsImage img;
    img.bscale = 1.0;
    img.bzero = 0.0;
    std::map<std::string, std::string> values;
    std::size_t pos = 0;
    bool saw_end = false;
    while (!saw_end) {
        if (pos + kBlock > bytes.size())
            throw ParseError("fits: truncated header at byte " + std::to_string(pos));
        for (std::size_t c = 0; c < kBlock / kCard; ++c) {
            const char* card = reinterpret_cast<const char*>(bytes.data() + pos + c * kCard);
            const std::string key = trim(std::string(card, 8));
            if (key == "END") {
                saw_end = true;
                break;
            }
            if (key.empty() || key == "COMMENT" || key == "HISTORY") continue;
            if (card[8] != '=') continue;
            std::string raw(card + 10, kCard - 10);
            // strip trailing comment (outside quoted strings)
            std::string value;
            bool in_quote = false;
            for (char ch : raw) {
                if (ch == '\'') in_quote = !in_quote;
                if (ch == '/' && !in_quote) break;
                value += ch;
            }
            value = trim(value);
            img.cards.emplace_back(key, value);
            values[key] = value;
        }
        pos += kBlock;
    }

    auto require = [&](const char* key) -> const std::string& {
        auto it = values.find(key);
        if (it == values.end())
            throw ParseError(std::string("fits: missing ") + key + " card (header ends at byte " +
                             std::to_string(pos) + ")");
        return it->second;
    };
    require("SIMPLE");
    img.bitpix = std::stoi(require("BITPIX"));
    if (!is_supported_bitpix(img.bitpix))
        throw ParseError("fits: unsupported BITPIX " + std::to_string(img.bitpix) +
                         " (supported: 8, 16, 32, -32, -64)");
    const int naxis = std::stoi(require("NAXIS"));
    if (naxis < 0 || naxis > 8) throw ParseError("fits: bad NAXIS " + std::to_string(naxis));
    for (int i = 1; i <= naxis; ++i)
        img.axes.push_back(std::size_t(std::stoll(require(("NAXIS" + std::to_string(i)).c_str()))));
    if (auto it = values.find("BSCALE"); it != values.end()) img.bscale = std::stod(it->second);
    if (auto it = values.find("BZERO"); it != values.end()) img.bzero = std::stod(it->second);

    const std::size_t n = img.pixel_count();
    const std::size_t width = std::size_t(std::abs(img.bitpix)) / 8;
    if (n > 0 && pos + n * width > bytes.size())
        throw ParseError("fits: truncated data, need " + std::to_string(n * width) +
                         " bytes at offset " + std::to_string(pos));
    img.data.resize(n);
    const unsigned char* p = bytes.data() + pos;
    for (std::size_t i = 0; i < n; ++i, p += width) {
        double raw;
        switch (img.bitpix) {
            case 8: raw = double(p[0]); break;
            case 16: raw = double(std::int16_t(read_be(p, 2))); break;
            case 32: raw = double(std::int32_t(read_be(p, 4))); break;
            case -32: {
                const std::uint32_t u = std::uint32_t(read_be(p, 4));
                float f;
                std::memcpy(&f, &u, 4);
                raw = double(f);
                break;
            }
            default: {  // -64
                const std::uint64_t u = read_be(p, 8);
                double d;
                std::memcpy(&d, &u, 8);
                raw = d;
                break;
            }
        }
        img.data[i] = img.bscale * raw + img.bzero;
    }
    return img;
}

inline std::vector<unsigned char> write_fits(const FitsImage& img) {
    using namespace fits_detail;
    if (!is_supported_bitpix(img.bitpix))
        throw ConfigError("fits: unsupported BITPIX " + std::to_string(img.bitpix));

    std::vector<std::string> cards;
    auto card = [&](const std::string& key, const std::string& value) {
        std::ostringstream os;
        os << std::left << std::setw(8) << key << "= " << std::right << std::setw(20) << value;
        std::string s = os.str();
        s.resize(kCard, ' ');
        cards.push_back(s);
    };
    auto fmt_int = [](long long v) { return std::to_string(v); };
    card("SIMPLE", "T");
    card("BITPIX", fmt_int(img.bitpix));
    card("NAXIS", fmt_int((long long)img.axes.size()));
    for (std::size_t i = 0; i < img.axes.size(); ++i)
        card("NAXIS" + std::to_string(i + 1), fmt_int((long long)img.axes[i]));
    auto fmt_double = [](double v) {
        std::ostringstream os;
        os << std::setprecision(17) << v;
        return os.str();
    };
    if (img.bscale != 1.0) card("BSCALE", fmt_double(img.bscale));
    if (img.bzero != 0.0) card("BZERO", fmt_double(img.bzero));
    static const char* own = "SIMPLE BITPIX NAXIS BSCALE BZERO END";
    for (const auto& [k, v] : img.cards) {
        if (std::string(own).find(k) != std::string::npos || k.rfind("NAXIS", 0) == 0) continue;
        card(k, v);
    }
    {
        std::string s = "END";
        s.resize(kCard, ' ');
        cards.push_back(s);
    }

    std::vector<unsigned char> out;
    for (const auto& c : cards) out.insert(out.end(), c.begin(), c.end());
    while (out.size() % kBlock != 0) out.push_back(' ');

    const std::size_t n = img.pixel_count();
    if (img.data.size() != n)
        throw ShapeError("fits: data size " + std::to_string(img.data.size()) +
                         " does not match axes product " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double raw = (img.data[i] - img.bzero) / img.bscale;
        switch (img.bitpix) {
            case 8: {
                const long long v = std::llround(raw);
                if (v < 0 || v > 255)
                    throw NumericError("fits: value out of range for BITPIX=8");
                out.push_back((unsigned char)v);
                break;
            }
            case 16: {
                const long long v = std::llround(raw);
                if (v < -32768 || v > 32767)
                    throw NumericError("fits: value out of range for BITPIX=16");
                write_be(out, std::uint64_t(std::uint16_t(std::int16_t(v))), 2);
                break;
            }
            case 32: {
                const long long v = std::llround(raw);
                write_be(out, std::uint64_t(std::uint32_t(std::int32_t(v))), 4);
                break;
            }
            case -32: {
                const float f = float(raw);
                std::uint32_t u;
                std::memcpy(&u, &f, 4);
                write_be(out, u, 4);
                break;
            }
            default: {
                std::uint64_t u;
                std::memcpy(&u, &raw, 8);
                write_be(out, u, 8);
                break;
            }
        }
    }
    while (out.size() % kBlock != 0) out.push_back(0);
    return out;
}

inline std::vector<unsigned char> read_binary_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

inline void write_binary_file(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw IoError("short write to " + path);
}

}  // namespace specae
