#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "specae/error.hpp"
#include "specae/models.hpp"

namespace specae {

// evaluation wavelength regions (inclusive index ranges)
inline constexpr std::size_t kCoreLeftLo = 10, kCoreLeftHi = 45;
inline constexpr std::size_t kCoreRightLo = 60, kCoreRightHi = 95;

// Normalized Shannon entropy of a k-bin histogram of the continuum image.
// Equal-width bins over [min, max], right-inclusive last bin. 0 = all pixels
// in one bin, 1 = perfectly uniform.
inline double degree_of_balance(const std::vector<double>& values, std::size_t k = 100) {
    if (k < 2) throw ConfigError("degree_of_balance: need k >= 2 bins");
    if (values.empty()) throw ConfigError("degree_of_balance: empty input");
    const double lo = *std::min_element(values.begin(), values.end());
    const double hi = *std::max_element(values.begin(), values.end());
    std::vector<std::size_t> counts(k, 0);
    if (hi > lo) {
        const double w = (hi - lo) / double(k);
        for (double v : values) {
            std::size_t bin = std::size_t((v - lo) / w);
            if (bin >= k) bin = k - 1;  // right edge joins the last bin
            ++counts[bin];
        }
    } else {
        counts[0] = values.size();
    }
    const double n = double(values.size());
    double entropy = 0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = double(c) / n;
        entropy -= p * std::log(p);
    }
    return entropy / std::log(double(k));
}

// Quiet-continuum-normalized profiles, one Stokes parameter per array,
// [n][112] row-major.
struct ProfileSet {
    std::size_t n = 0;
    std::vector<double> i, v;

    const double* row_i(std::size_t p) const { return i.data() + p * kWavelengths; }
    const double* row_v(std::size_t p) const { return v.data() + p * kWavelengths; }
};

struct NoiseEstimate {
    double sigma_i = 0;
    double sigma_v = 0;
    std::size_t count = 0;
};

// Mean over spectra of the per-spectrum continuum scatter: for I the
// standard deviation about the spectrum's own continuum mean, for V the RMS
// about zero (the V continuum reference level is 0).
inline NoiseEstimate observational_noise(const ProfileSet& profiles) {
    if (profiles.n == 0) throw ConfigError("observational_noise: empty test set");
    constexpr std::size_t d = kContinuumHi - kContinuumLo + 1;
    double sum_i = 0, sum_v = 0;
    for (std::size_t p = 0; p < profiles.n; ++p) {
        const double* ip = profiles.row_i(p);
        const double* vp = profiles.row_v(p);
        double mean = 0;
        for (std::size_t w = kContinuumLo; w <= kContinuumHi; ++w) mean += ip[w];
        mean /= double(d);
        double var = 0, ms_v = 0;
        for (std::size_t w = kContinuumLo; w <= kContinuumHi; ++w) {
            var += (ip[w] - mean) * (ip[w] - mean);
            ms_v += vp[w] * vp[w];
        }
        sum_i += std::sqrt(var / double(d));
        sum_v += std::sqrt(ms_v / double(d));
    }
    return {sum_i / double(profiles.n), sum_v / double(profiles.n), profiles.n};
}

enum class ChiMode {
    FullProfile,    // sum over all 112 wavelength points
    ContinuumOnly,  // the literal [0, 15] reading
};

inline double chi_square(const double* observed, const double* reconstructed, double sigma_obs,
                         ChiMode mode = ChiMode::FullProfile) {
    if (!(sigma_obs > 0)) throw NumericError("chi_square: sigma_obs must be > 0");
    const std::size_t lo = mode == ChiMode::FullProfile ? 0 : kContinuumLo;
    const std::size_t hi = mode == ChiMode::FullProfile ? kWavelengths - 1 : kContinuumHi;
    double sum = 0;
    for (std::size_t w = lo; w <= hi; ++w) {
        const double r = reconstructed[w] - observed[w];
        sum += r * r;
    }
    return sum / (double(hi - lo + 1) * sigma_obs * sigma_obs);
}

// root-mean-square deviation over an inclusive index range
inline double rmsd(const double* observed, const double* reconstructed, std::size_t lo,
                   std::size_t hi) {
    if (hi < lo || hi >= kWavelengths) throw ConfigError("rmsd: bad index range");
    double sum = 0;
    for (std::size_t w = lo; w <= hi; ++w) {
        const double r = reconstructed[w] - observed[w];
        sum += r * r;
    }
    return std::sqrt(sum / double(hi - lo + 1));
}

struct LineCoreRmsd {
    double llc_i = 0, rlc_i = 0, llc_v = 0, rlc_v = 0;
};

enum class AggregateMode {
    MeanOfProfiles,   // mean of per-profile RMSDs
    PooledResiduals,  // RMSD over all residuals pooled
};

inline LineCoreRmsd line_core_rmsd(const ProfileSet& observed, const ProfileSet& reconstructed,
                                   AggregateMode agg = AggregateMode::MeanOfProfiles) {
    if (observed.n != reconstructed.n || observed.n == 0)
        throw ConfigError("line_core_rmsd: mismatched or empty profile sets");
    auto region = [&](bool stokes_i, std::size_t lo, std::size_t hi) {
        if (agg == AggregateMode::MeanOfProfiles) {
            double sum = 0;
            for (std::size_t p = 0; p < observed.n; ++p)
                sum += rmsd(stokes_i ? observed.row_i(p) : observed.row_v(p),
                            stokes_i ? reconstructed.row_i(p) : reconstructed.row_v(p), lo, hi);
            return sum / double(observed.n);
        }
        double sum = 0;
        for (std::size_t p = 0; p < observed.n; ++p) {
            const double* o = stokes_i ? observed.row_i(p) : observed.row_v(p);
            const double* r = stokes_i ? reconstructed.row_i(p) : reconstructed.row_v(p);
            for (std::size_t w = lo; w <= hi; ++w) sum += (r[w] - o[w]) * (r[w] - o[w]);
        }
        return std::sqrt(sum / (double(observed.n) * double(hi - lo + 1)));
    };
    return {region(true, kCoreLeftLo, kCoreLeftHi), region(true, kCoreRightLo, kCoreRightHi),
            region(false, kCoreLeftLo, kCoreLeftHi), region(false, kCoreRightLo, kCoreRightHi)};
}

struct EvalOptions {
    ChiMode chi_mode = ChiMode::FullProfile;
    AggregateMode aggregate = AggregateMode::MeanOfProfiles;
};

struct EvalReport {
    NoiseEstimate noise;
    LineCoreRmsd cores;
    std::vector<double> chi_i, chi_v;    // per profile
    std::vector<double> rmsd_i, rmsd_v;  // per profile, same wavelength set as chi
    double mean_chi_i = 0, mean_chi_v = 0;
    double mean_rmsd_i = 0, mean_rmsd_v = 0;
    double dob = -1;  // < 0 when no training-set continuum was supplied
};

inline double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0 : s / double(v.size());
}

inline EvalReport evaluate_pairs(const ProfileSet& observed, const ProfileSet& reconstructed,
                                 const EvalOptions& opt = {}) {
    if (observed.n != reconstructed.n || observed.n == 0)
        throw ConfigError("evaluate_pairs: mismatched or empty profile sets");
    EvalReport rep;
    rep.noise = observational_noise(observed);
    rep.cores = line_core_rmsd(observed, reconstructed, opt.aggregate);
    const std::size_t lo = opt.chi_mode == ChiMode::FullProfile ? 0 : kContinuumLo;
    const std::size_t hi = opt.chi_mode == ChiMode::FullProfile ? kWavelengths - 1 : kContinuumHi;
    for (std::size_t p = 0; p < observed.n; ++p) {
        rep.chi_i.push_back(
            chi_square(observed.row_i(p), reconstructed.row_i(p), rep.noise.sigma_i, opt.chi_mode));
        rep.chi_v.push_back(
            chi_square(observed.row_v(p), reconstructed.row_v(p), rep.noise.sigma_v, opt.chi_mode));
        rep.rmsd_i.push_back(rmsd(observed.row_i(p), reconstructed.row_i(p), lo, hi));
        rep.rmsd_v.push_back(rmsd(observed.row_v(p), reconstructed.row_v(p), lo, hi));
    }
    rep.mean_chi_i = mean_of(rep.chi_i);
    rep.mean_chi_v = mean_of(rep.chi_v);
    rep.mean_rmsd_i = mean_of(rep.rmsd_i);
    rep.mean_rmsd_v = mean_of(rep.rmsd_v);
    return rep;
}

// One row of the sweep/report tables (axes of the bottleneck and
// training-set experiments).
struct RunSummary {
    std::string name;
    std::string model;  // dae | cae
    std::size_t bottleneck = 0;
    std::string version;  // training-set version tag
    double dob = -1;
    double sigma_i = 0, sigma_v = 0;
    double llc_i = 0, rlc_i = 0, llc_v = 0, rlc_v = 0;
    double mean_chi_i = 0, mean_chi_v = 0;
    double mean_rmsd_i = 0, mean_rmsd_v = 0;

    static RunSummary from_report(std::string name, std::string model, std::size_t bottleneck,
                                  std::string version, const EvalReport& r) {
        RunSummary s;
        s.name = std::move(name);
        s.model = std::move(model);
        s.bottleneck = bottleneck;
        s.version = std::move(version);
        s.dob = r.dob;
        s.sigma_i = r.noise.sigma_i;
        s.sigma_v = r.noise.sigma_v;
        s.llc_i = r.cores.llc_i;
        s.rlc_i = r.cores.rlc_i;
        s.llc_v = r.cores.llc_v;
        s.rlc_v = r.cores.rlc_v;
        s.mean_chi_i = r.mean_chi_i;
        s.mean_chi_v = r.mean_chi_v;
        s.mean_rmsd_i = r.mean_rmsd_i;
        s.mean_rmsd_v = r.mean_rmsd_v;
        return s;
    }
};

inline void write_summary_csv(std::ostream& os, const std::vector<RunSummary>& rows) {
    os << "name,model,bottleneck,version,dob,sigma_i,sigma_v,llc_i,rlc_i,llc_v,rlc_v,"
          "mean_chi_i,mean_chi_v,mean_rmsd_i,mean_rmsd_v\n";
    os.precision(12);
    for (const auto& r : rows)
        os << r.name << ',' << r.model << ',' << r.bottleneck << ',' << r.version << ',' << r.dob
           << ',' << r.sigma_i << ',' << r.sigma_v << ',' << r.llc_i << ',' << r.rlc_i << ','
           << r.llc_v << ',' << r.rlc_v << ',' << r.mean_chi_i << ',' << r.mean_chi_v << ','
           << r.mean_rmsd_i << ',' << r.mean_rmsd_v << '\n';
}

inline std::vector<RunSummary> parse_summary_csv(std::istream& is) {
    std::vector<RunSummary> rows;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f;
        RunSummary r;
        auto next = [&] {
            std::getline(ss, f, ',');
            return f;
        };
        r.name = next();
        r.model = next();
        r.bottleneck = std::stoul(next());
        r.version = next();
        r.dob = std::stod(next());
        r.sigma_i = std::stod(next());
        r.sigma_v = std::stod(next());
        r.llc_i = std::stod(next());
        r.rlc_i = std::stod(next());
        r.llc_v = std::stod(next());
        r.rlc_v = std::stod(next());
        r.mean_chi_i = std::stod(next());
        r.mean_chi_v = std::stod(next());
        r.mean_rmsd_i = std::stod(next());
        r.mean_rmsd_v = std::stod(next());
        rows.push_back(r);
    }
    return rows;
}

inline void write_profile_csv(std::ostream& os, const EvalReport& r) {
    os << "profile,chi_i,chi_v,rmsd_i,rmsd_v\n";
    os.precision(12);
    for (std::size_t p = 0; p < r.chi_i.size(); ++p)
        os << p << ',' << r.chi_i[p] << ',' << r.chi_v[p] << ',' << r.rmsd_i[p] << ','
           << r.rmsd_v[p] << '\n';
}

inline nlohmann::json summary_json(const RunSummary& r) {
    return {{"name", r.name},
            {"model", r.model},
            {"bottleneck", r.bottleneck},
            {"version", r.version},
            {"dob", r.dob},
            {"sigma_i", r.sigma_i},
            {"sigma_v", r.sigma_v},
            {"llc_i", r.llc_i},
            {"rlc_i", r.rlc_i},
            {"llc_v", r.llc_v},
            {"rlc_v", r.rlc_v},
            {"mean_chi_i", r.mean_chi_i},
            {"mean_chi_v", r.mean_chi_v},
            {"mean_rmsd_i", r.mean_rmsd_i},
            {"mean_rmsd_v", r.mean_rmsd_v}};
}

}  // namespace specae
