#pragma once

#include <vector>

#include "specae/dataio.hpp"
#include "specae/metrics.hpp"
#include "specae/models.hpp"
#include "specae/training.hpp"

namespace specae {

// Observed profiles in original units divided by the quiet-Sun continuum.
inline ProfileSet dataset_to_profileset(const PixelDataset& ds,
                                        const std::vector<std::size_t>& idx, double ic) {
    if (!(ic > 0)) throw ConfigError("dataset_to_profileset: continuum must be > 0");
    ProfileSet out;
    out.n = idx.size();
    out.i.resize(out.n * kWavelengths);
    out.v.resize(out.n * kWavelengths);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const std::size_t p = idx[k];
        const ScalingParams& sp = ds.scaling[p];
        const float* ip = ds.profile_i(p);
        const float* vp = ds.profile_v(p);
        for (std::size_t w = 0; w < kWavelengths; ++w) {
            out.i[k * kWavelengths + w] = double(unscale_i_value(ip[w], sp)) / ic;
            out.v[k * kWavelengths + w] = double(unscale_v_value(vp[w], sp)) / ic;
        }
    }
    return out;
}

// Runs the model over the given pixels, unscales the reconstruction with the
// per-pixel parameters and normalizes by the quiet-Sun continuum.
template <class Real>
ProfileSet reconstruct_profileset(NetworkGraph<Real>& graph, const PixelDataset& ds,
                                  const std::vector<std::size_t>& idx, double ic,
                                  std::size_t batch_size = 512) {
    if (!(ic > 0)) throw ConfigError("reconstruct_profileset: continuum must be > 0");
    const ModelTag tag = tag_of(graph);
    ProfileSet out;
    out.n = idx.size();
    out.i.resize(out.n * kWavelengths);
    out.v.resize(out.n * kWavelengths);
    for (std::size_t first = 0; first < idx.size(); first += batch_size) {
        const std::size_t last = std::min(first + batch_size, idx.size());
        Tensor<Real> x = make_batch<Real>(ds, idx, first, last, tag);
        Tensor<Real> y = flat_to_profile_view(reconstruct(graph, x));
        for (std::size_t b = 0; b < last - first; ++b) {
            const std::size_t p = idx[first + b];
            const ScalingParams& sp = ds.scaling[p];
            for (std::size_t w = 0; w < kWavelengths; ++w) {
                out.i[(first + b) * kWavelengths + w] =
                    double(unscale_i_value(float(y.at3(b, w, 0)), sp)) / ic;
                out.v[(first + b) * kWavelengths + w] =
                    double(unscale_v_value(float(y.at3(b, w, 1)), sp)) / ic;
            }
        }
    }
    return out;
}

// Full test-set evaluation for one trained model.
template <class Real>
EvalReport evaluate_model(NetworkGraph<Real>& graph, const PixelDataset& ds, double ic,
                          const EvalOptions& opt = {}, std::size_t batch_size = 512) {
    const auto test_idx = ds.indices_with(SplitLabel::Test);
    if (test_idx.empty()) throw ConfigError("evaluate_model: empty test split");
    const ProfileSet observed = dataset_to_profileset(ds, test_idx, ic);
    ProfileSet recon = reconstruct_profileset(graph, ds, test_idx, ic, batch_size);
    EvalReport rep = evaluate_pairs(observed, recon, opt);
    const auto train_idx = ds.indices_with(SplitLabel::Train);
    if (!train_idx.empty()) {
        std::vector<double> cont;
        cont.reserve(train_idx.size());
        for (std::size_t p : train_idx) cont.push_back(double(ds.continuum[p]));
        rep.dob = degree_of_balance(cont);
    }
    return rep;
}

}  // namespace specae
