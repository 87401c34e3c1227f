// Command-line front end for the spectral autoencoder pipeline:
//   ingest | synth | split | train | encode | decode | evaluate | sweep |
//   report | describe
// Exit codes: 0 success, 1 validation/runtime failure (single-line error on
// stderr), 2 usage error.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "specae/dataio.hpp"
#include "specae/eval.hpp"
#include "specae/models.hpp"
#include "specae/synth.hpp"
#include "specae/training.hpp"
#include "specae/weights_io.hpp"

using namespace specae;
using nlohmann::json;

namespace {

void log_line(const std::string& msg) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", std::gmtime(&now));
    std::cout << "[" << buf << "] " << msg << "\n";
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    in >> j;
    return j;
}

// config file < flags: a config value applies only when the flag was not
// given on the command line
template <class T>
void overlay(const CLI::App& app, const std::string& flag, const json& cfg,
             const std::string& key, T& value) {
    const CLI::Option* opt = app.get_option_no_throw(flag);
    if (opt && opt->count() > 0) return;  // explicit flag wins
    if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

std::uint64_t hash_of_json(const json& j) {
    const std::string s = j.dump();
    return content_hash(std::vector<unsigned char>(s.begin(), s.end()));
}

std::vector<Rect> rects_from_json(const json& arr) {
    std::vector<Rect> out;
    for (const auto& r : arr) out.push_back(SplitPlan::rect_from_json(r));
    return out;
}

std::vector<std::string> fits_files_in(const std::string& dir) {
    std::vector<std::string> paths;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".fits")
            paths.push_back(e.path().string());
    if (paths.empty()) throw ConfigError("no .fits files in " + dir);
    return paths;
}

std::uint64_t dataset_hash_of(const PixelDataset& ds) {
    return content_hash(serialize_dataset(ds));
}

// ---- shared train/evaluate plumbing ----

struct TrainArgs {
    std::string dataset, out, log_path, config_path;
    std::string model = "cae";
    std::size_t bottleneck = kDefaultBottleneck;
    TrainConfig tc;
};

WeightsMeta train_one(NetworkGraph<float>& graph, const PixelDataset& ds, const TrainArgs& a,
                      std::uint64_t config_hash, std::uint64_t dataset_hash) {
    std::ofstream log;
    if (!a.log_path.empty()) {
        log.open(a.log_path);
        if (!log) throw IoError("cannot write " + a.log_path);
    }
    auto state = fit<float>(graph, ds, a.tc, a.log_path.empty() ? nullptr : &log);
    log_line("training done: best val " + std::to_string(state.best_val()) + " at epoch " +
             std::to_string(state.best_epoch()) +
             (state.stopped_early ? " (early stop)" : ""));
    WeightsMeta meta;
    meta.seed = a.tc.seed;
    meta.config_hash = config_hash;
    meta.dataset_hash = dataset_hash;
    meta.tag = parse_model_tag(a.model);
    meta.bottleneck = std::uint32_t(a.bottleneck);
    return meta;
}

double continuum_reference(const PixelDataset& ds, double ic_flag,
                           const std::string& quiet_sun_path) {
    if (ic_flag > 0) return ic_flag;
    if (quiet_sun_path.empty())
        throw ConfigError("need --ic or --quiet-sun to normalize profiles");
    const json j = load_json_file(quiet_sun_path);
    return quiet_sun_continuum(ds, rects_from_json(j.at("regions"))).ic;
}

json report_json(const RunSummary& s, std::uint64_t dataset_hash, std::uint64_t config_hash,
                 std::uint64_t seed) {
    json j = summary_json(s);
    j["dataset_hash"] = dataset_hash;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    return j;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << text;
}

// ---- latent / profile CSV formats ----

void write_latents_csv(const std::string& path, const std::vector<std::size_t>& idx,
                       const Tensor<float>& z) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "pixel";
    for (std::size_t k = 0; k < z.dim(1); ++k) out << ",z" << k;
    out << "\n";
    out.precision(9);
    for (std::size_t r = 0; r < z.dim(0); ++r) {
        out << idx[r];
        for (std::size_t k = 0; k < z.dim(1); ++k) out << ',' << z.at2(r, k);
        out << "\n";
    }
}

std::pair<std::vector<std::size_t>, Tensor<float>> read_latents_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty latents file");
    std::size_t width = std::count(line.begin(), line.end(), ',');
    if (width == 0) throw ParseError(path + ": no latent columns");
    std::vector<std::size_t> idx;
    std::vector<float> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f;
        std::getline(ss, f, ',');
        idx.push_back(std::stoul(f));
        std::size_t got = 0;
        while (std::getline(ss, f, ',')) {
            values.push_back(std::stof(f));
            ++got;
        }
        if (got != width) throw ParseError(path + ": ragged row");
    }
    Tensor<float> z({idx.size(), width});
    z.values = std::move(values);
    return {std::move(idx), std::move(z)};
}

void write_profiles_csv(const std::string& path, const std::vector<std::size_t>& idx,
                        const Tensor<float>& profiles) {
    // scaled space, one row per profile: pixel,i0..i111,v0..v111
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "pixel";
    for (std::size_t w = 0; w < kWavelengths; ++w) out << ",i" << w;
    for (std::size_t w = 0; w < kWavelengths; ++w) out << ",v" << w;
    out << "\n";
    out.precision(9);
    for (std::size_t r = 0; r < profiles.dim(0); ++r) {
        out << (r < idx.size() ? idx[r] : r);
        for (std::size_t w = 0; w < kWavelengths; ++w) out << ',' << profiles.at3(r, w, 0);
        for (std::size_t w = 0; w < kWavelengths; ++w) out << ',' << profiles.at3(r, w, 1);
        out << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral autoencoder pipeline"};
    app.require_subcommand(1);

    // ---------------- ingest ----------------
    auto* ingest = app.add_subcommand("ingest", "assemble FITS scans into a dataset container");
    std::string in_dir, out_path, plan_path, config_path;
    ingest->add_option("--scans", in_dir, "directory of .fits scan files");
    ingest->add_option("--out", out_path, "output dataset container");
    ingest->add_option("--plan", plan_path, "split plan JSON (optional)");
    ingest->add_option("--config", config_path, "JSON config file");

    // ---------------- synth ----------------
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string s_out, s_scan_dir, s_plan, s_config, s_regions;
    std::size_t s_ny = 64, s_nx = 64;
    double s_noise_i = 10.0, s_noise_v = 3.0, s_jitter = 0.1;
    std::uint64_t s_seed = 0;
    synth->add_option("--out", s_out, "output dataset container");
    synth->add_option("--scans-dir", s_scan_dir, "also write FITS scans here");
    synth->add_option("--ny", s_ny, "frame height");
    synth->add_option("--nx", s_nx, "frame width");
    synth->add_option("--noise-i", s_noise_i, "I noise sigma (counts)");
    synth->add_option("--noise-v", s_noise_v, "V noise sigma (counts)");
    synth->add_option("--jitter", s_jitter, "relative per-pixel parameter jitter");
    synth->add_option("--seed", s_seed, "generator seed");
    synth->add_option("--plan", s_plan, "split plan JSON (optional)");
    synth->add_option("--regions", s_regions, "region map JSON (optional)");
    synth->add_option("--config", s_config, "JSON config file");

    // ---------------- split ----------------
    auto* split = app.add_subcommand("split", "apply a split plan to a dataset");
    std::string sp_in, sp_plan, sp_out;
    split->add_option("--dataset", sp_in, "input dataset container")->required();
    split->add_option("--plan", sp_plan, "split plan JSON")->required();
    split->add_option("--out", sp_out, "output dataset container")->required();

    // ---------------- train ----------------
    auto* train = app.add_subcommand("train", "train a model on a dataset");
    TrainArgs ta;
    ta.tc.epochs = 50;
    train->add_option("--dataset", ta.dataset, "dataset container");
    train->add_option("--out", ta.out, "output weights file");
    train->add_option("--model", ta.model, "dae | cae");
    train->add_option("--bottleneck", ta.bottleneck, "latent size");
    train->add_option("--epochs", ta.tc.epochs, "max epochs");
    train->add_option("--batch", ta.tc.batch_size, "batch size");
    train->add_option("--lr", ta.tc.learning_rate, "initial learning rate");
    train->add_option("--stop-patience", ta.tc.early_stop_patience, "early-stop patience");
    train->add_option("--plateau-patience", ta.tc.plateau_patience, "lr plateau patience");
    train->add_option("--seed", ta.tc.seed, "training seed");
    train->add_option("--log", ta.log_path, "per-epoch CSV log");
    train->add_option("--config", ta.config_path, "JSON config file");

    // ---------------- encode ----------------
    auto* encode_cmd = app.add_subcommand("encode", "compress profiles to latent vectors");
    std::string e_model, e_dataset, e_out, e_split = "test";
    encode_cmd->add_option("--model", e_model, "weights file")->required();
    encode_cmd->add_option("--dataset", e_dataset, "dataset container")->required();
    encode_cmd->add_option("--split", e_split, "train | validation | test | all");
    encode_cmd->add_option("--out", e_out, "output latents CSV")->required();

    // ---------------- decode ----------------
    auto* decode_cmd = app.add_subcommand("decode", "expand latent vectors to profiles");
    std::string d_model, d_latents, d_out;
    decode_cmd->add_option("--model", d_model, "weights file")->required();
    decode_cmd->add_option("--latents", d_latents, "latents CSV from encode")->required();
    decode_cmd->add_option("--out", d_out, "output profiles CSV (scaled space)")->required();

    // ---------------- evaluate ----------------
    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate reconstructions on the test split");
    std::string v_model, v_dataset, v_out, v_csv, v_quiet_sun, v_chi = "full";
    double v_ic = 0;
    bool v_identity = false, v_force = false;
    eval_cmd->add_option("--model", v_model, "weights file");
    eval_cmd->add_option("--dataset", v_dataset, "dataset container")->required();
    eval_cmd->add_option("--out", v_out, "report JSON")->required();
    eval_cmd->add_option("--csv", v_csv, "also write a one-row summary CSV");
    eval_cmd->add_option("--ic", v_ic, "quiet-Sun continuum value");
    eval_cmd->add_option("--quiet-sun", v_quiet_sun, "quiet-Sun regions JSON");
    eval_cmd->add_option("--chi-mode", v_chi, "full | continuum");
    eval_cmd->add_flag("--identity", v_identity,
                       "score the observations against themselves (pipeline self-check)");
    eval_cmd->add_flag("--force", v_force, "skip the dataset-hash match check");

    // ---------------- sweep ----------------
    auto* sweep = app.add_subcommand("sweep", "bottleneck / training-set experiment matrix");
    std::string w_dataset, w_out_dir, w_model = "cae", w_bottlenecks = "7,14,28,56,112";
    std::string w_plans, w_quiet_sun, w_config;
    double w_ic = 0;
    TrainConfig w_tc;
    w_tc.epochs = 50;
    sweep->add_option("--dataset", w_dataset, "dataset container");
    sweep->add_option("--out-dir", w_out_dir, "output directory");
    sweep->add_option("--model", w_model, "dae | cae");
    sweep->add_option("--bottlenecks", w_bottlenecks, "comma list of bottleneck sizes");
    sweep->add_option("--plans", w_plans, "comma list of split plan JSONs (training-set versions)");
    sweep->add_option("--epochs", w_tc.epochs, "max epochs per run");
    sweep->add_option("--batch", w_tc.batch_size, "batch size");
    sweep->add_option("--lr", w_tc.learning_rate, "initial learning rate");
    sweep->add_option("--seed", w_tc.seed, "training seed");
    sweep->add_option("--ic", w_ic, "quiet-Sun continuum value");
    sweep->add_option("--quiet-sun", w_quiet_sun, "quiet-Sun regions JSON");
    sweep->add_option("--config", w_config, "JSON config file");

    // ---------------- report ----------------
    auto* report = app.add_subcommand("report", "merge evaluation reports into one CSV");
    std::vector<std::string> r_in;
    std::string r_out;
    report->add_option("--in", r_in, "report JSON files")->required()->expected(-1);
    report->add_option("--out", r_out, "combined CSV")->required();

    // ---------------- describe ----------------
    auto* describe = app.add_subcommand("describe", "print the layer table of a model");
    std::string q_model, q_kind = "cae";
    std::size_t q_bottleneck = kDefaultBottleneck;
    describe->add_option("--model", q_model, "weights file (omit to describe a fresh graph)");
    describe->add_option("--kind", q_kind, "dae | cae (when no weights file given)");
    describe->add_option("--bottleneck", q_bottleneck, "latent size (when no weights file given)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // CLI11 prints usage/help; --help lands here with exit code 0
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*ingest) {
            json cfg;
            if (!config_path.empty()) cfg = load_json_file(config_path);
            overlay(*ingest, "--scans", cfg, "scans", in_dir);
            overlay(*ingest, "--out", cfg, "out", out_path);
            overlay(*ingest, "--plan", cfg, "plan", plan_path);
            if (in_dir.empty() || out_path.empty())
                throw ConfigError("ingest: --scans and --out are required");
            auto cube = assemble_scans(fits_files_in(in_dir));
            log_line("assembled " + std::to_string(cube.nx) + " scans, frame " +
                     std::to_string(cube.ny) + "x" + std::to_string(cube.nx));
            auto ds = flatten_spatial(cube);
            log_line(std::to_string(ds.count()) + " pixels (" +
                     std::to_string(ds.excluded.size()) + " excluded as degenerate)");
            if (!plan_path.empty()) {
                auto plan = SplitPlan::from_json(load_json_file(plan_path));
                auto counts = split_dataset(ds, plan);
                log_line("split " + plan.version + ": train " + std::to_string(counts.train) +
                         ", val " + std::to_string(counts.validation) + ", test " +
                         std::to_string(counts.test));
            }
            save_dataset(ds, out_path);
            log_line("wrote " + out_path);
        } else if (*synth) {
            json cfg;
            if (!s_config.empty()) cfg = load_json_file(s_config);
            overlay(*synth, "--out", cfg, "out", s_out);
            overlay(*synth, "--scans-dir", cfg, "scans_dir", s_scan_dir);
            overlay(*synth, "--ny", cfg, "ny", s_ny);
            overlay(*synth, "--nx", cfg, "nx", s_nx);
            overlay(*synth, "--noise-i", cfg, "noise_i", s_noise_i);
            overlay(*synth, "--noise-v", cfg, "noise_v", s_noise_v);
            overlay(*synth, "--jitter", cfg, "jitter", s_jitter);
            overlay(*synth, "--seed", cfg, "seed", s_seed);
            overlay(*synth, "--plan", cfg, "plan", s_plan);
            overlay(*synth, "--regions", cfg, "regions", s_regions);
            if (s_out.empty() && s_scan_dir.empty())
                throw ConfigError("synth: need --out and/or --scans-dir");

            std::vector<SynthRegion> regions;
            if (!s_regions.empty()) {
                for (const auto& rj : load_json_file(s_regions).at("regions")) {
                    SynthRegion reg;
                    reg.rect = SplitPlan::rect_from_json(rj.at("rect"));
                    SynthParams& p = reg.params;
                    p.continuum = rj.value("continuum", p.continuum);
                    p.depth1 = rj.value("depth1", p.depth1);
                    p.depth2 = rj.value("depth2", p.depth2);
                    p.v_amplitude = rj.value("v_amplitude", p.v_amplitude);
                    p.noise_i = rj.value("noise_i", s_noise_i);
                    p.noise_v = rj.value("noise_v", s_noise_v);
                    reg.jitter = rj.value("jitter", s_jitter);
                    regions.push_back(reg);
                }
            } else {
                SynthRegion reg;
                reg.rect = {0, s_ny, 0, s_nx};
                reg.params.noise_i = s_noise_i;
                reg.params.noise_v = s_noise_v;
                reg.jitter = s_jitter;
                regions.push_back(reg);
            }
            auto cube = make_frame(s_ny, s_nx, regions, s_seed);
            if (!s_scan_dir.empty()) {
                auto paths = write_scans(cube, s_scan_dir);
                log_line("wrote " + std::to_string(paths.size()) + " scans to " + s_scan_dir);
            }
            if (!s_out.empty()) {
                auto ds = flatten_spatial(cube);
                ds.version_tag = "synthetic seed=" + std::to_string(s_seed);
                if (!s_plan.empty()) {
                    auto plan = SplitPlan::from_json(load_json_file(s_plan));
                    auto counts = split_dataset(ds, plan);
                    ds.version_tag += " plan=" + plan.version;
                    log_line("split: train " + std::to_string(counts.train) + ", val " +
                             std::to_string(counts.validation) + ", test " +
                             std::to_string(counts.test));
                }
                save_dataset(ds, s_out);
                log_line("wrote " + s_out + " (" + std::to_string(ds.count()) + " pixels)");
            }
        } else if (*split) {
            auto ds = load_dataset(sp_in);
            auto plan = SplitPlan::from_json(load_json_file(sp_plan));
            auto counts = split_dataset(ds, plan);
            log_line("split " + plan.version + ": train " + std::to_string(counts.train) +
                     ", val " + std::to_string(counts.validation) + ", test " +
                     std::to_string(counts.test));
            save_dataset(ds, sp_out);
            log_line("wrote " + sp_out);
        } else if (*train) {
            json cfg;
            if (!ta.config_path.empty()) cfg = load_json_file(ta.config_path);
            overlay(*train, "--dataset", cfg, "dataset", ta.dataset);
            overlay(*train, "--out", cfg, "out", ta.out);
            overlay(*train, "--model", cfg, "model", ta.model);
            overlay(*train, "--bottleneck", cfg, "bottleneck", ta.bottleneck);
            overlay(*train, "--epochs", cfg, "epochs", ta.tc.epochs);
            overlay(*train, "--batch", cfg, "batch", ta.tc.batch_size);
            overlay(*train, "--lr", cfg, "lr", ta.tc.learning_rate);
            overlay(*train, "--stop-patience", cfg, "stop_patience", ta.tc.early_stop_patience);
            overlay(*train, "--plateau-patience", cfg, "plateau_patience",
                    ta.tc.plateau_patience);
            overlay(*train, "--seed", cfg, "seed", ta.tc.seed);
            overlay(*train, "--log", cfg, "log", ta.log_path);
            if (ta.dataset.empty() || ta.out.empty())
                throw ConfigError("train: --dataset and --out are required");
            ta.tc.validate();

            const json effective = {{"model", ta.model},
                                    {"bottleneck", ta.bottleneck},
                                    {"epochs", ta.tc.epochs},
                                    {"batch", ta.tc.batch_size},
                                    {"lr", ta.tc.learning_rate},
                                    {"stop_patience", ta.tc.early_stop_patience},
                                    {"plateau_patience", ta.tc.plateau_patience},
                                    {"seed", ta.tc.seed}};
            auto ds = load_dataset(ta.dataset);
            const std::uint64_t ds_hash = dataset_hash_of(ds);
            ModelKind kind{parse_model_tag(ta.model), ta.bottleneck};
            auto graph = build_model<float>(kind, derive_seed(ta.tc.seed, 0x1217ull));
            log_line("training " + ta.model + "-" + std::to_string(ta.bottleneck) + " on " +
                     std::to_string(ds.indices_with(SplitLabel::Train).size()) + " pixels");
            WeightsMeta meta = train_one(graph, ds, ta, hash_of_json(effective), ds_hash);
            save_model(graph, meta, ta.out);
            log_line("wrote " + ta.out);
        } else if (*encode_cmd) {
            auto model = load_model(e_model);
            auto ds = load_dataset(e_dataset);
            std::vector<std::size_t> idx;
            if (e_split == "all") {
                idx.resize(ds.count());
                for (std::size_t p = 0; p < ds.count(); ++p) idx[p] = p;
            } else if (e_split == "train") {
                idx = ds.indices_with(SplitLabel::Train);
            } else if (e_split == "validation") {
                idx = ds.indices_with(SplitLabel::Validation);
            } else if (e_split == "test") {
                idx = ds.indices_with(SplitLabel::Test);
            } else {
                throw ConfigError("encode: unknown split '" + e_split + "'");
            }
            if (idx.empty()) throw ConfigError("encode: split '" + e_split + "' is empty");
            const ModelTag tag = tag_of(model.graph);
            Tensor<float> z({idx.size(), model.meta.bottleneck});
            const std::size_t bs = 512;
            for (std::size_t first = 0; first < idx.size(); first += bs) {
                const std::size_t last = std::min(first + bs, idx.size());
                auto x = make_batch<float>(ds, idx, first, last, tag);
                auto zb = encode(model.graph, x);
                for (std::size_t b = 0; b < last - first; ++b)
                    for (std::size_t k = 0; k < zb.dim(1); ++k)
                        z.at2(first + b, k) = zb.at2(b, k);
            }
            write_latents_csv(e_out, idx, z);
            log_line("wrote " + e_out + " (" + std::to_string(idx.size()) + " x " +
                     std::to_string(model.meta.bottleneck) + ")");
        } else if (*decode_cmd) {
            auto model = load_model(d_model);
            auto [idx, z] = read_latents_csv(d_latents);
            auto y = flat_to_profile_view(decode(model.graph, z));
            write_profiles_csv(d_out, idx, y);
            log_line("wrote " + d_out + " (" + std::to_string(idx.size()) + " profiles)");
        } else if (*eval_cmd) {
            if (v_model.empty() && !v_identity)
                throw ConfigError("evaluate: need --model (or --identity)");
            auto ds = load_dataset(v_dataset);
            const std::uint64_t ds_hash = dataset_hash_of(ds);
            EvalOptions opt;
            if (v_chi == "continuum")
                opt.chi_mode = ChiMode::ContinuumOnly;
            else if (v_chi != "full")
                throw ConfigError("evaluate: --chi-mode must be full or continuum");
            const double ic = continuum_reference(ds, v_ic, v_quiet_sun);

            EvalReport rep;
            std::string model_name = "identity";
            std::size_t bneck = 0;
            std::uint64_t cfg_hash = 0, seed = 0;
            if (v_identity) {
                const auto test_idx = ds.indices_with(SplitLabel::Test);
                if (test_idx.empty()) throw ConfigError("evaluate: empty test split");
                auto obs = dataset_to_profileset(ds, test_idx, ic);
                rep = evaluate_pairs(obs, obs, opt);
            } else {
                auto model = load_model(v_model);
                if (model.meta.dataset_hash != ds_hash && !v_force)
                    throw ConfigError(
                        "evaluate: model was trained on a different dataset (hash mismatch); "
                        "pass --force to override");
                rep = evaluate_model(model.graph, ds, ic, opt);
                model_name = model_tag_name(model.meta.tag);
                bneck = model.meta.bottleneck;
                cfg_hash = model.meta.config_hash;
                seed = model.meta.seed;
            }
            auto summary = RunSummary::from_report(model_name + "-" + std::to_string(bneck),
                                                   model_name, bneck, ds.version_tag, rep);
            write_text_file(v_out, report_json(summary, ds_hash, cfg_hash, seed).dump(2) + "\n");
            log_line("wrote " + v_out + " (mean RMSD I " + std::to_string(rep.mean_rmsd_i) +
                     ", V " + std::to_string(rep.mean_rmsd_v) + ")");
            if (!v_csv.empty()) {
                std::ofstream out(v_csv);
                if (!out) throw IoError("cannot write " + v_csv);
                write_summary_csv(out, {summary});
            }
        } else if (*sweep) {
            json cfg;
            if (!w_config.empty()) cfg = load_json_file(w_config);
            overlay(*sweep, "--dataset", cfg, "dataset", w_dataset);
            overlay(*sweep, "--out-dir", cfg, "out_dir", w_out_dir);
            overlay(*sweep, "--model", cfg, "model", w_model);
            overlay(*sweep, "--bottlenecks", cfg, "bottlenecks", w_bottlenecks);
            overlay(*sweep, "--plans", cfg, "plans", w_plans);
            overlay(*sweep, "--epochs", cfg, "epochs", w_tc.epochs);
            overlay(*sweep, "--batch", cfg, "batch", w_tc.batch_size);
            overlay(*sweep, "--lr", cfg, "lr", w_tc.learning_rate);
            overlay(*sweep, "--seed", cfg, "seed", w_tc.seed);
            overlay(*sweep, "--ic", cfg, "ic", w_ic);
            overlay(*sweep, "--quiet-sun", cfg, "quiet_sun", w_quiet_sun);
            if (w_dataset.empty() || w_out_dir.empty())
                throw ConfigError("sweep: --dataset and --out-dir are required");
            w_tc.validate();
            std::filesystem::create_directories(w_out_dir);

            auto base_ds = load_dataset(w_dataset);
            std::vector<std::size_t> bottlenecks;
            {
                std::stringstream ss(w_bottlenecks);
                std::string f;
                while (std::getline(ss, f, ','))
                    if (!f.empty()) bottlenecks.push_back(std::stoul(f));
            }
            if (bottlenecks.empty()) throw ConfigError("sweep: empty bottleneck list");
            std::vector<std::string> plan_files;
            if (!w_plans.empty()) {
                std::stringstream ss(w_plans);
                std::string f;
                while (std::getline(ss, f, ','))
                    if (!f.empty()) plan_files.push_back(f);
            }

            std::vector<RunSummary> rows;
            auto run_one = [&](PixelDataset& ds, std::size_t bneck, const std::string& label) {
                const std::uint64_t ds_hash = dataset_hash_of(ds);
                const double ic = continuum_reference(ds, w_ic, w_quiet_sun);
                TrainArgs a;
                a.model = w_model;
                a.bottleneck = bneck;
                a.tc = w_tc;
                ModelKind kind{parse_model_tag(w_model), bneck};
                auto graph = build_model<float>(kind, derive_seed(w_tc.seed, 0x1217ull));
                const json effective = {{"model", w_model},
                                        {"bottleneck", bneck},
                                        {"epochs", w_tc.epochs},
                                        {"batch", w_tc.batch_size},
                                        {"lr", w_tc.learning_rate},
                                        {"seed", w_tc.seed},
                                        {"label", label}};
                log_line("sweep run " + label);
                WeightsMeta meta = train_one(graph, ds, a, hash_of_json(effective), ds_hash);
                const std::string stem = (std::filesystem::path(w_out_dir) / label).string();
                save_model(graph, meta, stem + ".weights");
                auto rep = evaluate_model(graph, ds, ic);
                auto summary = RunSummary::from_report(label, w_model, bneck, ds.version_tag, rep);
                write_text_file(stem + ".json",
                                report_json(summary, ds_hash, meta.config_hash, meta.seed).dump(2) +
                                    "\n");
                rows.push_back(summary);
            };
            if (plan_files.empty()) {
                for (std::size_t b : bottlenecks)
                    run_one(base_ds, b, w_model + "-b" + std::to_string(b));
            } else {
                for (const auto& pf : plan_files) {
                    auto plan = SplitPlan::from_json(load_json_file(pf));
                    PixelDataset ds = base_ds;
                    split_dataset(ds, plan);
                    for (std::size_t b : bottlenecks)
                        run_one(ds, b,
                                w_model + "-b" + std::to_string(b) + "-" +
                                    (plan.version.empty() ? "plan" : plan.version));
                }
            }
            std::ofstream out(std::filesystem::path(w_out_dir) / "summary.csv");
            if (!out) throw IoError("cannot write sweep summary");
            write_summary_csv(out, rows);
            log_line("wrote " + (std::filesystem::path(w_out_dir) / "summary.csv").string() +
                     " (" + std::to_string(rows.size()) + " runs)");
        } else if (*report) {
            std::vector<RunSummary> rows;
            bool have_hash = false;
            std::uint64_t ds_hash = 0;
            for (const auto& path : r_in) {
                const json j = load_json_file(path);
                const std::uint64_t h = j.at("dataset_hash").get<std::uint64_t>();
                if (!have_hash) {
                    ds_hash = h;
                    have_hash = true;
                } else if (h != ds_hash) {
                    throw ConfigError("report: " + path +
                                      " was evaluated on a different dataset (hash mismatch)");
                }
                RunSummary s;
                s.name = j.at("name").get<std::string>();
                s.model = j.at("model").get<std::string>();
                s.bottleneck = j.at("bottleneck").get<std::size_t>();
                s.version = j.at("version").get<std::string>();
                s.dob = j.at("dob").get<double>();
                s.sigma_i = j.at("sigma_i").get<double>();
                s.sigma_v = j.at("sigma_v").get<double>();
                s.llc_i = j.at("llc_i").get<double>();
                s.rlc_i = j.at("rlc_i").get<double>();
                s.llc_v = j.at("llc_v").get<double>();
                s.rlc_v = j.at("rlc_v").get<double>();
                s.mean_chi_i = j.at("mean_chi_i").get<double>();
                s.mean_chi_v = j.at("mean_chi_v").get<double>();
                s.mean_rmsd_i = j.at("mean_rmsd_i").get<double>();
                s.mean_rmsd_v = j.at("mean_rmsd_v").get<double>();
                rows.push_back(s);
            }
            std::ofstream out(r_out);
            if (!out) throw IoError("cannot write " + r_out);
            write_summary_csv(out, rows);
            log_line("wrote " + r_out + " (" + std::to_string(rows.size()) + " rows)");
        } else if (*describe) {
            if (!q_model.empty()) {
                auto model = load_model(q_model);
                std::cout << "model: " << model_tag_name(model.meta.tag)
                          << ", bottleneck " << model.meta.bottleneck << ", seed "
                          << model.meta.seed << "\n";
                model.graph.describe(std::cout);
            } else {
                ModelKind kind{parse_model_tag(q_kind), q_bottleneck};
                auto graph = build_model<float>(kind, 0);
                std::cout << "model: " << q_kind << ", bottleneck " << q_bottleneck << "\n";
                graph.describe(std::cout);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
