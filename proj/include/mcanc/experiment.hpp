// Experiment configuration, the adaptation run loop, run manifests and
// run-to-run comparison.
//
// Config files are JSON objects (format_version 1):
//
//   {
//     "format_version": 1,
//     "name": "traffic_fxlms",
//     "seed": 1,
//     "sample_rate": 16000,
//     "duration_s": 10,
//     "dims": {"j_refs": 4, "k_sources": 4, "m_errors": 4,
//              "n_taps": 512, "l_sec": 256, "lp_pri": 512},
//     "noise": {"kind": "band_limited", "f_low": 40, "f_high": 1400, "amplitude": 1},
//     "primary": {"kind": "bandpass", "f_low": 60, "f_high": 3000,
//                 "inter_channel_delay": 4, "gain_jitter": 0.1},
//     "secondary": {"kind": "lowpass", "f_cut": 3500, "inter_channel_delay": 4},
//     "secondary_estimate": {"kind": "perfect"},
//     "step": {"algorithm": "fxlms", "mu": 1e-5, "epsilon": 1e-8},
//     "metrics": {"block_s": 1.0, "per_mic": false},
//     "output_dir": "runs/traffic_fxlms"
//   }
//
// "noise" is either one object (reference j gets seed + j) or an array of
// J objects. Unknown keys are rejected.

#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcanc/acoustic.hpp"
#include "mcanc/adaptive.hpp"
#include "mcanc/coefficient_file.hpp"
#include "mcanc/metrics.hpp"

namespace mcanc {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kConfigFormatVersion = 1;
inline constexpr int kManifestVersion = 1;

enum class EstimateKind { Perfect, Perturbed, FromFile };

struct SecondaryEstimate {
    EstimateKind kind = EstimateKind::Perfect;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    std::filesystem::path file;
};

struct ExperimentConfig {
    std::string name = "experiment";
    SystemDims dims{4, 4, 4, 512, 256, 512};
    double sample_rate = 16000.0;
    double duration_s = 10.0;
    std::vector<NoiseSpec> noise;  // one per reference
    PathSpec primary;
    PathSpec secondary;
    SecondaryEstimate secondary_estimate;
    StepConfig step;
    std::uint64_t seed = 1;
    double block_s = 1.0;
    bool per_mic = false;
    std::filesystem::path output_dir = "run";
    /// Adjustments made while resolving the config (e.g. band clipping).
    std::vector<std::string> warnings;

    void validate() const {
        try {
            dims.validate();
        } catch (const SizeError& e) {
            throw ConfigError(std::string("dims: ") + e.what());
        }
        if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) throw ConfigError("sample_rate must be > 0");
        if (!(duration_s > 0.0) || !std::isfinite(duration_s)) throw ConfigError("duration_s must be > 0");
        if (sample_count(duration_s, sample_rate) == 0) throw ConfigError("duration_s is shorter than one sample");
        if (!(block_s > 0.0)) throw ConfigError("metrics.block_s must be > 0");
        if (noise.size() != dims.j_refs) {
            throw ConfigError("noise: expected " + std::to_string(dims.j_refs) + " specs, got " +
                              std::to_string(noise.size()));
        }
        for (std::size_t j = 0; j < noise.size(); ++j) {
            try {
                noise[j].validate();
            } catch (const SpecError& e) {
                throw ConfigError("noise[" + std::to_string(j) + "]: " + e.what());
            }
        }
        if (primary.len != dims.lp_pri) throw ConfigError("primary.len must equal dims.lp_pri");
        if (secondary.len != dims.l_sec) throw ConfigError("secondary.len must equal dims.l_sec");
        if (secondary_estimate.kind == EstimateKind::Perturbed && !(secondary_estimate.sigma >= 0.0)) {
            throw ConfigError("secondary_estimate.sigma must be >= 0");
        }
        try {
            step.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(e.what()));
        }
    }
};

namespace detail {

using nlohmann::json;

/// Walks one JSON object, reading typed fields and rejecting unknown keys.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    template <class T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        return read<T>(key);
    }

    template <class T>
    T require(const std::string& key) {
        if (!has(key)) throw ConfigError(field(key) + ": required");
        return read<T>(key);
    }

    const json& sub(const std::string& key) {
        if (!has(key)) throw ConfigError(field(key) + ": required");
        return j_.at(key);
    }

    std::string field(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!seen_.count(item.key())) throw ConfigError(field(item.key()) + ": unknown key");
        }
    }

private:
    template <class T>
    T read(const std::string& key) {
        const auto& v = j_.at(key);
        try {
            if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
                if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError("");
            }
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ConfigError("");
            }
            return v.get<T>();
        } catch (const std::exception&) {
            throw ConfigError(field(key) + ": wrong type");
        }
    }

    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

inline NoiseSpec parse_noise(const json& j, const std::string& where, const ExperimentConfig& cfg,
                             std::uint64_t default_seed) {
    ObjectReader r(j, where);
    NoiseSpec n;
    const auto kind = r.require<std::string>("kind");
    if (kind == "tone") {
        n.kind = NoiseKind::Tone;
    } else if (kind == "band_limited") {
        n.kind = NoiseKind::BandLimited;
    } else {
        throw ConfigError(r.field("kind") + ": must be 'tone' or 'band_limited'");
    }
    n.frequency = r.get("frequency", n.frequency);
    n.f_low = r.get("f_low", n.f_low);
    n.f_high = r.get("f_high", n.f_high);
    n.amplitude = r.get("amplitude", n.amplitude);
    n.seed = r.get<std::uint64_t>("seed", default_seed);
    n.duration_s = cfg.duration_s;
    n.sample_rate = cfg.sample_rate;
    r.finish();
    return n;
}

inline PathSpec parse_path(const json& j, const std::string& where, std::size_t len, std::uint64_t default_seed,
                           const std::filesystem::path& base_dir) {
    ObjectReader r(j, where);
    PathSpec p;
    const auto kind = r.require<std::string>("kind");
    if (kind == "bandpass") {
        p.kind = PathKind::Bandpass;
    } else if (kind == "lowpass") {
        p.kind = PathKind::Lowpass;
    } else if (kind == "random_fir") {
        p.kind = PathKind::RandomFir;
    } else if (kind == "from_file") {
        p.kind = PathKind::FromFile;
    } else {
        throw ConfigError(r.field("kind") + ": must be bandpass, lowpass, random_fir or from_file");
    }
    p.f_low = r.get("f_low", p.f_low);
    p.f_high = r.get("f_high", p.f_high);
    p.f_cut = r.get("f_cut", p.f_cut);
    p.len = r.get<std::size_t>("len", len);
    p.inter_channel_delay = r.get<std::size_t>("inter_channel_delay", p.inter_channel_delay);
    p.gain_jitter = r.get("gain_jitter", p.gain_jitter);
    p.seed = r.get<std::uint64_t>("seed", default_seed);
    if (r.has("file")) {
        p.file = base_dir / std::filesystem::path(r.require<std::string>("file"));
    } else if (p.kind == PathKind::FromFile) {
        throw ConfigError(r.field("file") + ": required for from_file paths");
    }
    r.finish();
    return p;
}

}  // namespace detail

/// Resolves a parsed JSON config. Relative file paths are taken relative to
/// `base_dir`; output_dir is kept as written.
inline ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".") {
    detail::ObjectReader r(j, "");
    ExperimentConfig cfg;
    const int version = r.get("format_version", kConfigFormatVersion);
    if (version != kConfigFormatVersion) {
        throw ConfigError("format_version: unsupported version " + std::to_string(version));
    }
    cfg.name = r.get<std::string>("name", cfg.name);
    cfg.seed = r.get<std::uint64_t>("seed", cfg.seed);
    cfg.sample_rate = r.get("sample_rate", cfg.sample_rate);
    cfg.duration_s = r.get("duration_s", cfg.duration_s);

    if (r.has("dims")) {
        detail::ObjectReader d(r.sub("dims"), "dims");
        cfg.dims.j_refs = d.get<std::size_t>("j_refs", cfg.dims.j_refs);
        cfg.dims.k_sources = d.get<std::size_t>("k_sources", cfg.dims.k_sources);
        cfg.dims.m_errors = d.get<std::size_t>("m_errors", cfg.dims.m_errors);
        cfg.dims.n_taps = d.get<std::size_t>("n_taps", cfg.dims.n_taps);
        cfg.dims.l_sec = d.get<std::size_t>("l_sec", cfg.dims.l_sec);
        cfg.dims.lp_pri = d.get<std::size_t>("lp_pri", cfg.dims.lp_pri);
        d.finish();
    }

    const auto& noise = r.sub("noise");
    if (noise.is_array()) {
        for (std::size_t i = 0; i < noise.size(); ++i) {
            cfg.noise.push_back(detail::parse_noise(noise[i], "noise[" + std::to_string(i) + "]", cfg, cfg.seed + i));
        }
    } else {
        const auto proto = detail::parse_noise(noise, "noise", cfg, cfg.seed);
        const bool explicit_seed = noise.is_object() && noise.contains("seed");
        for (std::size_t jref = 0; jref < cfg.dims.j_refs; ++jref) {
            auto spec = proto;
            spec.seed = (explicit_seed ? proto.seed : cfg.seed) + jref;
            cfg.noise.push_back(spec);
        }
    }
    const double nyquist = cfg.sample_rate / 2.0;
    for (std::size_t i = 0; i < cfg.noise.size(); ++i) {
        auto& n = cfg.noise[i];
        if (n.kind == NoiseKind::BandLimited && n.f_high >= nyquist) {
            std::ostringstream msg;
            msg << "noise[" << i << "].f_high " << n.f_high << " Hz clipped to " << 0.45 * cfg.sample_rate
                << " Hz (Nyquist " << nyquist << " Hz)";
            cfg.warnings.push_back(msg.str());
            n.f_high = 0.45 * cfg.sample_rate;
        }
    }

    cfg.primary = detail::parse_path(r.sub("primary"), "primary", cfg.dims.lp_pri, cfg.seed + 101, base_dir);
    cfg.secondary = detail::parse_path(r.sub("secondary"), "secondary", cfg.dims.l_sec, cfg.seed + 202, base_dir);

    if (r.has("secondary_estimate")) {
        detail::ObjectReader e(r.sub("secondary_estimate"), "secondary_estimate");
        const auto kind = e.require<std::string>("kind");
        if (kind == "perfect") {
            cfg.secondary_estimate.kind = EstimateKind::Perfect;
        } else if (kind == "perturbed") {
            cfg.secondary_estimate.kind = EstimateKind::Perturbed;
            cfg.secondary_estimate.sigma = e.require<double>("sigma");
        } else if (kind == "from_file") {
            cfg.secondary_estimate.kind = EstimateKind::FromFile;
            cfg.secondary_estimate.file = base_dir / e.require<std::string>("file");
        } else {
            throw ConfigError("secondary_estimate.kind: must be perfect, perturbed or from_file");
        }
        cfg.secondary_estimate.seed = e.get<std::uint64_t>("seed", cfg.seed + 303);
        e.finish();
    } else {
        cfg.secondary_estimate.seed = cfg.seed + 303;
    }

    {
        detail::ObjectReader s(r.sub("step"), "step");
        const auto algo = s.require<std::string>("algorithm");
        if (algo == "fxlms") {
            cfg.step.algorithm = Algorithm::FxLMS;
        } else if (algo == "fxnlms") {
            cfg.step.algorithm = Algorithm::FxNLMS;
        } else {
            throw ConfigError("step.algorithm: must be 'fxlms' or 'fxnlms'");
        }
        cfg.step.mu = s.require<double>("mu");
        cfg.step.epsilon = s.get("epsilon", cfg.step.epsilon);
        s.finish();
    }

    if (r.has("metrics")) {
        detail::ObjectReader m(r.sub("metrics"), "metrics");
        cfg.block_s = m.get("block_s", cfg.block_s);
        cfg.per_mic = m.get("per_mic", cfg.per_mic);
        m.finish();
    }
    cfg.output_dir = r.get<std::string>("output_dir", cfg.output_dir.string());
    r.finish();
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return parse_config(j, path.parent_path());
}

/// Resolved config as JSON (one noise entry per reference).
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    using nlohmann::json;
    auto path_json = [](const PathSpec& p) {
        static const char* kinds[] = {"bandpass", "lowpass", "random_fir", "from_file"};
        json o = {{"kind", kinds[static_cast<int>(p.kind)]},
                  {"len", p.len},
                  {"inter_channel_delay", p.inter_channel_delay},
                  {"gain_jitter", p.gain_jitter},
                  {"seed", p.seed}};
        if (p.kind == PathKind::Bandpass) {
            o["f_low"] = p.f_low;
            o["f_high"] = p.f_high;
        }
        if (p.kind == PathKind::Lowpass) o["f_cut"] = p.f_cut;
        if (p.kind == PathKind::FromFile) o["file"] = p.file.string();
        return o;
    };
    json noise = json::array();
    for (const auto& n : cfg.noise) {
        json o = {{"kind", n.kind == NoiseKind::Tone ? "tone" : "band_limited"},
                  {"amplitude", n.amplitude},
                  {"seed", n.seed}};
        if (n.kind == NoiseKind::Tone) {
            o["frequency"] = n.frequency;
        } else {
            o["f_low"] = n.f_low;
            o["f_high"] = n.f_high;
        }
        noise.push_back(o);
    }
    static const char* estimate_kinds[] = {"perfect", "perturbed", "from_file"};
    json est = {{"kind", estimate_kinds[static_cast<int>(cfg.secondary_estimate.kind)]},
                {"seed", cfg.secondary_estimate.seed}};
    if (cfg.secondary_estimate.kind == EstimateKind::Perturbed) est["sigma"] = cfg.secondary_estimate.sigma;
    if (cfg.secondary_estimate.kind == EstimateKind::FromFile) est["file"] = cfg.secondary_estimate.file.string();
    return {
        {"format_version", kConfigFormatVersion},
        {"name", cfg.name},
        {"seed", cfg.seed},
        {"sample_rate", cfg.sample_rate},
        {"duration_s", cfg.duration_s},
        {"dims",
         {{"j_refs", cfg.dims.j_refs},
          {"k_sources", cfg.dims.k_sources},
          {"m_errors", cfg.dims.m_errors},
          {"n_taps", cfg.dims.n_taps},
          {"l_sec", cfg.dims.l_sec},
          {"lp_pri", cfg.dims.lp_pri}}},
        {"noise", noise},
        {"primary", path_json(cfg.primary)},
        {"secondary", path_json(cfg.secondary)},
        {"secondary_estimate", est},
        {"step", {{"algorithm", to_string(cfg.step.algorithm)}, {"mu", cfg.step.mu}, {"epsilon", cfg.step.epsilon}}},
        {"metrics", {{"block_s", cfg.block_s}, {"per_mic", cfg.per_mic}}},
        {"output_dir", cfg.output_dir.string()},
    };
}

/// Lowercase hex SHA-256 of a file.
inline std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for hashing");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw IoError("SHA-256 unavailable");
    }
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
    return hex.str();
}

/// Plant and signals built from a config, before any adaptation.
struct Plant {
    PathMatrix primary;
    PathMatrix secondary;
    PathMatrix secondary_estimate;
    std::vector<Stream> references;
    std::vector<Stream> disturbance;
};

inline Plant build_plant(const ExperimentConfig& cfg) {
    const auto& d = cfg.dims;
    Plant p;
    p.primary = build_path_matrix(cfg.primary, d.m_errors, d.j_refs, cfg.sample_rate);
    p.secondary = build_path_matrix(cfg.secondary, d.m_errors, d.k_sources, cfg.sample_rate);
    switch (cfg.secondary_estimate.kind) {
        case EstimateKind::Perfect:
            p.secondary_estimate = p.secondary;
            break;
        case EstimateKind::Perturbed: {
            Tensor3 taps = p.secondary.taps();
            std::mt19937_64 rng(cfg.secondary_estimate.seed);
            std::normal_distribution<double> normal(0.0, 1.0);
            for (double& v : taps.values()) v += cfg.secondary_estimate.sigma * normal(rng);
            p.secondary_estimate = PathMatrix(std::move(taps));
            break;
        }
        case EstimateKind::FromFile: {
            p.secondary_estimate = load_path_matrix(cfg.secondary_estimate.file);
            if (!(p.secondary_estimate.taps().same_shape(p.secondary.taps()))) {
                throw SpecError("secondary_estimate file must be M x K x L");
            }
            break;
        }
    }
    for (const auto& n : cfg.noise) p.references.push_back(generate_noise(n));
    p.disturbance = synthesize_disturbance(p.primary, p.references);
    return p;
}

enum class RunStatus { Success, Diverged };

struct RunResult {
    RunStatus status = RunStatus::Success;
    std::string message;
    std::size_t samples_processed = 0;
    NrSeries nr;
    ControlFilterMatrix final_weights;
    double final_cost = 0.0;
    double wall_clock_s = 0.0;
    nlohmann::json manifest;
};

inline constexpr const char* kErrorsFile = "errors.csv";
inline constexpr const char* kNrFile = "nr.csv";
inline constexpr const char* kWeightsFile = "w_final.mcanc";
inline constexpr const char* kManifestFile = "manifest.json";

/// Runs the full adaptation loop and writes errors.csv, nr.csv,
/// w_final.mcanc and manifest.json into cfg.output_dir. Divergence
/// (non-finite gradient or weights) stops the loop; partial outputs are
/// still written and the result status is Diverged.
inline RunResult run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
    namespace fs = std::filesystem;
    const auto wall_start = std::chrono::steady_clock::now();
    cfg.validate();
    for (const auto& w : cfg.warnings) {
        if (log) *log << "warning: " << w << '\n';
    }

    Plant plant;
    try {
        plant = build_plant(cfg);
    } catch (const SpecError& e) {
        throw ConfigError(e.what());
    }

    const auto& d = cfg.dims;
    ControllerState state(d, plant.secondary, plant.secondary_estimate);
    RunResult result;
    result.nr = NrSeries(cfg.block_s);
    ErrorLog errors;
    errors.channels = d.m_errors;
    const std::size_t count = plant.references.front().size();
    errors.samples.reserve(count * d.m_errors);

    MultiChannelFrame x(d.j_refs), dist(d.m_errors);
    for (std::size_t n = 0; n < count; ++n) {
        for (std::size_t j = 0; j < d.j_refs; ++j) x[j] = plant.references[j][n];
        for (std::size_t m = 0; m < d.m_errors; ++m) dist[m] = plant.disturbance[m][n];
        StepReport report;
        try {
            report = anc_step(state, x, dist, cfg.step);
        } catch (const NumericError& e) {
            result.status = RunStatus::Diverged;
            result.message = "diverged at sample " + std::to_string(n) + ": " + e.what();
            break;
        }
        errors.append(report.error_frame);
        result.nr.accumulate(dist, report.error_frame, cfg.sample_rate);
        result.final_cost = report.cost;
        ++result.samples_processed;
    }
    result.nr.finish();
    result.final_weights = state.w;

    fs::create_directories(cfg.output_dir);
    const auto errors_path = cfg.output_dir / kErrorsFile;
    const auto nr_path = cfg.output_dir / kNrFile;
    const auto weights_path = cfg.output_dir / kWeightsFile;
    {
        std::ofstream out(errors_path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + errors_path.string());
        write_errors_csv(out, errors, d.m_errors);
    }
    {
        std::ofstream out(nr_path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + nr_path.string());
        write_nr_csv(out, result.nr, cfg.per_mic);
    }
    save_coefficients(weights_path, state.w);

    using nlohmann::json;
    json files = json::object();
    for (const auto& p : {errors_path, nr_path, weights_path}) {
        files[p.filename().string()] = {{"sha256", sha256_file(p)}, {"bytes", fs::file_size(p)}};
    }
    const auto nr_value = [](double v) -> json {
        if (std::isfinite(v)) return v;
        return format_real(v);
    };
    json manifest = {
        {"manifest_version", kManifestVersion},
        {"versions",
         {{"mcanc", kVersion}, {"config_format", kConfigFormatVersion}, {"coefficient_format", "MCANC1"}}},
        {"config", config_to_json(cfg)},
        {"status", result.status == RunStatus::Success ? "success" : "diverged"},
        {"message", result.message},
        {"warnings", cfg.warnings},
        {"samples_processed", result.samples_processed},
        {"final_cost", result.final_cost},
        {"blocks", result.nr.blocks()},
        {"first_block_nr_db", result.nr.blocks() ? nr_value(result.nr.nr_db.front()) : json(nullptr)},
        {"final_block_nr_db", result.nr.blocks() ? nr_value(result.nr.nr_db.back()) : json(nullptr)},
        {"files", files},
    };

    const auto manifest_path = cfg.output_dir / kManifestFile;
    const auto tmp = cfg.output_dir / (std::string(kManifestFile) + ".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << manifest.dump(2) << '\n';
        if (!out) throw IoError("failed writing " + tmp.string());
    }
    fs::rename(tmp, manifest_path);
    result.manifest = std::move(manifest);
    result.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    return result;
}

struct RunComparison {
    std::vector<double> nr_a;
    std::vector<double> nr_b;
    std::vector<double> delta;  // b - a
    std::size_t steady_blocks = 0;
    double steady_a = 0.0;
    double steady_b = 0.0;
    double steady_delta = 0.0;
};

/// Per-block NR difference (b - a) and means over the last quarter of
/// blocks (at least one).
inline RunComparison compare_runs(const std::filesystem::path& run_a, const std::filesystem::path& run_b) {
    auto load = [](const std::filesystem::path& dir) {
        if (!std::filesystem::exists(dir / kManifestFile)) {
            throw ComparisonError("missing manifest in " + dir.string());
        }
        std::ifstream in(dir / kNrFile);
        if (!in) throw ComparisonError("missing " + std::string(kNrFile) + " in " + dir.string());
        try {
            return read_nr_csv(in);
        } catch (const FormatError& e) {
            throw ComparisonError(dir.string() + ": " + e.what());
        }
    };
    const auto a = load(run_a);
    const auto b = load(run_b);
    if (a.nr_db.size() != b.nr_db.size()) {
        throw ComparisonError("block counts differ: " + std::to_string(a.nr_db.size()) + " vs " +
                              std::to_string(b.nr_db.size()));
    }
    if (a.nr_db.empty()) throw ComparisonError("runs have no blocks");
    RunComparison c;
    c.nr_a = a.nr_db;
    c.nr_b = b.nr_db;
    for (std::size_t i = 0; i < a.nr_db.size(); ++i) {
        c.delta.push_back(a.nr_db[i] == b.nr_db[i] ? 0.0 : b.nr_db[i] - a.nr_db[i]);
    }
    c.steady_blocks = std::max<std::size_t>(1, (a.nr_db.size() + 3) / 4);
    const std::size_t first = a.nr_db.size() - c.steady_blocks;
    for (std::size_t i = first; i < a.nr_db.size(); ++i) {
        c.steady_a += a.nr_db[i];
        c.steady_b += b.nr_db[i];
    }
    c.steady_a /= static_cast<double>(c.steady_blocks);
    c.steady_b /= static_cast<double>(c.steady_blocks);
    c.steady_delta = c.steady_a == c.steady_b ? 0.0 : c.steady_b - c.steady_a;
    return c;
}

inline void write_comparison(std::ostream& out, const RunComparison& c) {
    out << "block,nr_db_a,nr_db_b,delta_db\n";
    for (std::size_t i = 0; i < c.delta.size(); ++i) {
        out << i << ',' << format_real(c.nr_a[i]) << ',' << format_real(c.nr_b[i]) << ',' << format_real(c.delta[i])
            << '\n';
    }
    out << "\nsteady_state_blocks,steady_nr_db_a,steady_nr_db_b,steady_delta_db\n"
        << c.steady_blocks << ',' << format_real(c.steady_a) << ',' << format_real(c.steady_b) << ','
        << format_real(c.steady_delta) << '\n';
}

}  // namespace mcanc
