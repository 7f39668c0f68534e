#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "mcanc/experiment.hpp"

using namespace mcanc;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigDir = MCANC_CONFIG_DIR;
const char* const kPresets[] = {"aircraft_fxlms", "aircraft_fxnlms", "helicopter_fxlms",
                                "helicopter_fxnlms", "traffic_fxlms", "traffic_fxnlms"};

nlohmann::json small_config_json() {
    return nlohmann::json::parse(R"({
        "name": "small",
        "seed": 5,
        "sample_rate": 8000,
        "duration_s": 0.5,
        "dims": {"j_refs": 2, "k_sources": 2, "m_errors": 2, "n_taps": 16, "l_sec": 8, "lp_pri": 16},
        "noise": {"kind": "band_limited", "f_low": 100, "f_high": 1000},
        "primary": {"kind": "bandpass", "f_low": 80, "f_high": 2000, "inter_channel_delay": 1, "gain_jitter": 0.1},
        "secondary": {"kind": "lowpass", "f_cut": 2500, "inter_channel_delay": 1, "gain_jitter": 0.1},
        "step": {"algorithm": "fxlms", "mu": 1e-3},
        "metrics": {"block_s": 0.125}
    })");
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "mcanc_experiment_test" / name;
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + MCANC_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

}  // namespace

TEST(Presets, AllSixParse) {
    for (const char* name : kPresets) {
        const auto cfg = load_config(kConfigDir / (std::string(name) + ".json"));
        EXPECT_EQ(cfg.name, name);
        EXPECT_EQ(cfg.dims, (SystemDims{4, 4, 4, 512, 256, 512}));
        EXPECT_EQ(cfg.noise.size(), 4u);
        EXPECT_EQ(cfg.sample_rate, 16000.0);
        const bool nlms = std::string(name).ends_with("fxnlms");
        EXPECT_EQ(cfg.step.algorithm, nlms ? Algorithm::FxNLMS : Algorithm::FxLMS);
        EXPECT_EQ(cfg.step.mu, nlms ? 1e-3 : 1e-5);
        const bool wideband = !std::string(name).starts_with("traffic");
        EXPECT_EQ(cfg.warnings.empty(), !wideband) << name;
        for (const auto& n : cfg.noise) EXPECT_LT(n.f_high, cfg.sample_rate / 2);
    }
}

TEST(ParseConfig, SmallConfigDefaults) {
    const auto cfg = parse_config(small_config_json());
    EXPECT_EQ(cfg.noise[0].seed, 5u);
    EXPECT_EQ(cfg.noise[1].seed, 6u);
    EXPECT_EQ(cfg.primary.seed, 106u);
    EXPECT_EQ(cfg.secondary.seed, 207u);
    EXPECT_EQ(cfg.primary.len, 16u);
    EXPECT_EQ(cfg.secondary.len, 8u);
    EXPECT_EQ(cfg.step.epsilon, 1e-8);
}

TEST(ParseConfig, ZeroDurationIsConfigError) {
    auto j = small_config_json();
    j["duration_s"] = 0;
    EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(ParseConfig, UnknownKeyNamesTheField) {
    auto j = small_config_json();
    j["step"]["mew"] = 0.1;
    try {
        parse_config(j);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("step.mew"), std::string::npos) << e.what();
    }
}

TEST(ParseConfig, WrongTypeAndBadEnumAreConfigErrors) {
    auto j = small_config_json();
    j["sample_rate"] = "fast";
    EXPECT_THROW(parse_config(j), ConfigError);
    j = small_config_json();
    j["step"]["algorithm"] = "rls";
    EXPECT_THROW(parse_config(j), ConfigError);
    j = small_config_json();
    j["step"]["mu"] = -1.0;
    EXPECT_THROW(parse_config(j), ConfigError);
    j = small_config_json();
    j["dims"]["n_taps"] = 0;
    EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(ParseConfig, ConfigEchoReparses) {
    const auto cfg = parse_config(small_config_json());
    const auto again = parse_config(config_to_json(cfg));
    EXPECT_EQ(config_to_json(again), config_to_json(cfg));
}

TEST(RunExperiment, ReducesNoiseAndWritesOutputs) {
    auto cfg = parse_config(small_config_json());
    cfg.output_dir = scratch("basic");
    const auto r = run_experiment(cfg);
    EXPECT_EQ(r.status, RunStatus::Success);
    EXPECT_EQ(r.samples_processed, 4000u);
    ASSERT_EQ(r.nr.blocks(), 4u);
    EXPECT_GT(r.nr.nr_db.back(), r.nr.nr_db.front());
    for (const char* f : {kErrorsFile, kNrFile, kWeightsFile, kManifestFile}) EXPECT_TRUE(fs::exists(cfg.output_dir / f));
    EXPECT_EQ(load_control_filter(cfg.output_dir / kWeightsFile).coeffs(), r.final_weights.coeffs());
}

TEST(RunExperiment, ManifestChecksumsMatchFiles) {
    auto cfg = parse_config(small_config_json());
    cfg.output_dir = scratch("manifest");
    run_experiment(cfg);
    std::ifstream in(cfg.output_dir / kManifestFile);
    const auto m = nlohmann::json::parse(in);
    EXPECT_EQ(m["status"], "success");
    EXPECT_EQ(m["samples_processed"], 4000);
    for (const char* f : {kErrorsFile, kNrFile, kWeightsFile}) {
        EXPECT_EQ(m["files"][f]["sha256"], sha256_file(cfg.output_dir / f));
        EXPECT_EQ(m["files"][f]["bytes"], fs::file_size(cfg.output_dir / f));
    }
    EXPECT_FALSE(fs::exists(cfg.output_dir / "manifest.json.tmp"));
}

TEST(RunExperiment, RerunsAreByteIdentical) {
    auto cfg = parse_config(small_config_json());
    cfg.output_dir = scratch("rerun_a");
    run_experiment(cfg);
    const auto a = cfg.output_dir;
    cfg.output_dir = scratch("rerun_b");
    run_experiment(cfg);
    for (const char* f : {kErrorsFile, kNrFile, kWeightsFile}) EXPECT_EQ(slurp(a / f), slurp(cfg.output_dir / f)) << f;

    const auto manifest = slurp(cfg.output_dir / kManifestFile);
    run_experiment(cfg);
    EXPECT_EQ(slurp(cfg.output_dir / kManifestFile), manifest);
}

TEST(RunExperiment, HugeStepDivergesWithPartialOutputs) {
    auto j = small_config_json();
    j["step"]["mu"] = 1e6;
    auto cfg = parse_config(j);
    cfg.output_dir = scratch("diverge");
    const auto r = run_experiment(cfg);
    EXPECT_EQ(r.status, RunStatus::Diverged);
    EXPECT_LT(r.samples_processed, 4000u);
    EXPECT_FALSE(r.message.empty());
    for (double v : r.final_weights.coeffs().values()) EXPECT_TRUE(std::isfinite(v));
    std::ifstream in(cfg.output_dir / kManifestFile);
    EXPECT_EQ(nlohmann::json::parse(in)["status"], "diverged");
}

TEST(CompareRuns, SelfComparisonHasZeroDeltas) {
    auto cfg = parse_config(small_config_json());
    cfg.output_dir = scratch("self");
    run_experiment(cfg);
    const auto c = compare_runs(cfg.output_dir, cfg.output_dir);
    ASSERT_EQ(c.delta.size(), 4u);
    for (double d : c.delta) EXPECT_EQ(d, 0.0);
    EXPECT_EQ(c.steady_delta, 0.0);
    EXPECT_EQ(c.steady_blocks, 1u);
    std::ostringstream out;
    write_comparison(out, c);
    EXPECT_EQ(out.str().rfind("block,nr_db_a,nr_db_b,delta_db\n", 0), 0u);
}

TEST(CompareRuns, MismatchedAndMissingRunsAreErrors) {
    auto cfg = parse_config(small_config_json());
    cfg.output_dir = scratch("cmp_a");
    run_experiment(cfg);
    const auto a = cfg.output_dir;
    cfg.block_s = 0.25;
    cfg.output_dir = scratch("cmp_b");
    run_experiment(cfg);
    EXPECT_THROW(compare_runs(a, cfg.output_dir), ComparisonError);
    const auto empty = scratch("cmp_empty");
    fs::create_directories(empty);
    EXPECT_THROW(compare_runs(a, empty), ComparisonError);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli");
    fs::create_directories(dir);
    auto j = small_config_json();
    {
        std::ofstream(dir / "ok.json") << j.dump();
    }
    j["step"]["mu"] = 1e6;
    {
        std::ofstream(dir / "diverge.json") << j.dump();
    }
    j["bogus"] = 1;
    {
        std::ofstream(dir / "bad.json") << j.dump();
    }
    const auto out = (dir / "out").string();
    EXPECT_EQ(run_cli("run " + (dir / "ok.json").string() + " --output-dir " + out), 0);
    EXPECT_EQ(run_cli("compare " + out + " " + out), 0);
    EXPECT_EQ(run_cli("run " + (dir / "bad.json").string() + " --output-dir " + out), 2);
    EXPECT_EQ(run_cli("run " + (dir / "missing.json").string()), 2);
    EXPECT_EQ(run_cli("run " + (dir / "diverge.json").string() + " --output-dir " + out), 3);
    EXPECT_EQ(run_cli("run " + (dir / "ok.json").string() + " --output-dir " + out + " --duration 0"), 2);
    EXPECT_EQ(run_cli("gradcheck --instances 20 --seed 3"), 0);
}
