#include <gtest/gtest.h>

#include <sstream>

#include "crushpool/errors.hpp"
#include "crushpool/orchestrator.hpp"
#include "support.hpp"

using namespace crushpool;
using crushpool::testing::list_dir;
using crushpool::testing::slurp;
using crushpool::testing::spit;
using crushpool::testing::TempDir;

namespace {

RunConfig sim_run(const TempDir& dir, const std::string& gen, const std::string& battery, std::uint64_t seed = 42) {
    RunConfig cfg;
    cfg.generator = parse_generator_name(gen, seed);
    cfg.battery = battery;
    cfg.dest_dir = "out";
    cfg.pool.mode = PoolMode::Simulated;
    cfg.pool.workdir = dir.path();
    return cfg;
}

}  // namespace

TEST(WaveCount, CeilingDivision) {
    EXPECT_EQ(compute_wave_count(107, 40), 3);
    EXPECT_EQ(compute_wave_count(107, 70), 2);
    EXPECT_EQ(compute_wave_count(107, 90), 2);
    EXPECT_EQ(compute_wave_count(107, 107), 1);
    EXPECT_EQ(compute_wave_count(11, 72), 1);
    EXPECT_THROW(compute_wave_count(5, 0), ConfigError);
}

TEST(LogMetrics, CohortsAndHolds) {
    const std::string log =
        "0.000 (1.0) SUBMITTED\n0.000 (1.0) STARTED node 0\n0.000 (1.1) STARTED node 0\n"
        "60.000 (1.1) HELD Transient\n60.000 node 2 BUSY\n72.000 (1.1) RELEASED\n72.000 (1.1) STARTED node 1\n";
    EXPECT_EQ(count_start_cohorts(log), 2);
    EXPECT_EQ(count_held_events(log), 1u);
}

TEST(RunMaster, SmallCrushSimulatedEndToEnd) {
    TempDir dir;
    const auto cfg = sim_run(dir, "minstd", "smallcrush");
    std::ostringstream out;
    const auto report = run_master(cfg, out);
    EXPECT_TRUE(report.completed);
    EXPECT_EQ(report.wave_count, 1);
    EXPECT_EQ(report.held_events, 0u);
    EXPECT_EQ(report.cluster.value, 1u);
    EXPECT_DOUBLE_EQ(report.wall_time_s, 60.0);
    EXPECT_EQ(list_dir(dir.path()), (std::vector<std::string>{"out", "results.txt", "stats.txt"}));
    EXPECT_EQ(list_dir(dir / "out").size(), 11u + 3u);
    EXPECT_TRUE(verify_equivalence(cfg));

    const auto text = out.str();
    EXPECT_EQ(text.rfind("making HTCondor submit file\n\nsubmitting to HTCondor\nCondor Cluster Number : 1\n\n", 0),
              0u)
        << text;
    EXPECT_NE(text.find("0/11 files generated . . .\n"), std::string::npos);
    EXPECT_NE(text.find("files generated\n\nJoining all output files\n"), std::string::npos);
    EXPECT_NE(text.find("files joined, results.txt generated\ncleaning up directory\n"), std::string::npos);
    EXPECT_NE(text.find("Testing complete. Results are in results.txt which is \nlocated in your current directory "
                        "as well as in out\n"),
              std::string::npos);
}

TEST(RunMaster, BigCrushOnFortySlotsTakesThreeWaves) {
    TempDir dir;
    auto cfg = sim_run(dir, "xorshift64star", "bigcrush");
    cfg.pool.slot_limit = 40;
    cfg.pool.node_count = 5;
    std::ostringstream out;
    const auto report = run_master(cfg, out);
    EXPECT_TRUE(report.completed);
    EXPECT_EQ(report.wave_count, 3);
    EXPECT_GE(report.wall_time_s, 180.0);
    EXPECT_LT(report.submit_host_busy_s / report.wall_time_s, 0.01);
}

TEST(RunMaster, TransientHoldsAreReleasedAndResultsUnchanged) {
    TempDir clean_dir;
    std::ostringstream sink;
    ASSERT_TRUE(run_master(sim_run(clean_dir, "minstd", "crush"), sink).completed);

    TempDir dir;
    auto cfg = sim_run(dir, "minstd", "crush");
    cfg.pool.fault_plan.hold_faults = {{3, HoldCause::Transient}, {7, HoldCause::Transient}};
    std::ostringstream out;
    const auto report = run_master(cfg, out);
    EXPECT_TRUE(report.completed);
    EXPECT_GE(report.held_events, 2u);
    EXPECT_NE(out.str().find("held tests released"), std::string::npos);
    EXPECT_EQ(slurp(dir / "results.txt"), slurp(clean_dir / "results.txt"));
    EXPECT_EQ(slurp(dir / "stats.txt"), slurp(clean_dir / "stats.txt"));
}

TEST(RunMaster, UnwritableOutputIsRepairedByPermissionFix) {
    TempDir dir;
    auto cfg = sim_run(dir, "randu", "smallcrush");
    cfg.pool.fault_plan.hold_faults = {{9, HoldCause::OutputNotWritable}};
    std::ostringstream out;
    const auto report = run_master(cfg, out);
    EXPECT_TRUE(report.completed);
    EXPECT_EQ(report.held_events, 1u);
    EXPECT_TRUE(verify_equivalence(cfg));
}

TEST(RunMaster, RealModeSmallCrush) {
    TempDir dir;
    auto cfg = sim_run(dir, "xorshift64star", "smallcrush", 3);
    cfg.pool.mode = PoolMode::Real;
    cfg.poll_interval_s = 0.05;
    cfg.pool.poll_granularity_s = 0.01;
    std::ostringstream out;
    const auto report = run_master(cfg, out);
    EXPECT_TRUE(report.completed);
    EXPECT_TRUE(verify_equivalence(cfg));
}

TEST(RunMaster, AbsoluteDestination) {
    TempDir dir;
    TempDir elsewhere;
    auto cfg = sim_run(dir, "minstd", "smallcrush");
    cfg.dest_dir = elsewhere / "archive";
    std::ostringstream out;
    EXPECT_TRUE(run_master(cfg, out).completed);
    EXPECT_TRUE(std::filesystem::exists(elsewhere / "archive" / "log"));
    EXPECT_TRUE(verify_equivalence(cfg));
}

TEST(RunMaster, RejectsBadConfig) {
    TempDir dir;
    auto cfg = sim_run(dir, "minstd", "smallcrush");
    cfg.poll_interval_s = 0;
    std::ostringstream out;
    EXPECT_THROW(run_master(cfg, out), ConfigError);
    cfg.poll_interval_s = 12;
    cfg.battery = "tinycrush";
    EXPECT_THROW(run_master(cfg, out), UsageError);
}

TEST(VerifyEquivalence, DetectsTamperingAndSeedChanges) {
    TempDir dir;
    auto cfg = sim_run(dir, "xorshift64star", "crush", 8);
    std::ostringstream out;
    ASSERT_TRUE(run_master(cfg, out).completed);
    EXPECT_TRUE(verify_equivalence(cfg));

    auto other_seed = cfg;
    other_seed.generator.seed = 9;
    EXPECT_FALSE(verify_equivalence(other_seed));

    const auto path = dir / "out" / "results.txt";
    auto text = slurp(path);
    const auto at = text.find("p-value") == std::string::npos ? text.size() / 2 : text.size() / 2;
    text[at] = text[at] == '1' ? '2' : '1';
    spit(path, text);
    EXPECT_FALSE(verify_equivalence(cfg));

    std::filesystem::remove(path);
    EXPECT_THROW(verify_equivalence(cfg), IoError);
}
