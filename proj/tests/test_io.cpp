#include "csdflow/axisym.hpp"
#include "csdflow/config.hpp"
#include "csdflow/trajectory.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace csdflow;
namespace fs = std::filesystem;

namespace {

/// Fresh scratch directory per test, removed afterwards.
class IoTest : public ::testing::Test
{
protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        m_dir = fs::temp_directory_path() / (std::string("csdflow_io_") + info->test_suite_name() + "_" + info->name());
        fs::remove_all(m_dir);
        fs::create_directories(m_dir);
    }

    void TearDown() override { fs::remove_all(m_dir); }

    fs::path path(const std::string& name) const { return m_dir / name; }

    fs::path write(const std::string& name, const std::string& text) const
    {
        const fs::path p = path(name);
        std::ofstream(p) << text;
        return p;
    }

    /// Runs the command-line tool with stdout and stderr captured in `log`.
    int cli(const std::string& args, std::string* log = nullptr) const
    {
        const fs::path out = path("cli.log");
        const std::string cmd = std::string("\"") + CSDFLOW_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2>&1";
        const int status = std::system(cmd.c_str());
        if (log) {
            std::ifstream in(out);
            std::stringstream ss;
            ss << in.rdbuf();
            *log = ss.str();
        }
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    ErrorCode config_error(const std::string& text) const
    {
        try {
            load_run_config(write("bad.ini", text).string());
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    }

private:
    fs::path m_dir;
};

const std::string sphere_config = R"([mesh]
kind = icosphere
level = 2

[scheme]
dt_init = 1e-3
dt_max = 1e-3
t_end = 0.03

[monitor]
sample_every = 1
snapshot_every = 1

[output]
dir = run
)";

} // namespace

TEST_F(IoTest, ConfigReadsEverySection)
{
    const RunConfig cfg = load_run_config(write("run.ini", R"([mesh]
kind = dumbbell
bulb = 1
neck = 0.15
length = 1.1
res = 24

[constraint]
kind = AbsMeanH
denom_eps = 1e-6

[scheme]
kind = SemiImplicit
order = 2
dt_init = 1e-6
t_end = 1e-3
denominator_policy = throw

[monitor]
sample_every = 5
snapshot_every = 20

[diagnostics]
rho = 0.05 0.1
eps0 = 6.28
inequalities = on

[output]
dir = out/here
seed = 7
)")
                                                  .string());
    ASSERT_TRUE(cfg.primitive.has_value());
    const auto& d = std::get<Dumbbell>(*cfg.primitive);
    EXPECT_EQ(d.neck_radius, 0.15);
    EXPECT_EQ(d.resolution, 24);
    EXPECT_EQ(cfg.constraint.kind, ConstraintKind::AbsMeanH);
    EXPECT_EQ(cfg.constraint.denom_eps, 1e-6);
    EXPECT_EQ(cfg.scheme.order, 2);
    EXPECT_EQ(cfg.scheme.denominator_policy, DenominatorPolicy::Throw);
    EXPECT_EQ(cfg.monitor.snapshot_every, 20);
    EXPECT_EQ(cfg.diagnostics.rho, (std::vector<double>{0.05, 0.1}));
    EXPECT_TRUE(cfg.diagnostics.inequality_checks);
    EXPECT_EQ(cfg.seed, 7u);
    // relative paths are taken from the config file's directory
    EXPECT_EQ(fs::path(cfg.output_dir), path("out/here"));
}

TEST_F(IoTest, ConfigMeshFileIsResolved)
{
    write_obj(path("m.obj").string(), generate_primitive(Icosphere{1, 1.0}));
    const RunConfig cfg = load_run_config(write("run.ini", "[mesh]\nkind = file\npath = m.obj\n").string());
    EXPECT_EQ(cfg.load_mesh().num_vertices(), 42);
    EXPECT_EQ(config_error("[mesh]\nkind = file\npath = absent.obj\n"), ErrorCode::ConfigInvalid);
    EXPECT_EQ(config_error("[mesh]\nkind = file\n"), ErrorCode::ConfigInvalid);
}

TEST_F(IoTest, ConfigRejectsBadValues)
{
    const std::string mesh = "[mesh]\nkind = icosphere\n";
    EXPECT_EQ(config_error("[constraint]\nkind = SD\n"), ErrorCode::ConfigInvalid);
    EXPECT_EQ(config_error("[mesh]\nkind = cone\n"), ErrorCode::ConfigInvalid);
    EXPECT_EQ(config_error(mesh + "level = three\n"), ErrorCode::ConfigInvalid);
    EXPECT_EQ(config_error(mesh + "[constraint]\nkind = Willmore\n"), ErrorCode::ConfigInvalid);
    EXPECT_EQ(config_error(mesh + "[constraint]\nkind = TimeFunction\n"), ErrorCode::ConfigInvalid);
    EXPECT_EQ(config_error(mesh + "[scheme]\ndenominator_policy = ignore\n"), ErrorCode::ConfigInvalid);
    EXPECT_EQ(config_error(mesh + "[scheme]\nreject_displacement = 0.01\ngrow_displacement = 0.02\n"), ErrorCode::ConfigInvalid);
    EXPECT_EQ(config_error(mesh + "[scheme]\ndt_init = nan\n"), ErrorCode::ConfigInvalid);
    EXPECT_EQ(config_error(mesh + "[monitor]\nsample_every = 0\n"), ErrorCode::ConfigInvalid);
    EXPECT_EQ(config_error(mesh + "[diagnostics]\nrho = 0.1 -2\n"), ErrorCode::ConfigInvalid);
    EXPECT_EQ(config_error(mesh + "[diagnostics]\ninequalities = maybe\n"), ErrorCode::ConfigInvalid);
    EXPECT_EQ(config_error("[mesh\nkind = icosphere\n"), ErrorCode::ConfigInvalid);
    try {
        load_run_config(path("absent.ini").string());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid);
    }
}

TEST_F(IoTest, TrajectoryRoundTrip)
{
    SchemeSpec spec;
    spec.dt_init = spec.dt_max = 1e-3;
    spec.t_end = 5e-3;
    MonitorConfig mon;
    mon.snapshot_every = 2;
    const Trajectory tr = run(generate_primitive(Ellipsoid{1.0, 0.9, 1.2, 2}), spec, ConstraintSpec{}, mon);
    write_trajectory(path("traj").string(), tr.monitors, tr.snapshots);

    const StoredTrajectory back = read_trajectory(path("traj").string());
    ASSERT_EQ(back.monitors.size(), tr.monitors.size());
    for (size_t i = 0; i < tr.monitors.size(); ++i) {
        EXPECT_EQ(to_csv_row(back.monitors[i]), to_csv_row(tr.monitors[i]));
    }
    EXPECT_EQ(back.stop(), StopReason::Completed);
    ASSERT_EQ(back.snapshots.size(), tr.snapshots.size());
    for (size_t i = 0; i < tr.snapshots.size(); ++i) {
        EXPECT_EQ(back.snapshots[i].step, tr.snapshots[i].step);
        EXPECT_EQ(back.snapshots[i].t, tr.snapshots[i].t);
        EXPECT_EQ(back.snapshots[i].mesh.faces(), tr.snapshots[i].mesh.faces());
        const auto& a = back.snapshots[i].mesh.vertices();
        const auto& b = tr.snapshots[i].mesh.vertices();
        for (size_t v = 0; v < a.size(); ++v) EXPECT_LE((a[v] - b[v]).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST_F(IoTest, CorruptTrajectoryIsIoError)
{
    auto code_of = [](const fs::path& dir) {
        try {
            read_trajectory(dir.string());
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    EXPECT_EQ(code_of(path("absent")), ErrorCode::IoError);

    SchemeSpec spec;
    spec.dt_init = spec.dt_max = 1e-3;
    spec.t_end = 2e-3;
    MonitorConfig mon;
    mon.snapshot_every = 1;
    const Trajectory tr = run(generate_primitive(Icosphere{1, 1.0}), spec, ConstraintSpec{}, mon);
    const fs::path dir = path("traj");
    write_trajectory(dir.string(), tr.monitors, tr.snapshots);
    ASSERT_NO_THROW(read_trajectory(dir.string()));

    fs::remove(dir / "snapshots" / snapshot_file_name(tr.snapshots.back().step));
    EXPECT_EQ(code_of(dir), ErrorCode::IoError);
    write_trajectory(dir.string(), tr.monitors, tr.snapshots);
    std::ofstream(dir / "snapshots.csv") << "step;t;file\n";
    EXPECT_EQ(code_of(dir), ErrorCode::IoError);
    write_trajectory(dir.string(), tr.monitors, tr.snapshots);
    std::ofstream(dir / "monitors.csv") << "t,dt\n1,oops\n";
    EXPECT_EQ(code_of(dir), ErrorCode::IoError);
}

TEST_F(IoTest, CliMeshGen)
{
    std::string log;
    ASSERT_EQ(cli("mesh gen --kind icosphere --level 4 --out " + path("s.obj").string(), &log), 0) << log;
    EXPECT_NE(log.find("V 2562"), std::string::npos) << log;
    EXPECT_EQ(read_mesh(path("s.obj").string()).num_vertices(), 2562);

    ASSERT_EQ(cli("mesh gen --kind dumbbell --neck 0.12 --length 1.2 --res 96 --out " + path("d.obj").string(), &log), 0) << log;
    EXPECT_NE(log.find("chi 2"), std::string::npos) << log;
    ASSERT_EQ(cli("mesh gen --kind torus --R 2 --r 1 --res 32 --out " + path("t.obj").string(), &log), 0) << log;
    EXPECT_NE(log.find("chi 0"), std::string::npos) << log;

    EXPECT_EQ(cli("mesh gen --kind cone --out " + path("c.obj").string()), 2);
    EXPECT_EQ(cli("mesh gen --kind icosphere --level -1 --out " + path("c.obj").string()), 2);
}

TEST_F(IoTest, CliExitCodes)
{
    EXPECT_EQ(cli("flow run " + write("run.ini", "[mesh]\nkind = file\npath = absent.obj\n").string()), 3);
    EXPECT_EQ(cli("flow run " + path("absent.ini").string()), 3);
    EXPECT_EQ(cli("analyze " + path("nothing").string()), 5);
    fs::create_directories(path("empty"));
    EXPECT_EQ(cli("analyze " + path("empty").string()), 5);
}

TEST_F(IoTest, CliSphereRunAndAnalysis)
{
    std::string log;
    ASSERT_EQ(cli("flow run " + write("sphere.ini", sphere_config).string(), &log), 0) << log;
    EXPECT_NE(log.find("stop Completed"), std::string::npos) << log;
    const std::vector<MonitorRecord> rows = read_monitor_csv((path("run") / "monitors.csv").string());
    ASSERT_GE(rows.size(), 30u);
    for (const MonitorRecord& r : rows) EXPECT_NEAR(r.vol / rows.front().vol, 1.0, 1e-3);

    ASSERT_EQ(cli("analyze " + path("run").string() + " --rho 0.5 --check all", &log), 0) << log;
    EXPECT_NE(log.find("NoConcentration"), std::string::npos) << log;
    EXPECT_NE(log.find("all inequality checks hold"), std::string::npos) << log;
    EXPECT_TRUE(fs::exists(path("run") / "concentration.csv"));
    EXPECT_TRUE(fs::exists(path("run") / "lifespan.csv"));
}

TEST_F(IoTest, CliOracleSphere)
{
    std::string log;
    ASSERT_EQ(cli("oracle run --profile sphere --N 256 --t-end 0.01 --out " + path("oracle").string(), &log), 0) << log;
    EXPECT_NE(log.find("max radial deviation"), std::string::npos) << log;
    EXPECT_TRUE(fs::exists(path("oracle") / "profile_final.csv"));
    EXPECT_EQ(read_profile_csv((path("oracle") / "profile_final.csv").string()).intervals(), 256);
}

TEST_F(IoTest, CliInequalityChecks)
{
    std::string log;
    ASSERT_EQ(cli("check inequalities --perturbed 3 --seed 2 --out " + path("ineq.csv").string(), &log), 0) << log;
    EXPECT_NE(log.find("all ratios within bounds"), std::string::npos) << log;
    EXPECT_TRUE(fs::exists(path("ineq.csv")));
}
