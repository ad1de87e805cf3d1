// csdflow: command-line driver for mesh generation, flow runs, trajectory analysis, the
// axisymmetric reference solver and the inequality checks.
//
//   csdflow mesh gen --kind icosphere --level 4 --radius 1 --out sphere.obj
//   csdflow flow run run.ini
//   csdflow analyze out/ --eps0 6.28 --rho 0.1 0.2
//   csdflow oracle run --profile dumbbell --neck 0.12 --length 1.2 --N 2048 --out oracle/
//   csdflow check inequalities --perturbed 100 --seed 1
//
// Exit codes: 0 success, 1 other failure, 2 invalid mesh spec, 3 invalid config,
// 4 solver failure, 5 missing or corrupt trajectory.

#include "csdflow/csdflow.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>

using namespace csdflow;
namespace fs = std::filesystem;

namespace {

enum Exit { Ok = 0, Failure = 1, BadMesh = 2, BadConfig = 3, SolverFailed = 4, BadTrajectory = 5 };

struct MeshArgs
{
    std::string kind;
    int level = 3;
    double radius = 1.0;
    double a = 1.0, b = 1.0, c = 1.0;
    double bulb = 1.0, neck = 0.2, length = 1.0;
    double major = 2.0, minor = 1.0;
    int res = 64;
    std::string out;
};

void print_mesh_summary(std::ostream& os, const TriMesh& mesh)
{
    os << "V " << mesh.num_vertices() << "  E " << mesh.num_edges() << "  F " << mesh.num_faces() << "  chi "
       << mesh.euler_characteristic() << '\n'
       << "area " << format_number(surface_area(mesh)) << "  volume " << format_number(enclosed_volume(mesh)) << '\n';
}

int cmd_mesh_gen(const MeshArgs& m)
{
    PrimitiveSpec spec;
    if (m.kind == "icosphere") {
        spec = Icosphere{m.level, m.radius};
    } else if (m.kind == "ellipsoid") {
        spec = Ellipsoid{m.a, m.b, m.c, m.level};
    } else if (m.kind == "dumbbell") {
        spec = Dumbbell{m.bulb, m.neck, m.length, m.res};
    } else if (m.kind == "torus") {
        spec = Torus{m.major, m.minor, m.res};
    } else {
        std::cerr << "mesh gen: unknown kind '" << m.kind << "' (icosphere, ellipsoid, dumbbell, torus)\n";
        return BadMesh;
    }
    TriMesh mesh;
    try {
        mesh = generate_primitive(spec);
    } catch (const Error& e) {
        std::cerr << "mesh gen: " << e.what() << '\n';
        return BadMesh;
    }
    write_obj(m.out, mesh);
    std::cout << "wrote " << m.out << '\n';
    print_mesh_summary(std::cout, mesh);
    return Ok;
}

/// Concentration reports for each snapshot and radius, and the lifespan fit.
void analyze_snapshots(const std::vector<Snapshot>& snapshots, const std::vector<double>& rho, const std::vector<double>& eps0,
                       double p, const fs::path& out_dir, std::ostream& log)
{
    if (!rho.empty()) {
        std::ofstream csv(out_dir / "concentration.csv");
        if (!csv) fail(ErrorCode::IoError, "cannot write concentration.csv");
        csv << "step,t,rho,eta,total,cx,cy,cz\n";
        for (const Snapshot& s : snapshots) {
            const GeometryCache cache = compute_geometry(s.mesh);
            for (double r : rho) {
                const ConcentrationReport c = concentration(s.mesh, cache, r, p);
                const Vec3& x = c.argmax_center();
                csv << s.step << ',' << format_number(s.t) << ',' << format_number(r) << ',' << format_number(c.eta) << ','
                    << format_number(c.total) << ',' << format_number(x.x()) << ',' << format_number(x.y()) << ','
                    << format_number(x.z()) << '\n';
            }
        }
        log << "concentration: " << snapshots.size() << " snapshots x " << rho.size() << " radii -> concentration.csv\n";
    }
    if (eps0.empty()) return;
    LifespanChoice choice;
    try {
        choice = fit_lifespan(snapshots, eps0, p);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::InsufficientSamples) throw;
        log << "lifespan fit: " << e.what() << '\n';
        return;
    }
    std::ofstream csv(out_dir / "lifespan.csv");
    if (!csv) fail(ErrorCode::IoError, "cannot write lifespan.csv");
    csv << "t,rho_star,rho_upper,eta_at_star,eta_at_upper\n";
    for (size_t i = 0; i < choice.series.t.size(); ++i) {
        const LifespanRadius& r = choice.series.radius[i];
        csv << format_number(choice.series.t[i]) << ',' << format_number(r.rho_star) << ',' << format_number(r.rho_upper) << ','
            << format_number(r.eta_at_star) << ',' << format_number(r.eta_at_upper) << '\n';
    }
    const LifespanEstimate& f = choice.fit;
    if (f.no_concentration) {
        log << "lifespan fit: NoConcentration (eps0 " << format_number(f.eps0) << ", rho* does not shrink)\n";
        return;
    }
    log << "lifespan fit: eps0 " << format_number(f.eps0) << "  c " << format_number(f.c) << "  T_est " << format_number(f.t_est)
        << "  R^2 " << format_number(f.r_squared) << "  T_lower " << format_number(f.t_lower) << "  samples " << f.samples << '\n';
}

int cmd_flow_run(const std::string& config_path)
{
    RunConfig cfg;
    TriMesh mesh;
    try {
        cfg = load_run_config(config_path);
        mesh = cfg.load_mesh();
        std::error_code ec;
        fs::create_directories(cfg.output_dir, ec);
        if (ec) fail(ErrorCode::ConfigInvalid, "output directory " + cfg.output_dir + " is not writable: " + ec.message());
    } catch (const Error& e) {
        std::cerr << "flow run: " << e.what() << '\n';
        return BadConfig;
    }

    Trajectory traj;
    try {
        traj = run(std::move(mesh), cfg.scheme, cfg.constraint, cfg.monitor);
    } catch (const Error& e) {
        std::cerr << "flow run: " << e.what() << '\n';
        return e.code() == ErrorCode::ConfigInvalid || e.code() == ErrorCode::UnboundedTimeFunction ? BadConfig : SolverFailed;
    }
    write_trajectory(cfg.output_dir, traj.monitors, traj.snapshots);

    std::ofstream summary(fs::path(cfg.output_dir) / "summary.txt");
    auto report = [&](std::ostream& os) {
        const MonitorRecord& first = traj.monitors.front();
        const MonitorRecord& last = traj.monitors.back();
        os << "stop " << to_string(traj.stop) << (traj.stop_detail.empty() ? "" : " (" + traj.stop_detail + ")") << '\n'
           << "steps " << traj.final_state->step_index << "  t " << format_number(last.t) << '\n'
           << "volume " << format_number(first.vol) << " -> " << format_number(last.vol) << '\n'
           << "area " << format_number(first.area) << " -> " << format_number(last.area) << '\n'
           << "seed " << cfg.seed << '\n';
    };
    report(std::cout);
    report(summary);
    std::vector<double> eps0;
    if (cfg.diagnostics.eps0 > 0) eps0.push_back(cfg.diagnostics.eps0);
    analyze_snapshots(traj.snapshots, cfg.diagnostics.rho, eps0, cfg.diagnostics.p, cfg.output_dir, std::cout);
    if (cfg.diagnostics.inequality_checks) {
        const Snapshot& last = traj.snapshots.back();
        for (const InequalityRow& r : check_mesh_inequalities("final", last.mesh)) {
            std::cout << r.check << "  ratio " << format_number(r.ratio) << (r.holds ? "  holds" : "  VIOLATED") << '\n';
        }
    }
    return traj.stop == StopReason::SolverFailure ? SolverFailed : Ok;
}

int cmd_analyze(const std::string& dir, std::vector<double> eps0, const std::vector<double>& rho, double p, const std::string& check)
{
    StoredTrajectory traj;
    try {
        traj = read_trajectory(dir);
    } catch (const Error& e) {
        std::cerr << "analyze: " << e.what() << '\n';
        return BadTrajectory;
    }
    std::cout << "trajectory: " << traj.monitors.size() << " monitor rows, " << traj.snapshots.size() << " snapshots, stop "
              << to_string(traj.stop()) << '\n';
    if (eps0.empty()) {
        // Default thresholds: fractions of the initial total curvature.
        const GeometryCache c0 = compute_geometry(traj.snapshots.front().mesh);
        const double total = integrate(c0.mass(), c0.A2);
        eps0 = {0.125 * total, 0.25 * total, 0.5 * total};
    }
    analyze_snapshots(traj.snapshots, rho, eps0, p, dir, std::cout);
    if (check == "all") {
        bool all = true;
        for (const Snapshot* s : {&traj.snapshots.front(), &traj.snapshots.back()}) {
            for (const InequalityRow& r : check_mesh_inequalities("step " + std::to_string(s->step), s->mesh)) {
                all = all && r.holds;
                std::cout << r.mesh << "  " << r.check << "  ratio " << format_number(r.ratio) << (r.holds ? "" : "  VIOLATED") << '\n';
            }
        }
        std::cout << (all ? "all inequality checks hold\n" : "some inequality checks are violated\n");
    }
    return Ok;
}

struct OracleArgs
{
    std::string profile = "dumbbell";
    double radius = 1.0, a = 1.0, c = 1.4;
    double bulb = 1.0, neck = 0.12, length = 1.2;
    int intervals = 2048;
    AxisymScheme scheme;
    std::string constraint = "SD";
    std::string out = "oracle";
};

int cmd_oracle_run(const OracleArgs& o)
{
    std::optional<ProfileCurve> curve;
    ConstraintSpec spec;
    try {
        if (o.profile == "sphere") {
            curve = sphere_profile(o.radius);
        } else if (o.profile == "spheroid") {
            curve = spheroid_profile(o.a, o.c);
        } else if (o.profile == "dumbbell") {
            curve = DumbbellGeometry::solve(o.bulb, o.neck, o.length).curve();
        } else {
            std::cerr << "oracle run: unknown profile '" << o.profile << "' (sphere, spheroid, dumbbell)\n";
            return BadMesh;
        }
        spec.kind = parse_constraint_kind(o.constraint);
        if (spec.kind == ConstraintKind::TimeFunction) fail(ErrorCode::ConfigInvalid, "oracle run takes SD, MeanH, AbsMeanH or GaussMixed");
    } catch (const Error& e) {
        std::cerr << "oracle run: " << e.what() << '\n';
        return e.code() == ErrorCode::ConfigInvalid ? BadConfig : BadMesh;
    }
    const AxisymTrajectory traj = axisym_run(sample_profile(*curve, o.intervals), o.scheme, spec);
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (ec) {
        std::cerr << "oracle run: cannot create " << o.out << '\n';
        return BadConfig;
    }
    write_monitor_csv((fs::path(o.out) / "monitors.csv").string(), traj.monitors);
    write_profile_csv((fs::path(o.out) / "profile_final.csv").string(), traj.final_profile);
    std::ofstream neck(fs::path(o.out) / "neck.csv");
    neck << "t,radius,z\n";
    for (const NeckSample& s : traj.neck) {
        if (std::isfinite(s.radius)) neck << format_number(s.t) << ',' << format_number(s.radius) << ',' << format_number(s.z) << '\n';
    }
    std::cout << "stop " << to_string(traj.stop) << (traj.stop_detail.empty() ? "" : " (" + traj.stop_detail + ")") << '\n'
              << "steps " << traj.steps << "  t " << format_number(traj.monitors.back().t) << '\n';
    if (traj.stop == StopReason::PinchDetected) std::cout << "pinch time " << format_number(traj.pinch_time) << '\n';
    if (o.profile == "sphere") std::cout << "max radial deviation " << format_number(traj.max_radial_deviation) << '\n';
    return traj.stop == StopReason::SolverFailure ? SolverFailed : Ok;
}

int cmd_check_inequalities(int perturbed, std::uint64_t seed, double amplitude, const std::string& out)
{
    std::vector<NamedMesh> meshes = primitive_catalogue();
    std::mt19937_64 rng(seed);
    for (int k = 0; k < perturbed; ++k) {
        meshes.push_back({"perturbed_icosphere#" + std::to_string(k), perturbed_icosphere(3, amplitude, rng)});
    }
    std::vector<InequalityRow> rows;
    std::vector<std::vector<InequalityRow>> per_mesh(meshes.size());
    parallel_for(meshes.size(), [&](size_t i) { per_mesh[i] = check_mesh_inequalities(meshes[i].name, meshes[i].mesh); });
    for (auto& r : per_mesh) rows.insert(rows.end(), r.begin(), r.end());

    std::ofstream csv;
    if (!out.empty()) {
        csv.open(out);
        if (!csv) fail(ErrorCode::IoError, "cannot write " + out);
        csv << "mesh,check,lhs,rhs,ratio,holds\n";
    }
    std::map<std::string, std::pair<double, int>> worst; // check family -> (largest ratio, violations)
    for (const InequalityRow& r : rows) {
        if (csv.is_open()) {
            csv << r.mesh << ',' << r.check << ',' << format_number(r.lhs) << ',' << format_number(r.rhs) << ','
                << format_number(r.ratio) << ',' << (r.holds ? 1 : 0) << '\n';
        }
        const std::string family = r.check.substr(0, r.check.find('['));
        auto& w = worst[family];
        w.first = std::max(w.first, r.ratio);
        if (!r.holds) ++w.second;
    }
    bool all = true;
    for (const auto& [family, w] : worst) {
        std::cout << family << ": largest ratio " << format_number(w.first) << ", violations " << w.second << '\n';
        all = all && w.second == 0;
    }
    std::cout << meshes.size() << " meshes: " << (all ? "all ratios within bounds" : "violations found") << '\n';
    return all ? Ok : Failure;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Constrained surface diffusion flow on triangle meshes"};
    app.require_subcommand(1);

    auto* mesh = app.add_subcommand("mesh", "Mesh utilities");
    mesh->require_subcommand(1);
    auto* gen = mesh->add_subcommand("gen", "Generate a primitive mesh as OBJ");
    MeshArgs margs;
    gen->add_option("--kind", margs.kind, "icosphere | ellipsoid | dumbbell | torus")->required();
    gen->add_option("--level", margs.level, "subdivision level (icosphere, ellipsoid)");
    gen->add_option("--radius", margs.radius, "sphere radius");
    gen->add_option("--a", margs.a, "ellipsoid semi-axis along x");
    gen->add_option("--b", margs.b, "ellipsoid semi-axis along y");
    gen->add_option("--c", margs.c, "ellipsoid semi-axis along z");
    gen->add_option("--bulb", margs.bulb, "dumbbell bulb radius");
    gen->add_option("--neck", margs.neck, "dumbbell neck radius");
    gen->add_option("--length", margs.length, "dumbbell neck length");
    gen->add_option("--R", margs.major, "torus major radius");
    gen->add_option("--r", margs.minor, "torus minor radius");
    gen->add_option("--res", margs.res, "segments around the axis (dumbbell) or per circle (torus)");
    gen->add_option("--out", margs.out, "output OBJ path")->required();

    auto* flow = app.add_subcommand("flow", "Flow runs");
    flow->require_subcommand(1);
    auto* flow_run = flow->add_subcommand("run", "Run a flow from an INI config");
    std::string config_path;
    flow_run->add_option("config", config_path, "config file")->required();

    auto* analyze = app.add_subcommand("analyze", "Concentration and lifespan reports for a stored run");
    std::string traj_dir;
    std::vector<double> eps0, rho;
    double p = 2.0;
    std::string check = "none";
    analyze->add_option("dir", traj_dir, "run output directory")->required();
    analyze->add_option("--eps0", eps0, "curvature thresholds; the best-fitting one is reported");
    analyze->add_option("--rho", rho, "radii for concentration reports");
    analyze->add_option("--p", p, "curvature exponent");
    analyze->add_option("--check", check, "all | none")->check(CLI::IsMember({"all", "none"}));

    auto* oracle = app.add_subcommand("oracle", "Axisymmetric reference solver");
    oracle->require_subcommand(1);
    auto* oracle_run = oracle->add_subcommand("run", "Evolve a surface of revolution");
    OracleArgs oargs;
    oracle_run->add_option("--profile", oargs.profile, "sphere | spheroid | dumbbell");
    oracle_run->add_option("--radius", oargs.radius, "sphere radius");
    oracle_run->add_option("--a", oargs.a, "spheroid equatorial radius");
    oracle_run->add_option("--c", oargs.c, "spheroid polar radius");
    oracle_run->add_option("--bulb", oargs.bulb, "dumbbell bulb radius");
    oracle_run->add_option("--neck", oargs.neck, "dumbbell neck radius");
    oracle_run->add_option("--length", oargs.length, "dumbbell neck length");
    oracle_run->add_option("--N", oargs.intervals, "profile intervals");
    oracle_run->add_option("--alpha", oargs.scheme.alpha, "step size factor");
    oracle_run->add_option("--dt-max", oargs.scheme.dt_max, "largest step");
    oracle_run->add_option("--t-end", oargs.scheme.t_end, "end time");
    oracle_run->add_option("--pinch-radius", oargs.scheme.pinch_radius, "neck radius that counts as a pinch");
    oracle_run->add_option("--order", oargs.scheme.order, "time accuracy")->check(CLI::IsMember({1, 2}));
    oracle_run->add_option("--sample-every", oargs.scheme.sample_every, "monitor cadence in steps");
    oracle_run->add_option("--constraint", oargs.constraint, "SD | MeanH | AbsMeanH | GaussMixed");
    oracle_run->add_option("--out", oargs.out, "output directory");

    auto* checks = app.add_subcommand("check", "Inequality checks");
    checks->require_subcommand(1);
    auto* ineq = checks->add_subcommand("inequalities", "Run the inequality checkers on the primitive catalogue");
    int perturbed = 100;
    std::uint64_t seed = 1;
    double amplitude = 0.1;
    std::string ineq_out;
    ineq->add_option("--perturbed", perturbed, "number of perturbed icospheres");
    ineq->add_option("--seed", seed, "random seed for the perturbations");
    ineq->add_option("--amplitude", amplitude, "relative bump amplitude");
    ineq->add_option("--out", ineq_out, "CSV report path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        if (code != 0 && gen->parsed()) return BadMesh;
        return code;
    }

    try {
        if (gen->parsed()) return cmd_mesh_gen(margs);
        if (flow_run->parsed()) return cmd_flow_run(config_path);
        if (analyze->parsed()) return cmd_analyze(traj_dir, eps0, rho, p, check);
        if (oracle_run->parsed()) return cmd_oracle_run(oargs);
        if (ineq->parsed()) return cmd_check_inequalities(perturbed, seed, amplitude, ineq_out);
    } catch (const Error& e) {
        std::cerr << "csdflow: " << e.what() << '\n';
        return Failure;
    }
    return Failure;
}
