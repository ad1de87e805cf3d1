#pragma once

#include "csdflow/integrator.hpp"
#include "csdflow/obj_io.hpp"
#include "csdflow/primitives.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>

namespace csdflow {

struct DiagnosticsConfig
{
    std::vector<double> rho;   ///< radii for concentration reports
    double eps0 = 0.0;         ///< threshold for lifespan radii; 0 disables
    double p = 2.0;
    bool inequality_checks = false;
};

/// Everything a `flow run` needs. Loaded from an INI file:
///
///     [mesh]        kind = icosphere | ellipsoid | dumbbell | torus | file, plus its parameters
///     [constraint]  kind = SD | MeanH | AbsMeanH | GaussMixed | TimeFunction, expression or table
///     [scheme]      integrator settings (names as in SchemeSpec)
///     [monitor]     sample_every, snapshot_every
///     [diagnostics] rho = "0.1 0.2", eps0, p, inequalities = on | off
///     [output]      dir, seed
struct RunConfig
{
    std::optional<PrimitiveSpec> primitive;
    std::string mesh_path;
    ConstraintSpec constraint;
    SchemeSpec scheme;
    MonitorConfig monitor;
    DiagnosticsConfig diagnostics;
    std::string output_dir = "out";
    std::uint64_t seed = 0;

    TriMesh load_mesh() const { return primitive ? generate_primitive(*primitive) : read_mesh(mesh_path); }
};

namespace detail {

inline std::string lowercase(std::string s)
{
    for (char& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline bool parse_switch(const std::string& key, const std::string& v)
{
    const std::string s = lowercase(v);
    if (s == "on" || s == "true" || s == "yes" || s == "1") return true;
    if (s == "off" || s == "false" || s == "no" || s == "0") return false;
    fail(ErrorCode::ConfigInvalid, key + ": expected on/off, got '" + v + "'");
}

/// Typed lookups that turn every parse failure into ConfigInvalid with the key in the message.
class Section
{
public:
    Section(const boost::property_tree::ptree& tree, std::string name)
        : m_name(std::move(name))
    {
        if (auto child = tree.get_child_optional(m_name)) m_tree = *child;
    }

    bool has(const std::string& key) const { return bool(m_tree.get_optional<std::string>(key)); }

    std::string text(const std::string& key, const std::string& fallback) const
    {
        return m_tree.get<std::string>(key, fallback);
    }

    template <typename T>
    T number(const std::string& key, T fallback) const
    {
        const auto raw = m_tree.get_optional<std::string>(key);
        if (!raw) return fallback;
        std::istringstream in(*raw);
        T v{};
        if (!(in >> v) || !(in >> std::ws).eof()) {
            fail(ErrorCode::ConfigInvalid, "[" + m_name + "] " + key + ": not a number: '" + *raw + "'");
        }
        if constexpr (std::is_floating_point_v<T>) {
            if (!std::isfinite(v)) fail(ErrorCode::ConfigInvalid, "[" + m_name + "] " + key + " is not finite");
        }
        return v;
    }

    std::vector<double> list(const std::string& key) const
    {
        std::vector<double> out;
        const auto raw = m_tree.get_optional<std::string>(key);
        if (!raw) return out;
        std::string s = *raw;
        std::replace(s.begin(), s.end(), ',', ' ');
        std::istringstream in(s);
        for (std::string tok; in >> tok;) {
            try {
                out.push_back(std::stod(tok));
            } catch (const std::exception&) {
                fail(ErrorCode::ConfigInvalid, "[" + m_name + "] " + key + ": bad list entry '" + tok + "'");
            }
        }
        return out;
    }

    const std::string& name() const { return m_name; }

private:
    std::string m_name;
    boost::property_tree::ptree m_tree;
};

inline PrimitiveSpec parse_primitive(const Section& m, const std::string& kind)
{
    if (kind == "icosphere") return Icosphere{m.number("level", 3), m.number("radius", 1.0)};
    if (kind == "ellipsoid") {
        return Ellipsoid{m.number("a", 1.0), m.number("b", 1.0), m.number("c", 1.0), m.number("level", 3)};
    }
    if (kind == "dumbbell") {
        return Dumbbell{m.number("bulb", 1.0), m.number("neck", 0.2), m.number("length", 1.0), m.number("res", 64)};
    }
    if (kind == "torus") return Torus{m.number("R", 2.0), m.number("r", 1.0), m.number("res", 32)};
    fail(ErrorCode::ConfigInvalid, "[mesh] kind: unknown primitive '" + kind + "'");
}

} // namespace detail

/// Parses and validates. Relative mesh and table paths resolve against the config file's folder.
inline RunConfig load_run_config(const std::string& path)
{
    namespace fs = std::filesystem;
    if (!fs::exists(path)) fail(ErrorCode::ConfigInvalid, "config file " + path + " does not exist");
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(path, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        fail(ErrorCode::ConfigInvalid, e.what());
    }
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).string(); };

    RunConfig cfg;
    const detail::Section mesh(tree, "mesh");
    const std::string kind = detail::lowercase(mesh.text("kind", ""));
    if (kind.empty()) fail(ErrorCode::ConfigInvalid, "[mesh] kind is required");
    if (kind == "file") {
        if (!mesh.has("path")) fail(ErrorCode::ConfigInvalid, "[mesh] kind = file needs a path");
        cfg.mesh_path = resolve(mesh.text("path", ""));
        if (!fs::exists(cfg.mesh_path)) fail(ErrorCode::ConfigInvalid, "mesh file " + cfg.mesh_path + " does not exist");
    } else {
        cfg.primitive = detail::parse_primitive(mesh, kind);
    }

    const detail::Section con(tree, "constraint");
    cfg.constraint.kind = parse_constraint_kind(con.text("kind", "SD"));
    cfg.constraint.denom_eps = con.number("denom_eps", 0.0);
    if (cfg.constraint.kind == ConstraintKind::TimeFunction) {
        if (con.has("expression")) {
            cfg.constraint.time_function = std::make_shared<TimeFunction>(TimeFunction::expression(con.text("expression", "")));
        } else if (con.has("table")) {
            const std::string table = resolve(con.text("table", ""));
            if (!fs::exists(table)) fail(ErrorCode::ConfigInvalid, "time table " + table + " does not exist");
            cfg.constraint.time_function = std::make_shared<TimeFunction>(TimeFunction::from_csv(table));
        } else {
            fail(ErrorCode::ConfigInvalid, "[constraint] TimeFunction needs an expression or a table");
        }
    }

    const detail::Section sch(tree, "scheme");
    SchemeSpec& s = cfg.scheme;
    s.kind = parse_scheme_kind(sch.text("kind", "SemiImplicit"));
    s.dt_init = sch.number("dt_init", s.dt_init);
    s.dt_min = sch.number("dt_min", s.dt_min);
    s.dt_max = sch.number("dt_max", s.dt_max);
    s.safety = sch.number("safety", s.safety);
    s.explicit_k4 = sch.number("k4", s.explicit_k4);
    s.max_steps = sch.number("max_steps", s.max_steps);
    s.t_end = sch.number("t_end", s.t_end);
    s.min_edge_frac = sch.number("min_edge_frac", s.min_edge_frac);
    s.max_curvature_factor = sch.number("max_curvature_factor", s.max_curvature_factor);
    s.reject_displacement = sch.number("reject_displacement", s.reject_displacement);
    s.grow_displacement = sch.number("grow_displacement", s.grow_displacement);
    s.grow_factor = sch.number("grow_factor", s.grow_factor);
    s.order = sch.number("order", s.order);
    s.tangential_smoothing = sch.number("tangential_smoothing", s.tangential_smoothing);
    const std::string policy = detail::lowercase(sch.text("denominator_policy", "stop"));
    if (policy == "stop") {
        s.denominator_policy = DenominatorPolicy::Stop;
    } else if (policy == "throw") {
        s.denominator_policy = DenominatorPolicy::Throw;
    } else {
        fail(ErrorCode::ConfigInvalid, "[scheme] denominator_policy must be stop or throw");
    }
    if (!(s.reject_displacement > 0 && s.grow_displacement >= 0 && s.grow_displacement < s.reject_displacement)) {
        fail(ErrorCode::ConfigInvalid, "[scheme] need 0 <= grow_displacement < reject_displacement");
    }
    if (!(s.grow_factor >= 1)) fail(ErrorCode::ConfigInvalid, "[scheme] grow_factor must be at least 1");
    s.validate();

    const detail::Section mon(tree, "monitor");
    cfg.monitor.sample_every = mon.number("sample_every", 1);
    cfg.monitor.snapshot_every = mon.number("snapshot_every", 0);
    if (cfg.monitor.sample_every < 1 || cfg.monitor.snapshot_every < 0) {
        fail(ErrorCode::ConfigInvalid, "[monitor] sample_every must be >= 1 and snapshot_every >= 0");
    }

    const detail::Section diag(tree, "diagnostics");
    cfg.diagnostics.rho = diag.list("rho");
    for (double r : cfg.diagnostics.rho) {
        if (!(r > 0)) fail(ErrorCode::ConfigInvalid, "[diagnostics] rho entries must be positive");
    }
    cfg.diagnostics.eps0 = diag.number("eps0", 0.0);
    cfg.diagnostics.p = diag.number("p", 2.0);
    cfg.diagnostics.inequality_checks = detail::parse_switch("[diagnostics] inequalities", diag.text("inequalities", "off"));
    if (cfg.diagnostics.eps0 < 0 || cfg.diagnostics.p < 1) {
        fail(ErrorCode::ConfigInvalid, "[diagnostics] need eps0 >= 0 and p >= 1");
    }

    const detail::Section out(tree, "output");
    cfg.output_dir = resolve(out.text("dir", "out"));
    cfg.seed = out.number<std::uint64_t>("seed", 0);
    return cfg;
}

} // namespace csdflow
