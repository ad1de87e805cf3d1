#pragma once

#include "csdflow/operators.hpp"

#include <cctype>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>

namespace csdflow {

enum class ConstraintKind { Zero, MeanH, AbsMeanH, GaussMixed, TimeFunction };

inline std::string_view to_string(ConstraintKind k)
{
    switch (k) {
    case ConstraintKind::Zero: return "Zero";
    case ConstraintKind::MeanH: return "MeanH";
    case ConstraintKind::AbsMeanH: return "AbsMeanH";
    case ConstraintKind::GaussMixed: return "GaussMixed";
    case ConstraintKind::TimeFunction: return "TimeFunction";
    }
    return "Unknown";
}

inline ConstraintKind parse_constraint_kind(std::string_view s)
{
    for (auto k : {ConstraintKind::Zero, ConstraintKind::MeanH, ConstraintKind::AbsMeanH, ConstraintKind::GaussMixed,
                   ConstraintKind::TimeFunction}) {
        if (s == to_string(k)) return k;
    }
    if (s == "SD" || s == "none") return ConstraintKind::Zero;
    fail(ErrorCode::ConfigInvalid, "unknown constraint kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------------------------
// Prescribed h(t)

namespace detail {

/// Recursive-descent evaluator for arithmetic over the variable t: + - * / ^, unary minus,
/// parentheses, the constants pi and e, and the functions sin cos tan exp log sqrt abs tanh.
class ExpressionParser
{
public:
    ExpressionParser(std::string_view text, double t)
        : m_text(text)
        , m_t(t)
    {}

    double parse()
    {
        const double v = expr();
        skip();
        if (m_pos != m_text.size()) error("unexpected '" + std::string(1, m_text[m_pos]) + "'");
        return v;
    }

private:
    [[noreturn]] void error(const std::string& what) const
    {
        fail(ErrorCode::ConfigInvalid, "expression '" + std::string(m_text) + "': " + what);
    }

    void skip()
    {
        while (m_pos < m_text.size() && std::isspace(static_cast<unsigned char>(m_text[m_pos]))) ++m_pos;
    }

    bool accept(char c)
    {
        skip();
        if (m_pos < m_text.size() && m_text[m_pos] == c) {
            ++m_pos;
            return true;
        }
        return false;
    }

    double expr()
    {
        double v = term();
        for (;;) {
            if (accept('+')) v += term();
            else if (accept('-')) v -= term();
            else return v;
        }
    }

    double term()
    {
        double v = unary();
        for (;;) {
            if (accept('*')) v *= unary();
            else if (accept('/')) v /= unary();
            else return v;
        }
    }

    double unary()
    {
        if (accept('-')) return -unary();
        if (accept('+')) return unary();
        return power();
    }

    double power()
    {
        const double base = primary();
        if (accept('^')) return std::pow(base, unary());
        return base;
    }

    double primary()
    {
        skip();
        if (accept('(')) {
            const double v = expr();
            if (!accept(')')) error("missing ')'");
            return v;
        }
        if (m_pos >= m_text.size()) error("unexpected end");
        const char c = m_text[m_pos];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            size_t used = 0;
            const double v = std::stod(std::string(m_text.substr(m_pos)), &used);
            m_pos += used;
            return v;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const size_t start = m_pos;
            while (m_pos < m_text.size() && std::isalnum(static_cast<unsigned char>(m_text[m_pos]))) ++m_pos;
            const std::string name(m_text.substr(start, m_pos - start));
            if (name == "t") return m_t;
            if (name == "pi") return std::numbers::pi;
            if (name == "e") return std::numbers::e;
            if (!accept('(')) error("unknown symbol '" + name + "'");
            const double a = expr();
            if (!accept(')')) error("missing ')' after " + name);
            if (name == "sin") return std::sin(a);
            if (name == "cos") return std::cos(a);
            if (name == "tan") return std::tan(a);
            if (name == "exp") return std::exp(a);
            if (name == "log") return std::log(a);
            if (name == "sqrt") return std::sqrt(a);
            if (name == "abs") return std::abs(a);
            if (name == "tanh") return std::tanh(a);
            error("unknown function '" + name + "'");
        }
        error("unexpected '" + std::string(1, c) + "'");
    }

    std::string_view m_text;
    double m_t;
    size_t m_pos = 0;
};

} // namespace detail

/// A prescribed constraint h(t), either a closed-form expression in t or a table of (t, h)
/// samples interpolated linearly (held constant outside the table).
class TimeFunction
{
public:
    static TimeFunction expression(std::string text)
    {
        TimeFunction f;
        f.m_expression = std::move(text);
        (void)f(0.0); // syntax check
        return f;
    }

    static TimeFunction table(std::vector<double> t, std::vector<double> h)
    {
        if (t.empty() || t.size() != h.size()) fail(ErrorCode::ConfigInvalid, "time-function table is empty or ragged");
        for (size_t i = 1; i < t.size(); ++i) {
            if (!(t[i] > t[i - 1])) fail(ErrorCode::ConfigInvalid, "time-function table must be strictly increasing in t");
        }
        TimeFunction f;
        f.m_t = std::move(t);
        f.m_h = std::move(h);
        return f;
    }

    /// Two-column CSV "t,h"; a non-numeric first line is treated as a header.
    static TimeFunction from_csv(const std::string& path)
    {
        std::ifstream in(path);
        if (!in) fail(ErrorCode::ConfigInvalid, "cannot open time-function table " + path);
        std::vector<double> t, h;
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream row(line);
            double a = 0, b = 0;
            if (!(row >> a >> b)) {
                if (first) {
                    first = false;
                    continue;
                }
                fail(ErrorCode::ConfigInvalid, "malformed row in " + path + ": " + line);
            }
            first = false;
            t.push_back(a);
            h.push_back(b);
        }
        return table(std::move(t), std::move(h));
    }

    double operator()(double t) const
    {
        if (!m_expression.empty()) return detail::ExpressionParser(m_expression, t).parse();
        if (t <= m_t.front()) return m_h.front();
        if (t >= m_t.back()) return m_h.back();
        const size_t k = size_t(std::upper_bound(m_t.begin(), m_t.end(), t) - m_t.begin());
        const double w = (t - m_t[k - 1]) / (m_t[k] - m_t[k - 1]);
        return (1.0 - w) * m_h[k - 1] + w * m_h[k];
    }

    /// Samples [t0, t1] and throws UnboundedTimeFunction on a non-finite value or one whose
    /// magnitude exceeds `bound`.
    void check_bounded(double t0, double t1, double bound = 1e12, int samples = 4096) const
    {
        for (int i = 0; i <= samples; ++i) {
            const double t = t0 + (t1 - t0) * i / samples;
            const double v = (*this)(t);
            if (!std::isfinite(v) || std::abs(v) > bound) {
                std::ostringstream msg;
                msg << "h(" << t << ") = " << v << " is not bounded on [" << t0 << ", " << t1 << "]";
                fail(ErrorCode::UnboundedTimeFunction, msg.str());
            }
        }
    }

    const std::string& expression_text() const { return m_expression; }

private:
    std::string m_expression;
    std::vector<double> m_t, m_h;
};

struct ConstraintSpec
{
    ConstraintKind kind = ConstraintKind::Zero;
    /// Guard on |denominator|; zero or negative selects 1e-8 * area / bbox diagonal.
    double denom_eps = 0.0;
    std::shared_ptr<const TimeFunction> time_function;
};

struct ConstraintValue
{
    double h = 0.0;
    double numerator = 0.0;
    double denominator = 1.0;
    bool valid = true;
};

/// The global integrals the constraint quotients are built from. Both the mesh engine and the
/// axisymmetric solver fill this with their own quadrature.
struct ConstraintIntegrals
{
    double grad_H2 = 0;  ///< integral |grad H|^2
    double H = 0;        ///< integral H
    double abs_H = 0;    ///< integral |H|
    double lapH_K = 0;   ///< integral (Delta H) K
    double K = 0;        ///< integral K
    double area = 0;
    double bbox_diagonal = 1;
};

inline double default_denom_eps(double area, double bbox_diagonal) { return 1e-8 * area / bbox_diagonal; }

inline ConstraintValue evaluate_constraint(const ConstraintIntegrals& q, const ConstraintSpec& spec, double t)
{
    ConstraintValue v;
    double num = 0, den = 1;
    switch (spec.kind) {
    case ConstraintKind::Zero: return v;
    case ConstraintKind::TimeFunction:
        if (!spec.time_function) fail(ErrorCode::ConfigInvalid, "TimeFunction constraint without a function");
        v.h = v.numerator = (*spec.time_function)(t);
        return v;
    case ConstraintKind::MeanH:
        num = q.grad_H2;
        den = q.H;
        break;
    case ConstraintKind::AbsMeanH:
        num = q.grad_H2;
        den = q.abs_H;
        break;
    case ConstraintKind::GaussMixed:
        num = -q.lapH_K;
        den = q.K;
        break;
    }
    const double eps = spec.denom_eps > 0 ? spec.denom_eps : default_denom_eps(q.area, q.bbox_diagonal);
    v.numerator = num;
    v.denominator = den;
    if (!(std::abs(den) >= eps)) {
        v.valid = false;
        v.h = std::numeric_limits<double>::quiet_NaN();
        return v;
    }
    v.h = num / den;
    return v;
}

inline ConstraintIntegrals constraint_integrals(const TriMesh& mesh, const GeometryCache& c)
{
    ConstraintIntegrals q;
    const auto& m = c.mass();
    q.grad_H2 = integrate(m, c.grad_H2);
    q.H = integrate(m, c.H);
    q.abs_H = integrate_by(m, [&](size_t i) { return std::abs(c.H[i]); });
    q.lapH_K = integrate_by(m, [&](size_t i) { return c.lap_H[i] * c.K[i]; });
    q.K = integrate(m, c.K);
    q.area = surface_area(mesh);
    q.bbox_diagonal = mesh.bbox_diagonal();
    return q;
}

/// Evaluates h for the current geometry; DenominatorVanishing when the quotient is undefined.
inline ConstraintValue compute_h(const TriMesh& mesh, const GeometryCache& cache, const ConstraintSpec& spec, double t)
{
    const ConstraintValue v = evaluate_constraint(constraint_integrals(mesh, cache), spec, t);
    if (!v.valid) {
        std::ostringstream msg;
        msg << to_string(spec.kind) << " denominator " << v.denominator << " is below the guard";
        fail(ErrorCode::DenominatorVanishing, msg.str());
    }
    return v;
}

/// Both sides of the isoperimetric chain bounding the AbsMeanH denominator from below, for n = 2.
/// No numeric constant is asserted: `admissible_constant` is the largest c with
/// integral |H| >= c |M|^2, and the scale-free combinations are reported alongside.
struct DenominatorFloorReport
{
    double int_abs_H = 0;
    double area = 0;
    double volume = 0;
    double area_power = 0;          ///< |M|^{n/(n-1)} = |M|^2
    double admissible_constant = 0; ///< int|H| / |M|^2
    double scale_free_ratio = 0;    ///< |M| / (int|H|)^2, invariant under scaling
    double isoperimetric_ratio = 0; ///< Vol^2 / |M|^3, at most 1 / (36 pi)
    int lhs_scaling_exponent = 1;   ///< int|H| ~ s^1
    int rhs_scaling_exponent = 4;   ///< |M|^2 ~ s^4
};

inline DenominatorFloorReport lower_bound_abs_meanH_denominator(const TriMesh& mesh, const GeometryCache& cache)
{
    DenominatorFloorReport r;
    r.int_abs_H = integrate_by(cache.mass(), [&](size_t i) { return std::abs(cache.H[i]); });
    r.area = surface_area(mesh);
    r.volume = enclosed_volume(mesh);
    r.area_power = r.area * r.area;
    r.admissible_constant = r.int_abs_H / r.area_power;
    r.scale_free_ratio = r.area / (r.int_abs_H * r.int_abs_H);
    r.isoperimetric_ratio = r.volume * r.volume / (r.area * r.area * r.area);
    return r;
}

} // namespace csdflow
