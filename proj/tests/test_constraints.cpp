#include "csdflow/constraints.hpp"
#include "csdflow/primitives.hpp"

#include <gtest/gtest.h>

using namespace csdflow;

namespace {

struct Fixture
{
    TriMesh mesh;
    GeometryCache cache;

    explicit Fixture(const PrimitiveSpec& spec)
        : mesh(generate_primitive(spec))
        , cache(compute_geometry(mesh))
    {}

    ConstraintValue h(ConstraintKind kind, double denom_eps = 0.0) const
    {
        return compute_h(mesh, cache, ConstraintSpec{kind, denom_eps, nullptr}, 0.0);
    }
};

const Fixture& sphere()
{
    static const Fixture f(Icosphere{4, 1.0});
    return f;
}

} // namespace

TEST(ComputeH, ZeroConstraintIsSurfaceDiffusion)
{
    EXPECT_EQ(sphere().h(ConstraintKind::Zero).h, 0.0);
}

TEST(ComputeH, SphereValuesVanish)
{
    EXPECT_NEAR(sphere().h(ConstraintKind::MeanH).h, 0.0, 1e-6);
    EXPECT_NEAR(sphere().h(ConstraintKind::AbsMeanH).h, 0.0, 1e-6);
    const ConstraintValue g = sphere().h(ConstraintKind::GaussMixed);
    EXPECT_NEAR(g.h, 0.0, 1e-6);
    EXPECT_NEAR(g.denominator, 4.0 * std::numbers::pi, 1e-9);
}

TEST(ComputeH, DumbbellAbsMeanHIsPositive)
{
    const Fixture f(Dumbbell{1.0, 0.2, 1.0, 64});
    const ConstraintValue v = f.h(ConstraintKind::AbsMeanH);
    EXPECT_GT(v.numerator, 0.0);
    EXPECT_GT(v.h, 0.0);
}

TEST(ComputeH, GuardFiresBelowDenominatorFloor)
{
    const double int_H = sphere().h(ConstraintKind::MeanH).denominator;
    try {
        sphere().h(ConstraintKind::MeanH, 2.0 * int_H);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DenominatorVanishing);
    }
    EXPECT_NO_THROW(sphere().h(ConstraintKind::MeanH, 0.5 * int_H));
}

TEST(ComputeH, GaussMixedVanishesOnTorus)
{
    const Fixture f(Torus{2.0, 1.0, 32});
    try {
        f.h(ConstraintKind::GaussMixed);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DenominatorVanishing);
    }
}

TEST(ComputeH, TimeFunctionExpressionAndTable)
{
    ConstraintSpec spec;
    spec.kind = ConstraintKind::TimeFunction;
    spec.time_function = std::make_shared<TimeFunction>(TimeFunction::expression("2*sin(pi*t) + t^2"));
    EXPECT_NEAR(compute_h(sphere().mesh, sphere().cache, spec, 0.5).h, 2.25, 1e-14);

    const TimeFunction table = TimeFunction::table({0.0, 1.0, 3.0}, {1.0, 3.0, -1.0});
    EXPECT_EQ(table(-1.0), 1.0);
    EXPECT_EQ(table(0.5), 2.0);
    EXPECT_EQ(table(2.0), 1.0);
    EXPECT_EQ(table(9.0), -1.0);
}

TEST(ComputeH, TimeFunctionErrors)
{
    auto code_of = [](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    EXPECT_EQ(code_of([] { TimeFunction::expression("sin(t"); }), ErrorCode::ConfigInvalid);
    EXPECT_EQ(code_of([] { TimeFunction::expression("foo(t)"); }), ErrorCode::ConfigInvalid);
    EXPECT_EQ(code_of([] { TimeFunction::table({0.0, 0.0}, {1.0, 2.0}); }), ErrorCode::ConfigInvalid);
    EXPECT_EQ(code_of([] { TimeFunction::expression("1/(t-0.5)").check_bounded(0.0, 1.0); }), ErrorCode::UnboundedTimeFunction);
    EXPECT_EQ(parse_constraint_kind("AbsMeanH"), ConstraintKind::AbsMeanH);
    EXPECT_EQ(code_of([] { parse_constraint_kind("Willmore"); }), ErrorCode::ConfigInvalid);
}

TEST(DenominatorFloor, SphereArithmetic)
{
    const DenominatorFloorReport r = lower_bound_abs_meanH_denominator(sphere().mesh, sphere().cache);
    const double pi = std::numbers::pi;
    EXPECT_NEAR(r.int_abs_H / (8.0 * pi), 1.0, 1e-2);
    EXPECT_NEAR(r.area / (4.0 * pi), 1.0, 5e-3);
    // The sphere admits any c up to 8 pi / (4 pi)^2 = 1 / (2 pi).
    EXPECT_NEAR(r.admissible_constant * 2.0 * pi, 1.0, 2e-2);
    EXPECT_LE(r.isoperimetric_ratio, 1.0 / (36.0 * pi));
}

TEST(DenominatorFloor, ScalingExponents)
{
    const TriMesh base = generate_primitive(Ellipsoid{1.0, 0.8, 0.5, 3});
    const DenominatorFloorReport a = lower_bound_abs_meanH_denominator(base, compute_geometry(base));
    for (double s : {0.5, 3.0}) {
        const TriMesh m = scaled(base, s);
        const DenominatorFloorReport b = lower_bound_abs_meanH_denominator(m, compute_geometry(m));
        EXPECT_NEAR(std::log(b.int_abs_H / a.int_abs_H) / std::log(s), a.lhs_scaling_exponent, 1e-9);
        EXPECT_NEAR(std::log(b.area_power / a.area_power) / std::log(s), a.rhs_scaling_exponent, 1e-9);
        EXPECT_NEAR(b.scale_free_ratio / a.scale_free_ratio, 1.0, 1e-9);
    }
}

TEST(DenominatorFloor, TorusChainHolds)
{
    const Fixture f(Torus{2.0, 1.0, 64});
    const DenominatorFloorReport r = lower_bound_abs_meanH_denominator(f.mesh, f.cache);
    EXPECT_GT(r.admissible_constant, 0.0);
    EXPECT_LE(r.isoperimetric_ratio, 1.0 / (36.0 * std::numbers::pi));
    EXPECT_GT(r.int_abs_H, r.admissible_constant * r.area_power * (1.0 - 1e-12));
}
