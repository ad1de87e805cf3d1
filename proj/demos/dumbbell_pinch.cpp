// Drives a thin-necked dumbbell to pinch-off on a coarse mesh and compares the neck radius with
// the axisymmetric solver. Pass a resolution as the first argument (default 32).

#include "csdflow/csdflow.hpp"

#include <cstdio>
#include <cstdlib>

using namespace csdflow;

int main(int argc, char** argv)
{
    const int res = argc > 1 ? std::atoi(argv[1]) : 32;
    const double bulb = 1.0, neck = 0.12, length = 1.2;

    ConstraintSpec sd;
    AxisymScheme reference;
    reference.t_end = 1e-3;
    const AxisymTrajectory oracle = axisym_run(sample_profile(DumbbellGeometry::solve(bulb, neck, length).curve(), 1024), reference, sd);
    std::printf("reference pinch time %.6e\n", oracle.pinch_time);

    SchemeSpec scheme;
    scheme.t_end = 1e-3;
    scheme.dt_init = 1e-7;
    scheme.order = 2;
    scheme.reject_displacement = 0.05;
    scheme.grow_displacement = 0.005;

    size_t cursor = 0;
    MonitorConfig monitors;
    monitors.sample_every = 50;
    monitors.observer = [&](const FlowState& s) {
        if (s.step_index % 50 != 0) return;
        while (cursor + 1 < oracle.neck.size() && oracle.neck[cursor + 1].t < s.t) ++cursor;
        const double r3 = waist(s.mesh).radius;
        const double r1 = cursor + 1 < oracle.neck.size() ? oracle.neck[cursor].radius : 0.0;
        std::printf("t %.5e  mesh neck %.5f  reference %.5f\n", s.t, r3, r1);
    };
    const Trajectory traj = run(generate_primitive(Dumbbell{bulb, neck, length, res}), scheme, sd, monitors);
    std::printf("stop: %s at t = %.6e (%s)\n", std::string(to_string(traj.stop)).c_str(), traj.final_state->t,
                traj.stop_detail.c_str());
    return 0;
}
