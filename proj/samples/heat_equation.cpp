// Time-fractional heat equation on (0, 1) with u = t^alpha sin(pi x).
#include <cstdio>

#include <l2frac/l2frac.hpp>

int main()
{
    const double alpha = 0.6;
    const double r = (3.0 - alpha) / alpha;
    const auto problem = l2frac::sinx_problem(alpha, 511);
    for (const int M : {16, 32, 64}) {
        const auto mesh = l2frac::build_graded({1.0, M, r, l2frac::MeshVariant::graded, 1});
        const auto res = l2frac::solve_parabolic_1d(problem, mesh);
        std::printf("M = %3d  L2 error at t = 1: %.3e  max over t_m: %.3e\n", M, res.final_l2_error(),
                    res.max_l2_error());
    }
    return 0;
}
