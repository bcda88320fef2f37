// Solves D^alpha u = Gamma(1 + alpha), u(0) = 0, whose solution is t^alpha,
// on graded meshes and prints the error at t = 1 with observed rates.
#include <cstdio>
#include <vector>

#include <l2frac/l2frac.hpp>

int main()
{
    const double alpha = 0.4;
    const double r = (3.0 - alpha) / alpha;
    std::vector<int> Ms{16, 32, 64, 128, 256};
    std::vector<double> errs;
    for (const int M : Ms) {
        const auto mesh = l2frac::build_graded({1.0, M, r, l2frac::MeshVariant::graded, 1});
        const auto res = l2frac::solve_scalar(l2frac::talpha_problem(alpha), mesh);
        errs.push_back(res.final_abs_error());
    }
    const auto rates = l2frac::observed_rates(errs, Ms);
    for (std::size_t i = 0; i < Ms.size(); ++i) {
        std::printf("M = %4d  error = %.3e", Ms[i], errs[i]);
        if (i > 0) {
            std::printf("  rate = %.3f", rates[i - 1]);
        }
        std::printf("\n");
    }
    return 0;
}
