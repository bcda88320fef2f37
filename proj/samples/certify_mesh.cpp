// Picks K for a modified graded mesh and checks the discrete comparison
// principle row by row.
#include <cstdio>

#include <l2frac/l2frac.hpp>

int main()
{
    const double alpha = 0.5;
    const double theta = 1.0;
    const double r = 3.0;
    const auto sb = l2frac::sigma_bar(alpha, theta);
    const int K = l2frac::compute_K(r, sb.value);
    std::printf("sigma_bar = %.12f  K = %d\n", sb.value, K);

    for (const auto variant : {l2frac::MeshVariant::graded, l2frac::MeshVariant::modified_graded}) {
        const auto mesh = l2frac::build_graded({1.0, 128, r, variant, K});
        const auto cert = l2frac::certify(mesh, alpha, theta);
        if (cert.passed()) {
            std::printf("%-9s certified, min inverse entry %.3e\n", l2frac::mesh_variant_name(variant).c_str(),
                        cert.inverse_min_entry);
        } else {
            std::printf("%-9s not certified: %s fails at m = %d\n", l2frac::mesh_variant_name(variant).c_str(),
                        cert.first_failure->condition.c_str(), cert.first_failure->m);
        }
    }
    return 0;
}
