#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kernel.hpp"
#include "temporal_mesh.hpp"

namespace l2frac {

/// Selects the interpolant per row. The standard operator uses the linear
/// interpolant for m = 1 and piecewise quadratics for m >= 2; the L1-start
/// variant uses piecewise-linear interpolation for every row m <= K.
struct OperatorVariant {
    int l1_rows = 0;

    static constexpr OperatorVariant standard() noexcept { return {}; }
    static OperatorVariant l1_start(int K)
    {
        if (K < 1) {
            throw std::invalid_argument("l1_start variant requires K >= 1");
        }
        return {K};
    }

    [[nodiscard]] constexpr bool linear_row(int m) const noexcept { return m == 1 || m <= l1_rows; }
    [[nodiscard]] constexpr bool is_standard() const noexcept { return l1_rows <= 1; }
};

inline InterpolantKind interpolant_for(const OperatorVariant& variant, int m, int k) noexcept
{
    if (variant.linear_row(m)) {
        return InterpolantKind::linear;
    }
    return k < m ? InterpolantKind::quadratic_left : InterpolantKind::quadratic_right;
}

/// Builds rows of the discrete Caputo operator on a fixed mesh.
///
/// Two equivalent encodings of row m are produced:
///  - hat coefficients kappa*_{m,j}: delta U^m = sum_{j=0}^m kappa*_{m,j} U^j;
///  - increment weights g_{m,j} (j = 1..m): delta U^m = sum_j g_{m,j} (U^j - U^{j-1}),
///    with g_{m,j} = sum_{i >= j} kappa*_{m,i}.
/// The increment form is what the solvers use; it annihilates constants
/// exactly and avoids the large cancelling terms of the hat form.
class RowAssembler {
public:
    RowAssembler(const TemporalMesh& mesh, double alpha, OperatorVariant variant = OperatorVariant::standard())
        : mesh_(&mesh), kernel_(alpha), variant_(variant), inv_gamma_(1.0 / std::tgamma(1.0 - alpha))
    {
    }

    [[nodiscard]] const TemporalMesh& mesh() const noexcept { return *mesh_; }
    [[nodiscard]] double alpha() const noexcept { return kernel_.alpha(); }
    [[nodiscard]] const KernelSeries& kernel() const noexcept { return kernel_; }
    [[nodiscard]] const OperatorVariant& variant() const noexcept { return variant_; }
    [[nodiscard]] double inv_gamma() const noexcept { return inv_gamma_; }

    [[nodiscard]] IntervalStencil stencil(int m, int k) const
    {
        return interval_stencil(*mesh_, kernel_, m, k, interpolant_for(variant_, m, k));
    }

    /// Fills g[1..m] (g.size() > m); g[0] is set to zero.
    void increments(int m, std::span<double> g) const
    {
        check_row(m);
        std::fill(g.begin(), g.begin() + m + 1, 0.0);
        for (int k = 1; k <= m; ++k) {
            const IntervalStencil st = stencil(m, k);
            g[static_cast<std::size_t>(st.nodes[1])] -= st.weights[0];
            if (st.count == 3) {
                g[static_cast<std::size_t>(st.nodes[2])] += st.weights[2];
            }
        }
        for (int j = 1; j <= m; ++j) {
            g[static_cast<std::size_t>(j)] *= inv_gamma_;
        }
    }

    /// Fills kappa[0..m] (kappa.size() > m).
    void hat(int m, std::span<double> kappa) const
    {
        check_row(m);
        std::fill(kappa.begin(), kappa.begin() + m + 1, 0.0);
        for (int k = 1; k <= m; ++k) {
            const IntervalStencil st = stencil(m, k);
            for (int i = 0; i < st.count; ++i) {
                kappa[static_cast<std::size_t>(st.nodes[static_cast<std::size_t>(i)])] +=
                    st.weights[static_cast<std::size_t>(i)];
            }
        }
        for (int j = 0; j <= m; ++j) {
            kappa[static_cast<std::size_t>(j)] *= inv_gamma_;
        }
    }

private:
    void check_row(int m) const
    {
        if (m < 1 || m > mesh_->steps()) {
            throw std::out_of_range("operator row index m = " + std::to_string(m) + " outside 1..M");
        }
    }

    const TemporalMesh* mesh_;
    KernelSeries kernel_;
    OperatorVariant variant_;
    double inv_gamma_;
};

struct KernelRow {
    int m = 0;
    std::vector<double> coeffs;      // kappa*_{m,0..m}
    std::vector<double> increments;  // g_{m,0..m}, entry 0 unused (zero)
    OperatorVariant variant;
};

inline KernelRow assemble_row(const TemporalMesh& mesh, double alpha, int m,
                              OperatorVariant variant = OperatorVariant::standard())
{
    const RowAssembler asmb(mesh, alpha, variant);
    KernelRow row;
    row.m = m;
    row.variant = variant;
    row.coeffs.resize(static_cast<std::size_t>(m) + 1);
    row.increments.resize(static_cast<std::size_t>(m) + 1);
    asmb.hat(m, row.coeffs);
    asmb.increments(m, row.increments);
    return row;
}

/// Fully materialised lower-triangular operator (rows m = 1..M).
struct OperatorMatrix {
    static constexpr int max_materialized_steps = 4096;

    double alpha = 0.5;
    OperatorVariant variant;
    TemporalMesh mesh;
    std::vector<KernelRow> rows;  // rows[m-1] is row m

    [[nodiscard]] int steps() const noexcept { return mesh.steps(); }
    [[nodiscard]] const KernelRow& row(int m) const { return rows.at(static_cast<std::size_t>(m - 1)); }
    [[nodiscard]] double kappa(int m, int j) const
    {
        return j > m ? 0.0 : row(m).coeffs[static_cast<std::size_t>(j)];
    }
};

inline OperatorMatrix build_operator(const TemporalMesh& mesh, double alpha,
                                     OperatorVariant variant = OperatorVariant::standard())
{
    if (mesh.steps() > OperatorMatrix::max_materialized_steps) {
        throw std::invalid_argument("build_operator: M = " + std::to_string(mesh.steps()) +
                                    " exceeds the materialisation cap; assemble rows on the fly instead");
    }
    OperatorMatrix op{alpha, variant, mesh, {}};
    const RowAssembler asmb(op.mesh, alpha, variant);
    const int M = mesh.steps();
    op.rows.reserve(static_cast<std::size_t>(M));
    for (int m = 1; m <= M; ++m) {
        KernelRow row;
        row.m = m;
        row.variant = variant;
        row.coeffs.resize(static_cast<std::size_t>(m) + 1);
        row.increments.resize(static_cast<std::size_t>(m) + 1);
        asmb.hat(m, row.coeffs);
        asmb.increments(m, row.increments);
        op.rows.push_back(std::move(row));
    }
    return op;
}

/// delta^alpha U at t_m, evaluated in increment form.
inline double apply(const KernelRow& row, std::span<const double> U)
{
    if (U.size() < static_cast<std::size_t>(row.m) + 1) {
        throw std::invalid_argument("apply: need values U^0..U^m");
    }
    double sum = 0.0;
    for (int j = 1; j <= row.m; ++j) {
        const auto k = static_cast<std::size_t>(j);
        sum += row.increments[k] * (U[k] - U[k - 1]);
    }
    return sum;
}

inline double apply(const OperatorMatrix& op, std::span<const double> U, int m)
{
    return apply(op.row(m), U);
}

/// Last three hat coefficients of row m (without the 1/Gamma(1-alpha)
/// factor) together with the part of the sub-diagonal entry contributed by
/// intervals left of t_{m-2}. Only intervals k >= m-3 touch these nodes.
struct LocalHat {
    double diag = 0.0;
    double sub = 0.0;
    double subsub = 0.0;
    double far_sub = 0.0;
};

inline LocalHat local_hat(const RowAssembler& asmb, int m)
{
    LocalHat h;
    for (int k = std::max(1, m - 3); k <= m; ++k) {
        const IntervalStencil st = asmb.stencil(m, k);
        for (int i = 0; i < st.count; ++i) {
            const int node = st.nodes[static_cast<std::size_t>(i)];
            const double w = st.weights[static_cast<std::size_t>(i)];
            if (node == m) {
                h.diag += w;
            } else if (node == m - 1) {
                h.sub += w;
                if (k <= m - 2) {
                    h.far_sub += w;
                }
            } else if (node == m - 2) {
                h.subsub += w;
            }
        }
    }
    return h;
}

/// Scaled hat-function actions at the diagonal of each row, indexed by m
/// (index 0 unused):
///   B_m = S_m delta phi^m(t_m),  A_m = -S_m delta phi^{m-1}(t_m),
///   F_m = S_m delta [phi^{m-2} + phi^{m-1} + phi^m](t_m),
/// with S_m = tilde_tau_m^alpha Gamma(1-alpha) 2^alpha. F and A2 are defined
/// for m >= 2; A2 is the (non-negative) share of A_m' removed by intervals
/// left of t_{m-2}, so that A_m = A_m' - A2_m.
struct StencilDiagnostics {
    std::vector<double> B;
    std::vector<double> A;
    std::vector<double> A2;
    std::vector<double> F;
};

inline StencilDiagnostics stencil_diagnostics(const TemporalMesh& mesh, double alpha,
                                              OperatorVariant variant = OperatorVariant::standard())
{
    const int M = mesh.steps();
    const RowAssembler asmb(mesh, alpha, variant);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    StencilDiagnostics d;
    const auto n = static_cast<std::size_t>(M) + 1;
    d.B.assign(n, nan);
    d.A.assign(n, nan);
    d.A2.assign(n, nan);
    d.F.assign(n, nan);

    for (int m = 1; m <= M; ++m) {
        const LocalHat h = local_hat(asmb, m);
        // the Gamma(1-alpha) of the scaling cancels the one inside kappa*
        const double scale = std::pow(2.0 * mesh.tilde_tau(m), alpha);
        const auto i = static_cast<std::size_t>(m);
        d.B[i] = scale * h.diag;
        d.A[i] = -scale * h.sub;
        if (m >= 2) {
            d.A2[i] = scale * h.far_sub;
            d.F[i] = scale * (h.subsub + h.sub + h.diag);
        }
    }
    return d;
}

} // namespace l2frac
