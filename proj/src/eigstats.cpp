#include "levelstat/eigstats.hpp"

#include <cmath>
#include <stdexcept>

namespace levelstat {

WeightedTrace weighted_trace(const Eigen::VectorXd& values, const EnergyWindow& w) {
    auto [first, last] = window_range(values, w);
    if (last == first)
        throw std::invalid_argument("weighted_trace: no eigenvalues in window");
    WeightedTrace t;
    t.k = last - first;
    t.value = values.segment(first, t.k).mean();
    return t;
}

TraceStats window_trace_stats(const ModelContext& ctx, const Spectrum& sp,
                              const EnergyWindow& w) {
    if (!sp.has_vectors())
        throw std::invalid_argument("window_trace_stats needs eigenvectors");
    auto [first, last] = window_range(sp.values, w);
    long k = last - first;
    if (k == 0) throw std::invalid_argument("window_trace_stats: no eigenvalues in window");

    TraceStats out;
    out.k = k;
    out.value = sp.values.segment(first, k).mean();
    out.grad = Eigen::VectorXd::Zero(ctx.disorder_dim);

    if (ctx.spec.kind == ModelKind::Alloy) {
        const auto& prof = ctx.spec.profile;
        std::vector<int> n(ctx.box.dim()), m(ctx.box.dim());
        // weight w2[s] = sum over window vectors of |v(s)|^2
        Eigen::VectorXd w2 = Eigen::VectorXd::Zero(ctx.box.sites());
        for (long col = first; col < last; ++col)
            w2 += sp.vectors.col(col).cwiseAbs2();
        for (long j = 0; j < ctx.disorder_dim; ++j) {
            ctx.box.coord_of(j, n);
            double g = 0;
            for (std::size_t t = 0; t < prof.offsets.size(); ++t) {
                for (int a = 0; a < ctx.box.dim(); ++a) m[a] = n[a] + prof.offsets[t][a];
                if (ctx.box.contains(m)) g += prof.values[t] * w2[ctx.box.index_of(m)];
            }
            out.grad[j] = g / k;
        }
    } else {
        for (long j = 0; j < ctx.disorder_dim; ++j) {
            double g = 0;
            for (long col = first; col < last; ++col)
                for (long cidx : ctx.family[j]) {
                    double a = sp.vectors(cidx, col);
                    g += a * a;
                }
            out.grad[j] = g / k;
        }
    }
    return out;
}

FdGradient fd_trace_gradient(const ModelContext& ctx, const Eigen::VectorXd& omega,
                             const EnergyWindow& w, double step) {
    if (step <= 0) throw std::invalid_argument("fd_trace_gradient: step must be > 0");
    Spectrum base = eigendecompose(ctx.hamiltonian(omega), false);
    long k0 = count_in_window(base.values, w);
    if (k0 == 0) throw std::invalid_argument("fd_trace_gradient: no eigenvalues in window");

    FdGradient out;
    out.grad.resize(ctx.disorder_dim);
    out.min_isolation = window_isolation(base.values, w);
    Eigen::VectorXd probe = omega;
    for (long j = 0; j < ctx.disorder_dim; ++j) {
        probe[j] = omega[j] + step;
        Spectrum up = eigendecompose(ctx.hamiltonian(probe), false);
        probe[j] = omega[j] - step;
        Spectrum dn = eigendecompose(ctx.hamiltonian(probe), false);
        probe[j] = omega[j];
        if (count_in_window(up.values, w) != k0 || count_in_window(dn.values, w) != k0)
            out.count_changed = true;
        out.min_isolation = std::min({out.min_isolation, window_isolation(up.values, w),
                                      window_isolation(dn.values, w)});
        double tu = weighted_trace(up.values, w).value;
        double td = weighted_trace(dn.values, w).value;
        out.grad[j] = (tu - td) / (2 * step);
    }
    return out;
}

DirectionalIdentity directional_identity(const ModelContext& ctx, const Eigen::VectorXd& omega,
                                         const Spectrum& sp, const EnergyWindow& wE,
                                         const EnergyWindow& wEp) {
    TraceStats a = window_trace_stats(ctx, sp, wE);
    TraceStats b = window_trace_stats(ctx, sp, wEp);

    auto hopping_mean = [&](const EnergyWindow& w) {
        auto [first, last] = window_range(sp.values, w);
        double s = 0;
        for (long col = first; col < last; ++col)
            s += sp.vectors.col(col).dot(ctx.hopping.dense() * sp.vectors.col(col));
        return s / (last - first);
    };

    DirectionalIdentity r;
    r.t_first = a.value;
    r.t_second = b.value;
    r.k1 = a.k;
    r.k2 = b.k;
    r.lhs = omega.dot(a.grad - b.grad);
    r.rhs = a.value - b.value - hopping_mean(wE) + hopping_mean(wEp);
    r.residual = std::abs(r.lhs - r.rhs);
    return r;
}

SeparationCheck separation_check(const Eigen::VectorXd& grad_first,
                                 const Eigen::VectorXd& grad_second, double t_first,
                                 double t_second, int dim, double half_width) {
    if (grad_first.size() != grad_second.size())
        throw std::invalid_argument("separation_check: gradient length mismatch");
    SeparationCheck s;
    Eigen::VectorXd diff = grad_first - grad_second;
    s.l1 = diff.lpNorm<1>();
    s.l2 = diff.norm();
    s.trace_gap = std::abs(t_first - t_second);
    double num = s.trace_gap - 4.0 * dim;
    if (num <= 0) return s; // below the admissible energy gap, nothing to assert
    s.l1_bound = num / half_width;
    s.l2_bound = num / (half_width * std::sqrt(static_cast<double>(grad_first.size())));
    s.ok = s.l1 >= s.l1_bound - 1e-12 && s.l2 >= s.l2_bound - 1e-12;
    return s;
}

JacobianMax max_abs_jacobian(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    if (u.size() != v.size() || u.size() < 2)
        throw std::invalid_argument("max_abs_jacobian: need two vectors of equal length >= 2");
    JacobianMax m;
    for (long i = 0; i + 1 < u.size(); ++i)
        for (long j = i + 1; j < u.size(); ++j) {
            double det = u[i] * v[j] - u[j] * v[i];
            if (std::abs(det) > m.value) {
                m.value = std::abs(det);
                m.i = i;
                m.j = j;
            }
        }
    return m;
}

KloppCheck klopp_check(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    if (u.size() != v.size() || u.size() < 2)
        throw std::invalid_argument("klopp_check: need two vectors of equal length >= 2");
    if (u.minCoeff() < -1e-9 || v.minCoeff() < -1e-9)
        throw std::invalid_argument("klopp_check: vectors must be nonnegative");
    if (std::abs(u.lpNorm<1>() - 1.0) > 1e-6 || std::abs(v.lpNorm<1>() - 1.0) > 1e-6)
        throw std::invalid_argument("klopp_check: vectors must be l1-normalized");

    KloppCheck k;
    k.n = u.size();
    double det = max_abs_jacobian(u, v).value;
    k.max_det2 = det * det;
    k.l1_diff = (u - v).lpNorm<1>();
    double n5 = std::pow(static_cast<double>(k.n), 5);
    k.bound = k.l1_diff * k.l1_diff / (4.0 * n5);
    k.ok = k.max_det2 >= k.bound - 1e-15;
    return k;
}

double lambda_threshold(double delta_e, int dim, double K, double beta, double C, long L) {
    if (delta_e <= 4.0 * dim)
        throw std::invalid_argument("lambda_threshold requires |E - E'| > 4d");
    if (beta <= 2.5) throw std::invalid_argument("lambda_threshold requires beta > 5/2");
    if (K <= 0) throw std::invalid_argument("lambda_threshold requires K > 0");
    if (C <= 0 || L < 2) throw std::invalid_argument("lambda_threshold requires C > 0, L >= 2");
    return (delta_e - 4.0 * dim) / K * std::pow(C * std::log(static_cast<double>(L)),
                                                -beta * dim);
}

int log_scale_length(double C, long L) {
    if (C <= 0 || L < 2) throw std::invalid_argument("log_scale_length requires C > 0, L >= 2");
    return static_cast<int>(std::ceil(C * std::log(static_cast<double>(L))));
}

double tensor_product_residual(const Eigen::MatrixXd& h, const Eigen::MatrixXd& vectors,
                               const Eigen::VectorXd& values, const std::vector<long>& indices) {
    long n = h.rows();
    int k = static_cast<int>(indices.size());
    if (k < 1) throw std::invalid_argument("tensor_product_residual: need k >= 1 factors");
    double total = 1;
    for (int s = 0; s < k; ++s) {
        if (indices[s] < 0 || indices[s] >= n)
            throw std::invalid_argument("tensor_product_residual: index out of range");
        total *= n;
        if (total > 4e6) throw std::invalid_argument("tensor_product_residual: n^k too large");
    }
    long dim = static_cast<long>(total);

    Eigen::VectorXd phi(dim);
    double lambda_sum = 0;
    for (int s = 0; s < k; ++s) lambda_sum += values[indices[s]];
    std::vector<long> mi(k);
    for (long I = 0; I < dim; ++I) {
        long rest = I;
        double p = 1;
        for (int s = k - 1; s >= 0; --s) {
            mi[s] = rest % n;
            rest /= n;
            p *= vectors(mi[s], indices[s]);
        }
        phi[I] = p;
    }

    // apply sum_s I x..x H x..x I without forming the big matrix
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dim);
    std::vector<long> stride(k, 1);
    for (int s = k - 2; s >= 0; --s) stride[s] = stride[s + 1] * n;
    for (long I = 0; I < dim; ++I) {
        long rest = I;
        for (int s = 0; s < k; ++s) {
            long is = (rest / stride[s]) % n;
            long base = I - is * stride[s];
            double acc = 0;
            for (long j = 0; j < n; ++j) acc += h(is, j) * phi[base + j * stride[s]];
            out[I] += acc;
        }
    }
    return (out - lambda_sum * phi).lpNorm<Eigen::Infinity>();
}

Eigen::MatrixXd build_tensor_sum(const Eigen::MatrixXd& h, int k) {
    long n = h.rows();
    long dim = 1;
    for (int s = 0; s < k; ++s) {
        dim *= n;
        if (dim > 4096) throw std::invalid_argument("build_tensor_sum: n^k too large");
    }
    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(dim, dim);
    std::vector<long> stride(k, 1);
    for (int s = k - 2; s >= 0; --s) stride[s] = stride[s + 1] * n;
    for (long I = 0; I < dim; ++I)
        for (int s = 0; s < k; ++s) {
            long is = (I / stride[s]) % n;
            long base = I - is * stride[s];
            for (long j = 0; j < n; ++j) big(I, base + j * stride[s]) += h(is, j);
        }
    return big;
}

} // namespace levelstat
