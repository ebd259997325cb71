#include "levelstat/pointprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace levelstat {

SubcubeLayout make_subcube_layout(const LatticeBox& big, const ModelSpec& spec, int sub_side) {
    if (sub_side < 1 || sub_side > big.side())
        throw std::invalid_argument("make_subcube_layout: sub_side must be in [1, big side]");
    if (spec.kind == ModelKind::Polymer && sub_side % spec.block_side != 0)
        throw std::invalid_argument("make_subcube_layout: polymer blocks must tile sub-boxes");

    SubcubeLayout lay;
    lay.dim = big.dim();
    lay.sub_side = sub_side;
    lay.per_axis = big.side() / sub_side;
    lay.count = 1;
    for (int a = 0; a < lay.dim; ++a) lay.count *= lay.per_axis;

    LatticeBox sub = LatticeBox::from_side(lay.dim, sub_side);
    long sub_disorder = disorder_dimension(sub, spec);
    bool per_site = spec.kind != ModelKind::Polymer;

    lay.disorder_map.assign(lay.count, std::vector<long>(sub_disorder));
    std::vector<int> pc(lay.dim), local(lay.dim), global(lay.dim);
    for (long p = 0; p < lay.count; ++p) {
        long rest = p;
        for (int a = lay.dim - 1; a >= 0; --a) {
            pc[a] = static_cast<int>(rest % lay.per_axis);
            rest /= lay.per_axis;
        }
        if (per_site) {
            for (long j = 0; j < sub_disorder; ++j) {
                sub.coord_of(j, local);
                for (int a = 0; a < lay.dim; ++a)
                    global[a] = big.lo() + pc[a] * sub_side + (local[a] - sub.lo());
                lay.disorder_map[p][j] = big.index_of(global);
            }
        } else {
            int bpa_sub = sub_side / spec.block_side;        // blocks per axis in a sub-box
            int bpa_big = big.side() / spec.block_side;      // blocks per axis in the big box
            for (long j = 0; j < sub_disorder; ++j) {
                long rest_b = j;
                long big_block = 0;
                for (int a = 0; a < lay.dim; ++a) {
                    long stride = 1;
                    for (int b = a + 1; b < lay.dim; ++b) stride *= bpa_sub;
                    long local_block = (rest_b / stride) % bpa_sub;
                    long big_coord = pc[a] * bpa_sub + local_block;
                    long big_stride = 1;
                    for (int b = a + 1; b < lay.dim; ++b) big_stride *= bpa_big;
                    big_block += big_coord * big_stride;
                }
                lay.disorder_map[p][j] = big_block;
            }
        }
    }
    return lay;
}

SubcubeCounts count_subcube_array(const ModelContext& sub_ctx, const SubcubeLayout& layout,
                                  const Eigen::VectorXd& omega_big, const EnergyWindow& wa,
                                  const EnergyWindow& wb) {
    SubcubeCounts out;
    out.first.resize(layout.count);
    out.second.resize(layout.count);
    Eigen::VectorXd omega_sub(sub_ctx.disorder_dim);
    for (long p = 0; p < layout.count; ++p) {
        const auto& map = layout.disorder_map[p];
        for (long j = 0; j < sub_ctx.disorder_dim; ++j) omega_sub[j] = omega_big[map[j]];
        Spectrum sp = eigendecompose(sub_ctx.hamiltonian(omega_sub), false);
        out.first[p] = static_cast<int>(count_in_window(sp.values, wa));
        out.second[p] = static_cast<int>(count_in_window(sp.values, wb));
    }
    return out;
}

CompoundPoissonDiag compound_poisson_diagnostics(const std::vector<int>& counts) {
    CompoundPoissonDiag d;
    if (counts.empty()) return d;
    int maxc = *std::max_element(counts.begin(), counts.end());
    d.pmf.assign(maxc + 1, 0.0);
    double s1 = 0, s2 = 0, s3 = 0;
    for (int c : counts) {
        d.pmf[c] += 1.0;
        s1 += c;
        s2 += static_cast<double>(c) * (c - 1);
        s3 += static_cast<double>(c) * (c - 1) * (c - 2);
    }
    double n = static_cast<double>(counts.size());
    for (double& p : d.pmf) p /= n;
    d.mean = s1 / n;
    double mu = d.mean;
    if (mu > 0) {
        d.fm2 = (s2 / n) / (mu * mu);
        d.fm3 = (s3 / n) / (mu * mu * mu);
    }
    // TV against Poisson(mu) over the observed range plus its tail
    double tv = 0, cdf = 0, pk = std::exp(-mu);
    for (int k = 0; k <= maxc; ++k) {
        tv += std::abs(d.pmf[k] - pk);
        cdf += pk;
        pk *= mu / (k + 1);
    }
    tv += 1.0 - cdf; // Poisson mass beyond the observed support
    d.tv_poisson = tv / 2;
    return d;
}

IndependenceResult independence_scan(const ModelSpec& spec, const DisorderSpec& dist, int dim,
                                     double E, double Ep, double i_lo, double i_hi, double j_lo,
                                     double j_hi, double alpha, const std::vector<int>& ladder,
                                     long trials, std::uint64_t seed, int workers) {
    IndependenceResult res;
    for (int L : ladder) {
        int big_side = compatible_side(L, spec);
        int ell = std::max(1, static_cast<int>(std::floor(std::pow(L, alpha))));
        int sub_side = compatible_side(ell, spec);
        LatticeBox big = LatticeBox::from_side(dim, big_side);
        SubcubeLayout layout = make_subcube_layout(big, spec, sub_side);
        ModelContext sub_ctx(LatticeBox::from_side(dim, sub_side), spec, dist);
        long big_disorder = disorder_dimension(big, spec);
        EnergyWindow wa = EnergyWindow::scaled(E, i_lo, i_hi, L, dim);
        EnergyWindow wb = EnergyWindow::scaled(Ep, j_lo, j_hi, L, dim);

        struct Rec {
            std::vector<unsigned char> a, b;
        };
        std::vector<Rec> recs = run_trials<Rec>(trials, workers, [&](long t) {
            Eigen::VectorXd omega = sample_disorder(dist, big_disorder, seed, t);
            SubcubeCounts c = count_subcube_array(sub_ctx, layout, omega, wa, wb);
            Rec r;
            r.a.resize(layout.count);
            r.b.resize(layout.count);
            for (long p = 0; p < layout.count; ++p) {
                r.a[p] = static_cast<unsigned char>(std::min(c.first[p], 255));
                r.b[p] = static_cast<unsigned char>(std::min(c.second[p], 255));
            }
            return r;
        });

        IndependencePoint pt;
        pt.L = L;
        pt.ell = ell;
        pt.sub_side = sub_side;
        pt.boxes = layout.count;
        pt.trials = trials;

        long NB = layout.count;
        int rank = spec.minami_rank(dim);
        std::vector<long> n11(NB, 0), na(NB, 0), nb(NB, 0);
        std::vector<int> zeta_a(trials), zeta_b(trials);
        long joint_both = 0, any_a = 0, any_b = 0, eta_above = 0;
        int eta_max = 0;
        for (long t = 0; t < trials; ++t) {
            int za = 0, zb = 0;
            for (long p = 0; p < NB; ++p) {
                bool ia = recs[t].a[p] >= 1, ib = recs[t].b[p] >= 1;
                n11[p] += ia && ib;
                na[p] += ia;
                nb[p] += ib;
                za += recs[t].a[p];
                zb += recs[t].b[p];
                eta_max = std::max(eta_max, static_cast<int>(recs[t].a[p]));
                if (recs[t].a[p] > rank) ++eta_above;
            }
            zeta_a[t] = za;
            zeta_b[t] = zb;
            if (za >= 1 && zb >= 1) ++joint_both;
            if (za >= 1) ++any_a;
            if (zb >= 1) ++any_b;
        }
        pt.joint.successes = joint_both;
        pt.joint.trials = trials;
        pt.product = (static_cast<double>(any_a) / trials) *
                     (static_cast<double>(any_b) / trials);
        pt.max_eta = eta_max;
        pt.frac_eta_above = static_cast<double>(eta_above) / (static_cast<double>(trials) * NB);
        double sum_pa = 0, sum_pb = 0, diag_ab = 0;
        for (long p = 0; p < NB; ++p) {
            double pa = static_cast<double>(na[p]) / trials;
            double pb = static_cast<double>(nb[p]) / trials;
            sum_pa += pa;
            sum_pb += pb;
            diag_ab += pa * pb;
        }
        pt.double_sum = sum_pa * sum_pb - diag_ab;
        double var_sum = 0;
        for (long p = 0; p < NB; ++p) {
            double pj = static_cast<double>(n11[p]) / trials;
            double pa = static_cast<double>(na[p]) / trials;
            double pb = static_cast<double>(nb[p]) / trials;
            pt.e_sum += pj - pa * pb;
            // delta method for pj - pa pb within one box
            double p10 = pa - pj, p01 = pb - pj;
            double g11 = 1 - pa - pb, g10 = -pb, g01 = -pa;
            double var = g11 * g11 * pj * (1 - pj) + g10 * g10 * p10 * (1 - p10) +
                         g01 * g01 * p01 * (1 - p01) - 2 * g11 * g10 * pj * p10 -
                         2 * g11 * g01 * pj * p01 - 2 * g10 * g01 * p10 * p01;
            var_sum += std::max(0.0, var) / trials;
        }
        pt.e_se = std::sqrt(var_sum);

        double ma = 0, mb = 0;
        for (long t = 0; t < trials; ++t) {
            ma += zeta_a[t];
            mb += zeta_b[t];
        }
        ma /= trials;
        mb /= trials;
        pt.mean_zeta_first = ma;
        pt.mean_zeta_second = mb;
        double caa = 0, cbb = 0, cab = 0;
        for (long t = 0; t < trials; ++t) {
            caa += (zeta_a[t] - ma) * (zeta_a[t] - ma);
            cbb += (zeta_b[t] - mb) * (zeta_b[t] - mb);
            cab += (zeta_a[t] - ma) * (zeta_b[t] - mb);
        }
        pt.pearson = caa > 0 && cbb > 0 ? cab / std::sqrt(caa * cbb) : 0;

        // covariance z-scores between counts in different boxes
        std::vector<std::pair<long, long>> pairs;
        if (NB >= 2) {
            pairs.emplace_back(0, NB - 1);
            pairs.emplace_back(0, 1);
            if (NB >= 4) pairs.emplace_back(NB / 2, NB / 2 + 1);
        }
        for (auto [p, q] : pairs) {
            double sx = 0, sy = 0;
            for (long t = 0; t < trials; ++t) {
                sx += recs[t].a[p];
                sy += recs[t].b[q];
            }
            double mx = sx / trials, my = sy / trials;
            double cov = 0, var_cov = 0;
            for (long t = 0; t < trials; ++t) {
                double dx = recs[t].a[p] - mx, dy = recs[t].b[q] - my;
                cov += dx * dy;
                var_cov += dx * dx * dy * dy;
            }
            cov /= trials;
            var_cov = var_cov / trials - cov * cov;
            double se = std::sqrt(std::max(var_cov, 1e-300) / trials);
            pt.max_offdiag_z = std::max(pt.max_offdiag_z, std::abs(cov) / se);
        }

        pt.zeta_first_diag = compound_poisson_diagnostics(zeta_a);
        res.points.push_back(pt);
    }
    return res;
}

std::vector<int> cluster_sizes(const std::vector<double>& ascending, double resolution) {
    std::vector<int> sizes;
    if (ascending.empty()) return sizes;
    int cur = 1;
    for (std::size_t i = 1; i < ascending.size(); ++i) {
        if (ascending[i] - ascending[i - 1] <= resolution) {
            ++cur;
        } else {
            sizes.push_back(cur);
            cur = 1;
        }
    }
    sizes.push_back(cur);
    return sizes;
}

MultiplicityResult multiplicity_scan(const ModelSpec& spec, const DisorderSpec& dist, int dim,
                                     double w_lo, double w_hi, double q,
                                     const std::vector<int>& ladder, long trials,
                                     std::uint64_t seed, int workers) {
    MultiplicityResult res;
    res.m = spec.minami_rank(dim);
    res.q = q;
    EnergyWindow w = EnergyWindow::absolute(w_lo, w_hi);
    for (int L : ladder) {
        ModelContext ctx(LatticeBox::from_side(dim, compatible_side(L, spec)), spec, dist);
        double resolution = std::pow(static_cast<double>(L), -q);
        std::vector<int> maxima = run_trials<int>(trials, workers, [&](long t) {
            Spectrum sp = eigendecompose(ctx.hamiltonian(ctx.sample(seed, t)), false);
            auto [first, last] = window_range(sp.values, w);
            std::vector<double> vals(sp.values.data() + first, sp.values.data() + last);
            std::vector<int> sizes = cluster_sizes(vals, resolution);
            return sizes.empty() ? 0 : *std::max_element(sizes.begin(), sizes.end());
        });
        MultiplicityPoint p;
        p.L = L;
        p.side = ctx.box.side();
        p.resolution = resolution;
        p.exceed.trials = trials;
        for (int mx : maxima) {
            p.exceed.successes += mx > res.m ? 1 : 0;
            p.max_cluster_seen = std::max(p.max_cluster_seen, mx);
        }
        res.points.push_back(p);
    }
    return res;
}

namespace {

std::vector<long> sub_coordinate_set(const LatticeBox& big, int dof, int sub_radius) {
    if (sub_radius < 0 || sub_radius > big.hi())
        throw std::invalid_argument("sub_radius must fit inside the big box");
    LatticeBox sub = LatticeBox::from_radius(big.dim(), sub_radius);
    std::vector<long> coords;
    coords.reserve(sub.sites() * dof);
    std::vector<int> x(big.dim());
    for (long s = 0; s < sub.sites(); ++s) {
        sub.coord_of(s, x);
        long bigsite = big.index_of(x);
        for (int f = 0; f < dof; ++f) coords.push_back(bigsite * dof + f);
    }
    return coords;
}

} // namespace

TruncationResidual truncation_residual(const LatticeBox& big, int dof,
                                       const SymmetricMatrix& h_big, const Spectrum& sp,
                                       long column, int sub_radius) {
    if (!sp.has_vectors()) throw std::invalid_argument("truncation_residual needs eigenvectors");
    std::vector<long> coords = sub_coordinate_set(big, dof, sub_radius);
    long m = static_cast<long>(coords.size());
    Eigen::MatrixXd hs(m, m);
    Eigen::VectorXd phi(m);
    for (long i = 0; i < m; ++i) {
        phi[i] = sp.vectors(coords[i], column);
        for (long j = 0; j < m; ++j) hs(i, j) = h_big.dense()(coords[i], coords[j]);
    }
    TruncationResidual r;
    r.inside_norm = phi.norm();
    r.outside_mass = std::sqrt(std::max(0.0, 1.0 - r.inside_norm * r.inside_norm));
    r.residual = (hs * phi - sp.values[column] * phi).norm();
    return r;
}

Eigen::MatrixXd gram_overlaps(const LatticeBox& big, int dof, const Spectrum& sp,
                              const std::vector<long>& columns, int sub_radius) {
    if (!sp.has_vectors()) throw std::invalid_argument("gram_overlaps needs eigenvectors");
    std::vector<long> coords = sub_coordinate_set(big, dof, sub_radius);
    long k = static_cast<long>(columns.size());
    Eigen::MatrixXd restricted(coords.size(), k);
    for (long c = 0; c < k; ++c)
        for (std::size_t i = 0; i < coords.size(); ++i)
            restricted(i, c) = sp.vectors(coords[i], columns[c]);
    return restricted.transpose() * restricted;
}

} // namespace levelstat
