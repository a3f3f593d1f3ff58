#include "lanfit/estimation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

namespace lanfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const char* kLayoutNote = " (layout [a_1..a_F, b_1..b_F, p_1..p_F, q_1..q_F])";

// strength^exponent without exceptions; NaN marks 0^negative.
double powz(double base, double e) noexcept {
    if (base == 0.0) {
        if (e == 0.0) return 1.0;
        if (e < 0.0) return std::numeric_limits<double>::quiet_NaN();
        return 0.0;
    }
    return std::pow(base, e);
}

// Prepared, array-oriented view of a (model shape, series) pair.
struct Problem {
    std::size_t F = 0;
    std::size_t n = 0;
    double s = 1.0;
    std::vector<double> x_target, y_target;       // strengths, target category
    std::vector<std::vector<double>> x_cat, y_cat; // [i][t] shooter strengths
    std::vector<double> x_loss, y_loss;           // observed target losses
    ModelSpec shape;                               // categories/target/time_step
};

Problem make_problem(const ModelSpec& shape, const BattleSeries& series) {
    shape.validate(false);
    Problem pr;
    pr.F = shape.force_count();
    pr.n = series.n_days();
    pr.s = shape.time_step;
    pr.shape = shape;

    std::optional<std::size_t> target_in_model;
    for (std::size_t i = 0; i < pr.F; ++i) {
        if (shape.categories[i] == shape.target_category) target_in_model = i;
    }
    if (!target_in_model) {
        throw ValidationError("target category '" + shape.target_category +
                              "' is not among the model categories");
    }
    std::vector<std::size_t> cat_idx(pr.F);
    for (std::size_t i = 0; i < pr.F; ++i) {
        auto idx = series.category_index(shape.categories[i]);
        if (!idx) {
            throw ValidationError("model category '" + shape.categories[i] +
                                  "' not present in series");
        }
        cat_idx[i] = *idx;
    }
    const std::size_t tgt = cat_idx[*target_in_model];

    pr.x_cat.resize(pr.F);
    pr.y_cat.resize(pr.F);
    for (std::size_t t = 0; t < pr.n; ++t) {
        pr.x_target.push_back(series.on_hand(Side::X, tgt, t));
        pr.y_target.push_back(series.on_hand(Side::Y, tgt, t));
        pr.x_loss.push_back(series.losses(Side::X, tgt, t));
        pr.y_loss.push_back(series.losses(Side::Y, tgt, t));
        for (std::size_t i = 0; i < pr.F; ++i) {
            pr.x_cat[i].push_back(series.on_hand(Side::X, cat_idx[i], t));
            pr.y_cat[i].push_back(series.on_hand(Side::Y, cat_idx[i], t));
        }
    }
    return pr;
}

// Regressor columns: ux[i][t] = Xtgt_t^qx_i * Ycat_i_t^px_i and the mirror
// image for uy. Returns false when any entry fails to be finite.
bool make_regressors(const Problem& pr,
                     std::span<const double> px, std::span<const double> qx,
                     std::span<const double> py, std::span<const double> qy,
                     std::vector<std::vector<double>>& ux,
                     std::vector<std::vector<double>>& uy) {
    ux.assign(pr.F, std::vector<double>(pr.n));
    uy.assign(pr.F, std::vector<double>(pr.n));
    for (std::size_t i = 0; i < pr.F; ++i) {
        for (std::size_t t = 0; t < pr.n; ++t) {
            const double vx = powz(pr.x_target[t], qx[i]) * powz(pr.y_cat[i][t], px[i]);
            const double vy = powz(pr.y_target[t], qy[i]) * powz(pr.x_cat[i][t], py[i]);
            if (!std::isfinite(vx) || !std::isfinite(vy)) return false;
            ux[i][t] = vx;
            uy[i][t] = vy;
        }
    }
    return true;
}

double eval_ssr(const Problem& pr,
                const std::vector<std::vector<double>>& ux,
                const std::vector<std::vector<double>>& uy,
                std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t t = 0; t < pr.n; ++t) {
        double pred = 0.0;
        for (std::size_t i = 0; i < pr.F; ++i) pred += a[i] * ux[i][t];
        const double r = pr.x_loss[t] - pred;
        acc += r * r;
    }
    for (std::size_t t = 0; t < pr.n; ++t) {
        double pred = 0.0;
        for (std::size_t i = 0; i < pr.F; ++i) pred += b[i] * uy[i][t];
        const double r = pr.y_loss[t] - pred;
        acc += r * r;
    }
    return acc;
}

// Aggregate-form log-likelihood; -inf when any total rate is nonpositive
// or the value fails to be finite.
double eval_loglik_aggregate(const Problem& pr,
                             const std::vector<std::vector<double>>& ux,
                             const std::vector<std::vector<double>>& uy,
                             std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t t = 0; t < pr.n; ++t) {
        double rate = 0.0;
        for (std::size_t i = 0; i < pr.F; ++i) rate += a[i] * ux[i][t];
        if (!(rate > 0.0)) return -kInf;
        acc += pr.x_loss[t] * std::log(rate) - rate * pr.s;
    }
    for (std::size_t t = 0; t < pr.n; ++t) {
        double rate = 0.0;
        for (std::size_t i = 0; i < pr.F; ++i) rate += b[i] * uy[i][t];
        if (!(rate > 0.0)) return -kInf;
        acc += pr.y_loss[t] * std::log(rate) - rate * pr.s;
    }
    return std::isfinite(acc) ? acc : -kInf;
}

double eval_loglik_per_component(const Problem& pr,
                                 const std::vector<std::vector<double>>& ux,
                                 const std::vector<std::vector<double>>& uy,
                                 std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < pr.F; ++i) {
        for (std::size_t t = 0; t < pr.n; ++t) {
            const double cx = a[i] * ux[i][t];
            const double cy = b[i] * uy[i][t];
            if (!(cx > 0.0) || !(cy > 0.0)) return -kInf;
            acc += pr.x_loss[t] * std::log(cx) + pr.y_loss[t] * std::log(cy) -
                   (cx + cy) * pr.s;
        }
    }
    return std::isfinite(acc) ? acc : -kInf;
}

// ---- rate profiling -------------------------------------------------------

std::vector<Interval> default_rate_bounds(std::size_t F) {
    return std::vector<Interval>(2 * F, Interval{1e-9, 100.0});
}

// Exact box-constrained least squares min ||U z - d||^2, z_i in [lo_i, hi_i],
// by enumerating active sets (each variable free, at lo, or at hi). The free
// subproblem uses a rank-revealing decomposition, so rank-deficient windows
// get the minimum-norm solution.
bool box_least_squares(const std::vector<std::vector<double>>& u,
                       std::span<const double> d,
                       std::span<const Interval> box,
                       std::vector<double>& out) {
    const std::size_t F = u.size();
    const std::size_t n = d.size();
    if (F > 8) throw FitError("rate profiling supports at most 8 categories");

    Eigen::MatrixXd U(n, F);
    Eigen::VectorXd dv(n);
    for (std::size_t t = 0; t < n; ++t) {
        dv(t) = d[t];
        for (std::size_t i = 0; i < F; ++i) U(t, i) = u[i][t];
    }

    double best = kInf;
    std::vector<double> best_z;
    std::vector<int> state(F, 0); // 0 free, 1 at lo, 2 at hi
    std::size_t combos = 1;
    for (std::size_t i = 0; i < F; ++i) combos *= 3;

    for (std::size_t code = 0; code < combos; ++code) {
        std::size_t c = code;
        for (std::size_t i = 0; i < F; ++i) {
            state[i] = static_cast<int>(c % 3);
            c /= 3;
        }
        std::vector<std::size_t> free_idx;
        Eigen::VectorXd r = dv;
        std::vector<double> z(F, 0.0);
        bool feasible = true;
        for (std::size_t i = 0; i < F; ++i) {
            if (state[i] == 0) {
                free_idx.push_back(i);
            } else {
                z[i] = state[i] == 1 ? box[i].lo : box[i].hi;
                if (!std::isfinite(z[i])) { feasible = false; break; }
                r -= z[i] * U.col(i);
            }
        }
        if (!feasible) continue;
        if (!free_idx.empty()) {
            Eigen::MatrixXd M(n, free_idx.size());
            for (std::size_t k = 0; k < free_idx.size(); ++k) M.col(k) = U.col(free_idx[k]);
            Eigen::VectorXd zf = M.completeOrthogonalDecomposition().solve(r);
            for (std::size_t k = 0; k < free_idx.size(); ++k) {
                const double v = zf(k);
                if (!std::isfinite(v) || v < box[free_idx[k]].lo || v > box[free_idx[k]].hi) {
                    feasible = false;
                    break;
                }
                z[free_idx[k]] = v;
            }
            if (!feasible) continue;
        }
        Eigen::VectorXd pred = Eigen::VectorXd::Zero(n);
        for (std::size_t i = 0; i < F; ++i) pred += z[i] * U.col(i);
        const double v = (dv - pred).squaredNorm();
        if (v < best) {
            best = v;
            best_z = z;
        }
    }
    if (!std::isfinite(best)) return false;
    out = std::move(best_z);
    return true;
}

// Maximizes sum_t d_t ln(sum_i z_i u_i_t) - s * sum_t sum_i z_i u_i_t over the
// box (intersected with z > 0). Concave; damped projected Newton started at
// the shared-denominator estimate.
bool box_loglik_rates(const std::vector<std::vector<double>>& u,
                      std::span<const double> d, double s,
                      std::span<const Interval> box,
                      std::vector<double>& out) {
    const std::size_t F = u.size();
    const std::size_t n = d.size();

    std::vector<double> lo(F), hi(F);
    for (std::size_t i = 0; i < F; ++i) {
        lo[i] = std::max(box[i].lo, 1e-300);
        hi[i] = box[i].hi;
        if (!(lo[i] <= hi[i])) return false;
    }
    auto project = [&](std::vector<double>& z) {
        for (std::size_t i = 0; i < F; ++i) z[i] = std::clamp(z[i], lo[i], hi[i]);
    };
    auto value = [&](const std::vector<double>& z) {
        double acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            double rate = 0.0;
            for (std::size_t i = 0; i < F; ++i) rate += z[i] * u[i][t];
            if (!(rate > 0.0)) return -kInf;
            acc += d[t] * std::log(rate) - rate * s;
        }
        return std::isfinite(acc) ? acc : -kInf;
    };

    // shared-denominator start
    double sum_d = 0.0, sum_u = 0.0;
    for (std::size_t t = 0; t < n; ++t) sum_d += d[t];
    for (std::size_t i = 0; i < F; ++i)
        for (std::size_t t = 0; t < n; ++t) sum_u += u[i][t];
    std::vector<double> z(F, 1e-3);
    if (sum_u > 0.0 && std::isfinite(sum_u) && sum_d > 0.0) {
        std::fill(z.begin(), z.end(), sum_d / (sum_u * s));
    }
    project(z);
    double f = value(z);
    if (!std::isfinite(f)) {
        std::fill(z.begin(), z.end(), 1.0);
        project(z);
        f = value(z);
        if (!std::isfinite(f)) return false;
    }

    Eigen::VectorXd g(F);
    Eigen::MatrixXd H(F, F);
    for (int iter = 0; iter < 200; ++iter) {
        g.setZero();
        H.setZero();
        for (std::size_t t = 0; t < n; ++t) {
            double rate = 0.0;
            for (std::size_t i = 0; i < F; ++i) rate += z[i] * u[i][t];
            for (std::size_t i = 0; i < F; ++i) {
                g(i) += d[t] * u[i][t] / rate - u[i][t] * s;
                for (std::size_t j = 0; j < F; ++j) {
                    H(i, j) -= d[t] * u[i][t] * u[j][t] / (rate * rate);
                }
            }
        }
        double gnorm = 0.0;
        for (std::size_t i = 0; i < F; ++i) {
            // at an active bound only the inward derivative matters
            double gi = g(i);
            if (z[i] <= lo[i] && gi < 0) gi = 0;
            if (z[i] >= hi[i] && gi > 0) gi = 0;
            gnorm = std::max(gnorm, std::abs(gi) * std::max(std::abs(z[i]), 1e-12));
        }
        if (gnorm <= 1e-11 * (1.0 + std::abs(f))) break;

        Eigen::VectorXd step = (-H).ldlt().solve(g);
        if (!step.allFinite()) step = g; // gradient fallback
        double tau = 1.0;
        bool moved = false;
        for (int bt = 0; bt < 50; ++bt) {
            std::vector<double> zt(F);
            for (std::size_t i = 0; i < F; ++i) zt[i] = z[i] + tau * step(i);
            project(zt);
            const double ft = value(zt);
            if (ft > f) {
                z = std::move(zt);
                f = ft;
                moved = true;
                break;
            }
            tau *= 0.5;
        }
        if (!moved) break;
    }
    out = z;
    return true;
}

RateEstimates profile_rates_impl(const Problem& pr,
                                 const std::vector<std::vector<double>>& ux,
                                 const std::vector<std::vector<double>>& uy,
                                 Objective objective,
                                 std::span<const Interval> rate_bounds) {
    std::vector<Interval> box(rate_bounds.begin(), rate_bounds.end());
    if (box.empty()) box = default_rate_bounds(pr.F);
    if (box.size() != 2 * pr.F) {
        throw ValidationError("rate bounds must have 2F entries");
    }
    std::span<const Interval> box_a(box.data(), pr.F);
    std::span<const Interval> box_b(box.data() + pr.F, pr.F);

    RateEstimates est;
    bool ok = false;
    if (objective == Objective::ssr) {
        // absorb the time step into the regressors? predictions are rates;
        // the squared error compares rates directly, so no scaling needed.
        ok = box_least_squares(ux, pr.x_loss, box_a, est.a) &&
             box_least_squares(uy, pr.y_loss, box_b, est.b);
    } else {
        ok = box_loglik_rates(ux, pr.x_loss, pr.s, box_a, est.a) &&
             box_loglik_rates(uy, pr.y_loss, pr.s, box_b, est.b);
    }
    if (!ok) throw DomainError("rate profiling failed: non-finite regressors");
    return est;
}

// ---- Nelder-Mead ----------------------------------------------------------

struct NMResult {
    std::vector<double> x;
    double f = kInf;
    int iterations = 0;
    bool converged = false;
};

NMResult nelder_mead(const std::function<double(std::span<const double>)>& fn,
                     std::span<const double> x0, std::span<const Interval> bounds,
                     int max_iter, double tol) {
    const std::size_t dim = x0.size();
    auto project = [&](std::vector<double>& x) {
        for (std::size_t i = 0; i < dim; ++i) x[i] = std::clamp(x[i], bounds[i].lo, bounds[i].hi);
    };

    std::vector<std::vector<double>> pts;
    std::vector<double> fv;
    {
        std::vector<double> base(x0.begin(), x0.end());
        project(base);
        pts.push_back(base);
        for (std::size_t i = 0; i < dim; ++i) {
            std::vector<double> v = base;
            const double width = bounds[i].hi - bounds[i].lo;
            double step = std::clamp(0.05 * width, 1e-3, 2.0);
            if (width == 0.0) step = 0.0; // pinned parameter
            v[i] += (v[i] + step <= bounds[i].hi) ? step : -step;
            project(v);
            pts.push_back(v);
        }
        for (auto& p : pts) fv.push_back(fn(p));
    }

    NMResult res;
    const std::size_t m = pts.size();
    std::vector<std::size_t> order(m);
    int iter = 0;
    for (; iter < max_iter; ++iter) {
        for (std::size_t i = 0; i < m; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const double fb = fv[order[0]];
        const double fw = fv[order[m - 1]];
        if (std::isfinite(fb)) {
            const double spread = fw - fb;
            if (spread <= tol * (std::abs(fb) + tol)) {
                res.converged = true;
                break;
            }
        }

        std::vector<double> centroid(dim, 0.0);
        for (std::size_t k = 0; k + 1 < m; ++k) {
            for (std::size_t i = 0; i < dim; ++i) centroid[i] += pts[order[k]][i];
        }
        for (double& c : centroid) c /= static_cast<double>(m - 1);

        const auto& worst = pts[order[m - 1]];
        auto blend = [&](double coef) {
            std::vector<double> v(dim);
            for (std::size_t i = 0; i < dim; ++i)
                v[i] = centroid[i] + coef * (centroid[i] - worst[i]);
            project(v);
            return v;
        };

        std::vector<double> xr = blend(1.0);
        const double fr = fn(xr);
        const double fs = fv[order[m - 2]];
        if (fr < fb) {
            std::vector<double> xe = blend(2.0);
            const double fe = fn(xe);
            if (fe < fr) {
                pts[order[m - 1]] = std::move(xe);
                fv[order[m - 1]] = fe;
            } else {
                pts[order[m - 1]] = std::move(xr);
                fv[order[m - 1]] = fr;
            }
        } else if (fr < fs) {
            pts[order[m - 1]] = std::move(xr);
            fv[order[m - 1]] = fr;
        } else {
            const bool outside = fr < fv[order[m - 1]];
            std::vector<double> xc = blend(outside ? 0.5 : -0.5);
            const double fc = fn(xc);
            if (fc < std::min(fr, fv[order[m - 1]])) {
                pts[order[m - 1]] = std::move(xc);
                fv[order[m - 1]] = fc;
            } else {
                // shrink toward the best vertex
                const auto best_pt = pts[order[0]];
                for (std::size_t k = 1; k < m; ++k) {
                    auto& p = pts[order[k]];
                    for (std::size_t i = 0; i < dim; ++i)
                        p[i] = best_pt[i] + 0.5 * (p[i] - best_pt[i]);
                    project(p);
                    fv[order[k]] = fn(p);
                }
            }
        }
    }
    res.iterations = iter;
    std::size_t best = 0;
    for (std::size_t i = 1; i < m; ++i)
        if (fv[i] < fv[best]) best = i;
    res.x = pts[best];
    res.f = fv[best];
    return res;
}

// ---- finite-difference Newton helpers --------------------------------------

std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& fn,
                                std::span<const double> x, double rel_step) {
    std::vector<double> g(x.size());
    std::vector<double> v(x.begin(), x.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double h = rel_step * std::max(1.0, std::abs(x[i]));
        const double xi = v[i];
        v[i] = xi + h;
        const double fp = fn(v);
        v[i] = xi - h;
        const double fm = fn(v);
        v[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

Eigen::MatrixXd fd_hessian(const std::function<double(std::span<const double>)>& fn,
                           std::span<const double> x, double rel_step) {
    const std::size_t dim = x.size();
    Eigen::MatrixXd H(dim, dim);
    std::vector<double> v(x.begin(), x.end());
    const double f0 = fn(v);
    std::vector<double> h(dim);
    for (std::size_t i = 0; i < dim; ++i) h[i] = rel_step * std::max(1.0, std::abs(x[i]));

    for (std::size_t i = 0; i < dim; ++i) {
        const double xi = v[i];
        v[i] = xi + h[i];
        const double fp = fn(v);
        v[i] = xi - h[i];
        const double fm = fn(v);
        v[i] = xi;
        H(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    }
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = i + 1; j < dim; ++j) {
            const double xi = v[i], xj = v[j];
            v[i] = xi + h[i]; v[j] = xj + h[j];
            const double fpp = fn(v);
            v[j] = xj - h[j];
            const double fpm = fn(v);
            v[i] = xi - h[i]; v[j] = xj + h[j];
            const double fmp = fn(v);
            v[j] = xj - h[j];
            const double fmm = fn(v);
            v[i] = xi; v[j] = xj;
            const double val = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            H(i, j) = val;
            H(j, i) = val;
        }
    }
    return H;
}

double scaled_gradient_norm(std::span<const double> g, std::span<const double> x, double f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = g[i] * std::max(1.0, std::abs(x[i])) / std::max(1.0, std::abs(f));
        acc += s * s;
    }
    return std::sqrt(acc);
}

std::string format_vector(std::span<const double> x) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i) os << ", ";
        os << x[i];
    }
    os << ']';
    return os.str();
}

} // namespace

const char* objective_name(Objective o) {
    return o == Objective::ssr ? "ssr" : "loglik";
}

double ssr(const ModelSpec& model, const BattleSeries& series) {
    Problem pr = make_problem(model, series);
    std::vector<std::vector<double>> ux, uy;
    if (!make_regressors(pr, model.p, model.q, model.p_for_y(), model.q_for_y(), ux, uy)) {
        throw DomainError("non-finite powered strengths under this model");
    }
    const double v = eval_ssr(pr, ux, uy, model.a, model.b);
    if (!std::isfinite(v)) throw DomainError("non-finite squared-error value");
    return v;
}

double log_likelihood(const ModelSpec& model, const BattleSeries& series,
                      LikelihoodForm form) {
    Problem pr = make_problem(model, series);
    for (std::size_t i = 0; i < pr.F; ++i) {
        if (!(model.a[i] > 0.0) || !(model.b[i] > 0.0)) {
            throw DomainError("log-likelihood requires strictly positive rates "
                              "(component '" + model.categories[i] + "')");
        }
    }
    std::vector<std::vector<double>> ux, uy;
    if (!make_regressors(pr, model.p, model.q, model.p_for_y(), model.q_for_y(), ux, uy)) {
        throw DomainError("non-finite powered strengths under this model");
    }
    for (std::size_t i = 0; i < pr.F; ++i) {
        for (std::size_t t = 0; t < pr.n; ++t) {
            if (!(model.a[i] * ux[i][t] > 0.0) || !(model.b[i] * uy[i][t] > 0.0)) {
                throw DomainError("nonpositive predicted rate on day " +
                                  std::to_string(series.day(t)) + ", component '" +
                                  model.categories[i] + "'");
            }
        }
    }
    const double v = form == LikelihoodForm::aggregate
                         ? eval_loglik_aggregate(pr, ux, uy, model.a, model.b)
                         : eval_loglik_per_component(pr, ux, uy, model.a, model.b);
    if (!std::isfinite(v)) throw DomainError("non-finite log-likelihood value");
    return v;
}

RateEstimates concentrated_rates(const ModelSpec& shape, const BattleSeries& series,
                                 RateFormula formula) {
    Problem pr = make_problem(shape, series);
    std::vector<std::vector<double>> ux, uy;
    if (!make_regressors(pr, shape.p, shape.q, shape.p_for_y(), shape.q_for_y(), ux, uy)) {
        throw DomainError("non-finite powered strengths under these exponents");
    }
    double sum_x = 0.0, sum_y = 0.0;
    for (std::size_t t = 0; t < pr.n; ++t) {
        sum_x += pr.x_loss[t];
        sum_y += pr.y_loss[t];
    }

    RateEstimates est;
    est.a.resize(pr.F);
    est.b.resize(pr.F);
    auto finish = [&](double num, double denom, const char* side) {
        if (!std::isfinite(denom)) {
            throw DomainError(std::string("non-finite denominator for side ") + side);
        }
        if (denom == 0.0) {
            throw DomainError(std::string("zero denominator for side ") + side);
        }
        return num / denom;
    };
    if (formula == RateFormula::shared_denominator) {
        double den_x = 0.0, den_y = 0.0;
        for (std::size_t i = 0; i < pr.F; ++i) {
            for (std::size_t t = 0; t < pr.n; ++t) {
                den_x += ux[i][t] * pr.s;
                den_y += uy[i][t] * pr.s;
            }
        }
        for (std::size_t i = 0; i < pr.F; ++i) {
            est.a[i] = finish(sum_x, den_x, "X");
            est.b[i] = finish(sum_y, den_y, "Y");
        }
    } else {
        for (std::size_t i = 0; i < pr.F; ++i) {
            double den_x = 0.0, den_y = 0.0;
            for (std::size_t t = 0; t < pr.n; ++t) {
                den_x += ux[i][t] * pr.s;
                den_y += uy[i][t] * pr.s;
            }
            est.a[i] = finish(sum_x, den_x, "X");
            est.b[i] = finish(sum_y, den_y, "Y");
        }
    }
    return est;
}

RateEstimates profiled_rates(const ModelSpec& shape, const BattleSeries& series,
                             Objective objective,
                             std::span<const Interval> rate_bounds) {
    Problem pr = make_problem(shape, series);
    std::vector<std::vector<double>> ux, uy;
    if (!make_regressors(pr, shape.p, shape.q, shape.p_for_y(), shape.q_for_y(), ux, uy)) {
        throw DomainError("non-finite powered strengths under these exponents");
    }
    return profile_rates_impl(pr, ux, uy, objective, rate_bounds);
}

std::vector<Interval> FitConfig::default_bounds(std::size_t force_count) {
    std::vector<Interval> b(4 * force_count);
    for (std::size_t i = 0; i < 2 * force_count; ++i) b[i] = {1e-9, 100.0};
    for (std::size_t i = 2 * force_count; i < 4 * force_count; ++i) b[i] = {-10.0, 50.0};
    return b;
}

void FitConfig::validate(std::size_t force_count) const {
    if (restarts < 1) throw ValidationError("restarts must be >= 1");
    if (max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
    if (!(tolerance > 0.0)) throw ValidationError("tolerance must be positive");
    if (!bounds.empty() && bounds.size() != 4 * force_count) {
        throw ValidationError("bounds must have 4F entries" + std::string(kLayoutNote));
    }
    for (const auto& b : bounds) {
        if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || b.lo > b.hi) {
            throw ValidationError("each bound must be a finite nonempty interval");
        }
    }
    for (const auto& s : starts) {
        if (s.size() != 4 * force_count) {
            throw ValidationError("each start must have 4F entries" + std::string(kLayoutNote));
        }
        for (double v : s) {
            if (!std::isfinite(v)) throw ValidationError("non-finite start value");
        }
    }
}

namespace {

struct Workspace {
    Problem pr;
    std::vector<Interval> bounds;       // full 4F
    std::span<const Interval> rate_box; // first 2F of bounds
    Objective objective = Objective::ssr;
    bool concentrate = true;

    // scratch
    mutable std::vector<std::vector<double>> ux, uy;

    std::size_t free_dim() const { return concentrate ? 2 * pr.F : 4 * pr.F; }

    // free vector <-> full vector
    std::vector<double> to_free(std::span<const double> full) const {
        if (!concentrate) return {full.begin(), full.end()};
        return {full.begin() + 2 * pr.F, full.end()};
    }

    // Minimization-oriented objective over the free vector (+inf invalid).
    double operator()(std::span<const double> v) const {
        const std::size_t F = pr.F;
        std::span<const double> pexp, qexp;
        std::vector<double> rates_a, rates_b;
        std::span<const double> a, b;
        if (concentrate) {
            pexp = v.subspan(0, F);
            qexp = v.subspan(F, F);
        } else {
            a = v.subspan(0, F);
            b = v.subspan(F, F);
            pexp = v.subspan(2 * F, F);
            qexp = v.subspan(3 * F, F);
        }
        if (!make_regressors(pr, pexp, qexp, pexp, qexp, ux, uy)) return kInf;
        if (concentrate) {
            try {
                RateEstimates est = profile_rates_impl(pr, ux, uy, objective, rate_box);
                rates_a = std::move(est.a);
                rates_b = std::move(est.b);
            } catch (const Error&) {
                return kInf;
            }
            a = rates_a;
            b = rates_b;
        }
        if (objective == Objective::ssr) {
            const double val = eval_ssr(pr, ux, uy, a, b);
            return std::isfinite(val) ? val : kInf;
        }
        const double ll = eval_loglik_aggregate(pr, ux, uy, a, b);
        return std::isfinite(ll) ? -ll : kInf;
    }

    RateEstimates rates_at(std::span<const double> v) const {
        const std::size_t F = pr.F;
        RateEstimates est;
        if (concentrate) {
            std::span<const double> pexp = v.subspan(0, F);
            std::span<const double> qexp = v.subspan(F, F);
            if (!make_regressors(pr, pexp, qexp, pexp, qexp, ux, uy)) {
                throw DomainError("non-finite powered strengths at the solution");
            }
            return profile_rates_impl(pr, ux, uy, objective, rate_box);
        }
        est.a.assign(v.begin(), v.begin() + F);
        est.b.assign(v.begin() + F, v.begin() + 2 * F);
        return est;
    }
};

// Deterministic coarse lattice over the exponent box; returns the most
// promising cells as start vectors (in the free-vector coordinates).
std::vector<std::vector<double>> lattice_starts(const Workspace& ws,
                                                std::span<const Interval> exp_bounds,
                                                std::size_t keep) {
    const std::size_t dims = exp_bounds.size();
    std::size_t per_dim = 3;
    for (std::size_t m = 9; m >= 3; --m) {
        double total = 1.0;
        for (std::size_t i = 0; i < dims; ++i) total *= static_cast<double>(m);
        if (total <= 4096.0) {
            per_dim = m;
            break;
        }
    }
    std::vector<std::vector<double>> levels(dims);
    for (std::size_t i = 0; i < dims; ++i) {
        const double lo = exp_bounds[i].lo, hi = exp_bounds[i].hi;
        if (per_dim == 1 || hi == lo) {
            levels[i] = {lo};
        } else {
            for (std::size_t k = 0; k < per_dim; ++k) {
                levels[i].push_back(lo + (hi - lo) * static_cast<double>(k) /
                                             static_cast<double>(per_dim - 1));
            }
        }
    }
    std::size_t total = 1;
    for (auto& l : levels) total *= l.size();

    // score with rates concentrated regardless of fit mode
    Workspace probe = ws;
    probe.concentrate = true;

    std::vector<std::pair<double, std::vector<double>>> scored;
    std::vector<double> point(dims);
    for (std::size_t code = 0; code < total; ++code) {
        std::size_t c = code;
        for (std::size_t i = 0; i < dims; ++i) {
            point[i] = levels[i][c % levels[i].size()];
            c /= levels[i].size();
        }
        const double f = probe(point);
        if (std::isfinite(f)) scored.emplace_back(f, point);
    }
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < scored.size() && out.size() < keep; ++i) {
        out.push_back(scored[i].second);
    }
    return out;
}

FitResult assemble_result(const Workspace& ws, const BattleSeries& series,
                          std::span<const double> best_free, double best_f,
                          bool converged, int iterations) {
    const std::size_t F = ws.pr.F;
    RateEstimates rates = ws.rates_at(best_free);
    std::span<const double> exps = ws.concentrate
                                       ? best_free
                                       : best_free.subspan(2 * F, 2 * F);

    FitResult out;
    out.model = ws.pr.shape;
    out.model.p.assign(exps.begin(), exps.begin() + F);
    out.model.q.assign(exps.begin() + F, exps.end());
    out.model.a = rates.a;
    out.model.b = rates.b;
    out.objective = ws.objective;
    out.objective_value = ws.objective == Objective::ssr ? best_f : -best_f;
    out.converged = converged;
    out.iterations = iterations;
    out.fitted = predict_series(out.model, series);
    for (std::size_t t = 0; t < series.n_days(); ++t) {
        const auto tgt = series.category_index(out.model.target_category);
        out.x_residuals.push_back(series.losses(Side::X, *tgt, t) - out.fitted.x_total[t]);
        out.y_residuals.push_back(series.losses(Side::Y, *tgt, t) - out.fitted.y_total[t]);
    }
    return out;
}

} // namespace

FitResult fit(const BattleSeries& series, const ModelSpec& shape,
              const FitConfig& config) {
    if (shape.y_exponents) {
        throw ValidationError("fit expects shared exponents across sides");
    }
    const std::size_t F = shape.force_count();
    config.validate(F);

    Workspace ws;
    ws.pr = make_problem(shape, series);
    ws.bounds = config.bounds.empty() ? FitConfig::default_bounds(F) : config.bounds;
    ws.rate_box = std::span<const Interval>(ws.bounds.data(), 2 * F);
    ws.objective = config.objective;
    ws.concentrate = config.concentrate_rates;

    std::span<const Interval> exp_bounds(ws.bounds.data() + 2 * F, 2 * F);
    std::vector<Interval> free_bounds =
        ws.concentrate ? std::vector<Interval>(exp_bounds.begin(), exp_bounds.end())
                       : ws.bounds;

    auto project_free = [&](std::vector<double> v) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = std::clamp(v[i], free_bounds[i].lo, free_bounds[i].hi);
        }
        return v;
    };

    // starts: paper-style defaults, caller-provided vectors, lattice picks,
    // then seeded jitter up to `restarts`
    std::vector<std::vector<double>> starts;
    {
        const double def = config.objective == Objective::ssr ? 0.0 : 0.5;
        starts.push_back(project_free(std::vector<double>(ws.free_dim(), def)));
        for (const auto& s : config.starts) {
            starts.push_back(project_free(ws.to_free(s)));
        }
        if (config.lattice_seed) {
            for (auto& cell : lattice_starts(ws, exp_bounds, 4)) {
                std::vector<double> v;
                if (ws.concentrate) {
                    v = std::move(cell);
                } else {
                    // splice concentrated rates in front of the lattice exponents
                    std::vector<double> full(4 * F, 0.0);
                    std::copy(cell.begin(), cell.end(), full.begin() + 2 * F);
                    Workspace probe = ws;
                    probe.concentrate = true;
                    try {
                        RateEstimates est = probe.rates_at(cell);
                        std::copy(est.a.begin(), est.a.end(), full.begin());
                        std::copy(est.b.begin(), est.b.end(), full.begin() + F);
                    } catch (const Error&) {
                        continue;
                    }
                    v = std::move(full);
                }
                starts.push_back(project_free(std::move(v)));
            }
        }
        std::mt19937_64 rng(config.seed);
        while (starts.size() < static_cast<std::size_t>(config.restarts)) {
            std::vector<double> v(ws.free_dim());
            for (std::size_t i = 0; i < v.size(); ++i) {
                std::uniform_real_distribution<double> dist(free_bounds[i].lo,
                                                            free_bounds[i].hi);
                v[i] = dist(rng);
            }
            starts.push_back(std::move(v));
        }
    }

    std::function<double(std::span<const double>)> objective =
        [&ws](std::span<const double> v) { return ws(v); };

    NMResult best;
    int total_iterations = 0;
    for (const auto& s : starts) {
        NMResult r = nelder_mead(objective, s, free_bounds,
                                 config.max_iterations, config.tolerance);
        total_iterations += r.iterations;
        if (r.f < best.f || best.x.empty()) {
            const bool keep_flag = r.f < best.f;
            if (keep_flag || best.x.empty()) {
                best.converged = r.converged;
            }
            best.x = std::move(r.x);
            best.f = r.f;
        }
    }
    if (best.x.empty() || !std::isfinite(best.f)) {
        throw FitError("every start produced a non-finite objective (" +
                       std::to_string(starts.size()) + " starts, objective " +
                       objective_name(config.objective) + ")");
    }

    if (config.newton_polish) {
        std::vector<double> x = best.x;
        double f = best.f;
        for (int iter = 0; iter < 25; ++iter) {
            std::vector<double> g = fd_gradient(objective, x, 1e-7);
            bool finite = true;
            for (double v : g) finite = finite && std::isfinite(v);
            if (!finite) break;
            if (scaled_gradient_norm(g, x, f) < 1e-12) break;
            Eigen::MatrixXd H = fd_hessian(objective, x, 1e-5);
            if (!H.allFinite()) break;
            Eigen::VectorXd gv(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) gv(i) = g[i];
            Eigen::VectorXd d = H.ldlt().solve(-gv);
            if (!d.allFinite()) break;
            double tau = 1.0;
            bool improved = false;
            for (int bt = 0; bt < 25; ++bt) {
                std::vector<double> xt(x.size());
                for (std::size_t i = 0; i < x.size(); ++i) {
                    xt[i] = std::clamp(x[i] + tau * d(i), free_bounds[i].lo,
                                       free_bounds[i].hi);
                }
                const double ft = objective(xt);
                if (ft < f) {
                    x = std::move(xt);
                    f = ft;
                    improved = true;
                    break;
                }
                tau *= 0.5;
            }
            total_iterations += 1;
            if (!improved) break;
        }
        if (f < best.f) {
            best.x = std::move(x);
            best.f = f;
        }
    }

    return assemble_result(ws, series, best.x, best.f, best.converged,
                           total_iterations);
}

ModelSpec loglinear_fit(const BattleSeries& series, const std::string& target) {
    auto tgt = series.category_index(target);
    if (!tgt) {
        throw ValidationError("target category '" + target + "' not present in series");
    }
    const std::size_t n = series.n_days();
    if (n < 3) throw ValidationError("insufficient observations (need at least 3 days)");

    auto regress = [&](Side own_side) {
        const Side enemy_side = own_side == Side::X ? Side::Y : Side::X;
        Eigen::MatrixXd design(n, 3);
        Eigen::VectorXd response(n);
        for (std::size_t t = 0; t < n; ++t) {
            const double loss = series.losses(own_side, *tgt, t);
            const double own = series.on_hand(own_side, *tgt, t);
            const double enemy = series.on_hand(enemy_side, *tgt, t);
            if (!(loss > 0.0) || !(own > 0.0) || !(enemy > 0.0)) {
                throw DomainError("log-linear regression needs positive losses and "
                                  "strengths; day " + std::to_string(series.day(t)) +
                                  ", side " + side_label(own_side));
            }
            design(t, 0) = 1.0;
            design(t, 1) = std::log(own);
            design(t, 2) = std::log(enemy);
            response(t) = std::log(loss);
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
        qr.setThreshold(1e-10);
        if (qr.rank() < 3) {
            throw FitError("rank-deficient design in log-linear regression");
        }
        Eigen::Vector3d beta = qr.solve(response);
        struct { double rate, own_exp, enemy_exp; } out{std::exp(beta(0)), beta(1), beta(2)};
        return out;
    };

    const auto x_fit = regress(Side::X);
    const auto y_fit = regress(Side::Y);

    ModelSpec m;
    m.categories = {target};
    m.target_category = target;
    m.a = {x_fit.rate};
    m.q = {x_fit.own_exp};
    m.p = {x_fit.enemy_exp};
    m.b = {y_fit.rate};
    m.y_exponents = SideExponents{{y_fit.enemy_exp}, {y_fit.own_exp}};
    return m;
}

FitResult newton_raphson_fit(const BattleSeries& series, const ModelSpec& shape,
                             std::span<const double> init,
                             std::span<const Interval> bounds,
                             const NewtonOptions& options) {
    if (shape.y_exponents) {
        throw ValidationError("fit expects shared exponents across sides");
    }
    const std::size_t F = shape.force_count();
    std::vector<Interval> box(bounds.begin(), bounds.end());
    if (box.empty()) box = FitConfig::default_bounds(F);
    if (box.size() != 4 * F || init.size() != 4 * F) {
        throw ValidationError("init and bounds must have 4F entries" +
                              std::string(kLayoutNote));
    }
    for (std::size_t i = 0; i < init.size(); ++i) {
        if (init[i] < box[i].lo || init[i] > box[i].hi) {
            throw ValidationError("initial value " + std::to_string(init[i]) +
                                  " outside bounds at index " + std::to_string(i));
        }
    }

    Workspace ws;
    ws.pr = make_problem(shape, series);
    ws.bounds = box;
    ws.rate_box = std::span<const Interval>(ws.bounds.data(), 2 * F);
    ws.objective = Objective::ssr;
    ws.concentrate = false;

    std::function<double(std::span<const double>)> objective =
        [&ws](std::span<const double> v) { return ws(v); };

    std::vector<double> x(init.begin(), init.end());
    double f = objective(x);
    if (!std::isfinite(f)) {
        throw FitError("squared-error objective is non-finite at the initial point");
    }

    bool converged = false;
    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        std::vector<double> g = fd_gradient(objective, x, options.fd_step);
        if (scaled_gradient_norm(g, x, f) < options.gradient_tolerance) {
            converged = true;
            break;
        }
        Eigen::MatrixXd H = fd_hessian(objective, x, options.fd_step);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
        const auto& ev = eig.eigenvalues();
        double abs_max = 0.0, abs_min = kInf;
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            abs_max = std::max(abs_max, std::abs(ev(i)));
            abs_min = std::min(abs_min, std::abs(ev(i)));
        }
        const double condition = abs_min == 0.0 ? kInf : abs_max / abs_min;
        if (!std::isfinite(condition) || condition > options.condition_limit) {
            throw FitError("ill-conditioned Hessian (condition estimate " +
                           std::to_string(condition) + ") at iterate " +
                           format_vector(x));
        }
        Eigen::VectorXd gv(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) gv(i) = g[i];
        Eigen::VectorXd d = H.fullPivLu().solve(-gv);
        if (!d.allFinite()) {
            throw FitError("Newton step failed to solve at iterate " + format_vector(x));
        }
        double tau = 1.0;
        double ft = kInf;
        std::vector<double> xt(x.size());
        for (int bt = 0; bt < 30; ++bt) {
            for (std::size_t i = 0; i < x.size(); ++i) {
                xt[i] = std::clamp(x[i] + tau * d(i), box[i].lo, box[i].hi);
            }
            ft = objective(xt);
            if (std::isfinite(ft)) break;
            tau *= 0.5;
        }
        if (!std::isfinite(ft)) {
            throw FitError("Newton iteration diverged at iterate " + format_vector(x));
        }
        x = xt;
        f = ft;
    }

    return assemble_result(ws, series, x, f, converged, iter);
}

} // namespace lanfit
