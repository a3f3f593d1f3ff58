#ifndef LANFIT_ESTIMATION_HPP
#define LANFIT_ESTIMATION_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lanfit/battle_data.hpp"
#include "lanfit/model.hpp"

namespace lanfit {

enum class Objective { ssr, loglik };

const char* objective_name(Objective o);

/// Squared-error objective: sum over days of the squared difference between
/// observed and predicted target-category losses, both sides pooled.
double ssr(const ModelSpec& model, const BattleSeries& series);

/// Two readings of the exponential-casualty log-likelihood.
///
/// `aggregate` weights the log of each side's *total* predicted rate by the
/// observed daily casualty count:
///     sum_t [ Xdot_t ln(Rx_t) + Ydot_t ln(Ry_t) - (Rx_t + Ry_t) s ].
/// This is the form whose per-battle-day maxima reproduce the published
/// per-phase likelihood values on the Kursk data, and it is the default.
///
/// `per_component` expands the log over shooter categories instead
/// (the literal printed form of the likelihood):
///     sum_i sum_t [ Xdot_t ln(c_xi_t) + Ydot_t ln(c_yi_t) - (c_xi_t + c_yi_t) s ].
/// The two coincide when F = 1.
enum class LikelihoodForm { aggregate, per_component };

double log_likelihood(const ModelSpec& model, const BattleSeries& series,
                      LikelihoodForm form = LikelihoodForm::aggregate);

/// Closed-form attrition-rate estimates at fixed exponents.
///
/// `shared_denominator` is the stationarity solution exactly as printed:
///     a_i = sum_t Xdot_t / (sum_t sum_j Xtgt^q_j Y_j^p_j s)
/// which makes every a_i identical. `per_component` divides by the
/// component's own regressor sum instead; it is the unique maximizer of the
/// per-component likelihood in each rate, and the two agree when F = 1.
enum class RateFormula { shared_denominator, per_component };

struct RateEstimates {
    std::vector<double> a;
    std::vector<double> b;
};

/// Uses the exponents/categories/target/time-step of `shape`; its rate
/// entries are ignored.
RateEstimates concentrated_rates(const ModelSpec& shape, const BattleSeries& series,
                                 RateFormula formula = RateFormula::shared_denominator);

/// Closed interval used for parameter bounds. lo == hi pins a parameter.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Exact rate profile at fixed exponents, subject to per-rate box bounds
/// (empty bounds: [1e-9, 100] per rate).
///
/// For `ssr` the predictions are linear in the rates, so the box-constrained
/// least-squares problem is solved exactly (active-set enumeration,
/// minimum-norm on rank-deficient windows). For `loglik` the aggregate
/// likelihood is concave in the rates and is maximized by a damped
/// projected Newton iteration started at the shared-denominator estimate.
RateEstimates profiled_rates(const ModelSpec& shape, const BattleSeries& series,
                             Objective objective,
                             std::span<const Interval> rate_bounds = {});

/// Parameter vector layout used by fit/newton_raphson_fit and FitConfig:
/// [a_1..a_F, b_1..b_F, p_1..p_F, q_1..q_F].
struct FitConfig {
    Objective objective = Objective::ssr;

    /// When true (default) the optimizer searches exponent space only and
    /// rates are profiled out exactly at every step; when false all 4F
    /// parameters are free.
    bool concentrate_rates = true;

    /// Size 4F, or empty for the defaults: rates in [1e-9, 100],
    /// exponents in [-10, 50].
    std::vector<Interval> bounds;

    /// Extra start vectors (each size 4F). The defaults — an all-zero start
    /// for ssr, an all-0.5 start for loglik — are always included.
    std::vector<std::vector<double>> starts;

    /// Seed additional starts from a coarse deterministic lattice over the
    /// exponent box (the best cells are refined by the local optimizer).
    bool lattice_seed = true;

    int restarts = 8;           // total local-search starts, >= 1
    int max_iterations = 4000;  // per local search
    double tolerance = 1e-10;   // relative objective-change convergence
    std::uint64_t seed = 0;     // jittered-start generator seed
    bool newton_polish = true;  // finite-difference Newton refinement of the best point

    static std::vector<Interval> default_bounds(std::size_t force_count);
    void validate(std::size_t force_count) const;
};

struct FitResult {
    ModelSpec model;
    Objective objective = Objective::ssr;
    double objective_value = 0.0;
    LossBreakdown fitted;
    std::vector<double> x_residuals; // observed - fitted, target category
    std::vector<double> y_residuals;
    bool converged = false;
    int iterations = 0;
};

/// Bounded multi-start local fit. Deterministic for fixed (series, shape,
/// config): the running best objective is monotone across iterations and
/// the result carries the best of all starts. Throws FitError if every
/// start fails to produce a finite objective.
FitResult fit(const BattleSeries& series, const ModelSpec& shape,
              const FitConfig& config);

/// Ordinary least squares of ln(loss) on [1, ln(own strength),
/// ln(enemy strength)], one regression per side, on the target category of
/// a homogeneous engagement. The exponentiated intercepts become the rates;
/// the Y-side exponents are stored separately since the regressions are
/// independent.
ModelSpec loglinear_fit(const BattleSeries& series,
                        const std::string& target = "tank");

struct NewtonOptions {
    int max_iterations = 100;
    double gradient_tolerance = 1e-8; // on the scaled gradient norm
    double fd_step = 1e-6;            // relative finite-difference step
    double condition_limit = 1e12;    // Hessian condition estimate cutoff
};

/// Newton iteration on the finite-difference gradient of the squared-error
/// objective over the full parameter vector. Throws FitError (carrying the
/// last iterate) when the Hessian condition estimate exceeds the limit.
FitResult newton_raphson_fit(const BattleSeries& series, const ModelSpec& shape,
                             std::span<const double> init,
                             std::span<const Interval> bounds = {},
                             const NewtonOptions& options = {});

} // namespace lanfit

#endif
