#ifndef LANFIT_GOF_HPP
#define LANFIT_GOF_HPP

#include <map>
#include <optional>
#include <span>
#include <string>

namespace lanfit {

/// Observed and fitted daily losses for the two sides, aligned by day.
struct LossPairs {
    std::span<const double> observed_x;
    std::span<const double> fitted_x;
    std::span<const double> observed_y;
    std::span<const double> fitted_y;
};

/// Summary of fit quality. Fields that could not be computed are absent and
/// the reason is recorded under the field name in `errors`.
struct GofReport {
    double ssr = 0.0;
    std::optional<double> r_squared;
    std::optional<double> rmse;
    std::optional<double> ks;
    std::optional<double> chi_square;
    std::optional<double> efficiency;
    std::map<std::string, std::string> errors;
    int n_days = 0;
    int n_residuals = 0;
};

/// Pooled squared error over both sides.
double ssr_of(const LossPairs& pairs);

/// 1 - SSR/SST with per-side means in the total sum of squares.
/// Requires at least two days and non-constant observations.
double r_squared(const LossPairs& pairs);

/// sqrt(ssr / n_days); the denominator is the number of days, not the
/// number of pooled residuals.
double rmse(double ssr_value, int n_days);

/// One-sample Kolmogorov-Smirnov distance between the standardized pooled
/// residuals and the standard normal CDF. Residuals with (sample) standard
/// deviation below 1e-12 yield 0.
double ks_statistic(const LossPairs& pairs);

/// sum (obs - fit)^2 / fit over both sides; all fitted values must be > 0.
double chi_square(const LossPairs& pairs);

/// reference RMSE / achieved RMSE (1 = as good as the reference method).
double efficiency(double rmse_value, double rmse_reference);

/// Computes every statistic, capturing per-field errors instead of
/// throwing. `rmse_reference` feeds the efficiency field when provided.
GofReport gof_bundle(const LossPairs& pairs,
                     std::optional<double> rmse_reference = std::nullopt);

} // namespace lanfit

#endif
