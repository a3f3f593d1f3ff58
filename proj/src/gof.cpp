#include "lanfit/gof.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "lanfit/errors.hpp"

namespace lanfit {

namespace {

void check_shape(const LossPairs& p) {
    if (p.observed_x.size() != p.fitted_x.size() ||
        p.observed_y.size() != p.fitted_y.size() ||
        p.observed_x.size() != p.observed_y.size()) {
        throw ValidationError("observed/fitted series must have equal length");
    }
    if (p.observed_x.empty()) throw ValidationError("no days");
}

double standard_normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

} // namespace

double ssr_of(const LossPairs& p) {
    check_shape(p);
    double acc = 0.0;
    for (std::size_t t = 0; t < p.observed_x.size(); ++t) {
        const double r = p.observed_x[t] - p.fitted_x[t];
        acc += r * r;
    }
    for (std::size_t t = 0; t < p.observed_y.size(); ++t) {
        const double r = p.observed_y[t] - p.fitted_y[t];
        acc += r * r;
    }
    return acc;
}

double r_squared(const LossPairs& p) {
    check_shape(p);
    const std::size_t n = p.observed_x.size();
    if (n < 2) throw ValidationError("r_squared needs at least two days");

    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        mean_x += p.observed_x[t];
        mean_y += p.observed_y[t];
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);

    double sst = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        sst += (p.observed_x[t] - mean_x) * (p.observed_x[t] - mean_x);
        sst += (p.observed_y[t] - mean_y) * (p.observed_y[t] - mean_y);
    }
    if (sst == 0.0) {
        throw DomainError("r_squared undefined: observations are constant (SST = 0)");
    }
    return 1.0 - ssr_of(p) / sst;
}

double rmse(double ssr_value, int n_days) {
    if (n_days < 1) throw ValidationError("rmse needs at least one day");
    if (ssr_value < 0.0) throw ValidationError("negative squared error");
    return std::sqrt(ssr_value / static_cast<double>(n_days));
}

double ks_statistic(const LossPairs& p) {
    check_shape(p);
    std::vector<double> residuals;
    for (std::size_t t = 0; t < p.observed_x.size(); ++t) {
        residuals.push_back(p.observed_x[t] - p.fitted_x[t]);
    }
    for (std::size_t t = 0; t < p.observed_y.size(); ++t) {
        residuals.push_back(p.observed_y[t] - p.fitted_y[t]);
    }
    const std::size_t n = residuals.size();
    if (n < 2) throw ValidationError("ks_statistic needs at least two residuals");

    double mean = 0.0;
    for (double r : residuals) mean += r;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double r : residuals) var += (r - mean) * (r - mean);
    var /= static_cast<double>(n - 1);
    const double sd = std::sqrt(var);
    if (sd < 1e-12) return 0.0;

    for (double& r : residuals) r = (r - mean) / sd;
    std::sort(residuals.begin(), residuals.end());

    double ks = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double cdf = standard_normal_cdf(residuals[i]);
        const double ecdf_hi = static_cast<double>(i + 1) / static_cast<double>(n);
        const double ecdf_lo = static_cast<double>(i) / static_cast<double>(n);
        ks = std::max(ks, std::max(std::abs(ecdf_hi - cdf), std::abs(cdf - ecdf_lo)));
    }
    return ks;
}

double chi_square(const LossPairs& p) {
    check_shape(p);
    double acc = 0.0;
    auto side = [&acc](std::span<const double> obs, std::span<const double> fit) {
        for (std::size_t t = 0; t < obs.size(); ++t) {
            if (!(fit[t] > 0.0)) {
                throw DomainError("chi_square needs positive fitted values");
            }
            const double r = obs[t] - fit[t];
            acc += r * r / fit[t];
        }
    };
    side(p.observed_x, p.fitted_x);
    side(p.observed_y, p.fitted_y);
    return acc;
}

double efficiency(double rmse_value, double rmse_reference) {
    if (rmse_reference < 0.0) throw ValidationError("negative reference RMSE");
    if (!(rmse_value > 0.0)) {
        throw DomainError("efficiency undefined for zero RMSE");
    }
    return rmse_reference / rmse_value;
}

GofReport gof_bundle(const LossPairs& pairs, std::optional<double> rmse_reference) {
    check_shape(pairs);
    GofReport report;
    report.n_days = static_cast<int>(pairs.observed_x.size());
    report.n_residuals = 2 * report.n_days;
    report.ssr = ssr_of(pairs);

    auto capture = [&report](const char* field, auto&& compute) {
        try {
            return std::optional<double>(compute());
        } catch (const Error& e) {
            report.errors[field] = e.what();
            return std::optional<double>();
        }
    };

    report.r_squared = capture("r_squared", [&] { return r_squared(pairs); });
    report.rmse = capture("rmse", [&] { return rmse(report.ssr, report.n_days); });
    report.ks = capture("ks", [&] { return ks_statistic(pairs); });
    report.chi_square = capture("chi_square", [&] { return chi_square(pairs); });
    if (rmse_reference) {
        report.efficiency = capture("efficiency", [&] {
            if (!report.rmse) throw DomainError("rmse unavailable");
            return efficiency(*report.rmse, *rmse_reference);
        });
    } else {
        report.errors["efficiency"] = "no reference RMSE supplied";
    }
    return report;
}

} // namespace lanfit
